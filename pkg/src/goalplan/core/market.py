"""Transparent capital-market model and Monte Carlo goal-success estimators.

Annual gross returns are i.i.d. lognormal per account bucket. Within a year the
order of operations is fixed: contribute, grow, then (on goal years only)
withdraw the goal amount.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

import numpy as np

from .rng import RngStream

if TYPE_CHECKING:
    from .goals import ClientProfile

N_BUCKETS = 3
DEFAULT_LOG_MEAN = math.log(1.05)
DEFAULT_LOG_VOL = 0.12
DEFAULT_N_PATHS = 1000
DEFAULT_DRAWDOWN_YEARS = 30
# shortfalls below this are rounding noise, not ruin
CURRENCY_EPS = 1e-6


class Bucket(IntEnum):
    TAXABLE = 0
    TAX_DEFERRED = 1
    TAX_FREE = 2


WITHDRAWAL_ORDER = (Bucket.TAXABLE, Bucket.TAX_FREE, Bucket.TAX_DEFERRED)


def _per_bucket(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(N_BUCKETS, float(arr))
    if arr.shape != (N_BUCKETS,):
        raise ValueError(f"{name} needs {N_BUCKETS} bucket values, got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Per-bucket annual log-return mean and volatility"""

    log_mean: np.ndarray = field(
        default_factory=lambda: np.full(N_BUCKETS, DEFAULT_LOG_MEAN)
    )
    log_vol: np.ndarray = field(
        default_factory=lambda: np.full(N_BUCKETS, DEFAULT_LOG_VOL)
    )

    def __post_init__(self):
        log_mean = _per_bucket(self.log_mean, "log_mean")
        log_vol = _per_bucket(self.log_vol, "log_vol")
        if np.any(log_vol < 0) or not np.all(np.isfinite(log_mean)):
            raise ValueError("log_vol must be >= 0 and log_mean finite")
        object.__setattr__(self, "log_mean", log_mean)
        object.__setattr__(self, "log_vol", log_vol)

    @classmethod
    def uniform(
        cls, log_mean: float = DEFAULT_LOG_MEAN, log_vol: float = DEFAULT_LOG_VOL
    ) -> MarketModel:
        return cls(np.full(N_BUCKETS, log_mean), np.full(N_BUCKETS, log_vol))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarketModel):
            return NotImplemented
        return np.array_equal(self.log_mean, other.log_mean) and np.array_equal(
            self.log_vol, other.log_vol
        )

    def expected_factor(self, bucket: int) -> float:
        """E[exp(z)] = exp(mu + sigma^2 / 2)"""
        return math.exp(self.log_mean[bucket] + 0.5 * self.log_vol[bucket] ** 2)

    def factors(self, z: np.ndarray) -> np.ndarray:
        """Map standard normal draws of shape (..., N_BUCKETS) to gross factors"""
        return np.exp(self.log_mean + self.log_vol * z)


@dataclass(frozen=True)
class AccountBalances:
    taxable: float = 0.0
    tax_deferred: float = 0.0
    tax_free: float = 0.0

    def __post_init__(self):
        for name in ("taxable", "tax_deferred", "tax_free"):
            value = float(getattr(self, name))
            if not value >= 0.0:
                raise ValueError(f"balance {name} must be >= 0, got {value}")
            object.__setattr__(self, name, value)

    @property
    def total(self) -> float:
        return self.taxable + self.tax_deferred + self.tax_free

    def as_array(self) -> np.ndarray:
        return np.array([self.taxable, self.tax_deferred, self.tax_free])

    @classmethod
    def from_array(cls, values: np.ndarray) -> AccountBalances:
        values = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
        return cls(*(float(v) for v in values))


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Per-path bucket balances of shape (n_paths, N_BUCKETS) at a target year"""

    balances: np.ndarray

    def __post_init__(self):
        if self.balances.ndim != 2 or self.balances.shape[0] < 1:
            raise ValueError("a path ensemble needs at least one path")

    @property
    def n_paths(self) -> int:
        return self.balances.shape[0]

    @property
    def terminal_wealth(self) -> np.ndarray:
        return self.balances.sum(axis=1)

    def success_rate(self, amount: float) -> float:
        return float(np.mean(self.terminal_wealth >= amount - CURRENCY_EPS))

    def percentile(self, q: float) -> float:
        return float(np.percentile(self.terminal_wealth, q))


def sample_annual_return(model: MarketModel, bucket: int, rng: RngStream) -> float:
    """Draw one gross return factor exp(z), z ~ N(log_mean, log_vol^2)"""
    bucket = Bucket(bucket)
    z = rng.normal()
    return math.exp(model.log_mean[bucket] + model.log_vol[bucket] * z)


def check_split(split: Sequence[float]) -> np.ndarray:
    split = _per_bucket(split, "split")
    if np.any(split < 0) or not math.isclose(split.sum(), 1.0, abs_tol=1e-9):
        raise ValueError(f"split fractions must be >= 0 and sum to 1, got {split}")
    return split


def step_year(
    balances: AccountBalances,
    contribution: float,
    split: Sequence[float],
    factors: Sequence[float],
) -> AccountBalances:
    """Contribute, then grow every bucket by its gross factor"""
    if contribution < 0:
        raise ValueError(f"contribution must be >= 0, got {contribution}")
    split = check_split(split)
    factors = _per_bucket(factors, "factors")
    new = (balances.as_array() + contribution * split) * factors
    return AccountBalances.from_array(new)


def _withdraw_columns(balances: np.ndarray, amount: float) -> np.ndarray:
    """Vectorized withdrawal over the last axis, returns the amount taken per row

    `balances` is modified in place.
    """
    remaining = np.full(balances.shape[:-1], float(amount))
    for bucket in WITHDRAWAL_ORDER:
        take = np.minimum(balances[..., bucket], remaining)
        balances[..., bucket] -= take
        remaining -= take
    return amount - remaining


def withdraw_for_goal(
    balances: AccountBalances, amount: float
) -> tuple[AccountBalances, float]:
    """Withdraw up to `amount`: taxable first, then tax-free, then tax-deferred

    Returns:
        (new balances, amount actually withdrawn)
    """
    if amount < 0:
        raise ValueError(f"withdrawal amount must be >= 0, got {amount}")
    values = balances.as_array()
    withdrawn = _withdraw_columns(values, amount)
    return AccountBalances.from_array(values), float(withdrawn)


def _draw_paths(n_paths: int, n_years: int, seed: int) -> np.ndarray:
    """Standard normal draws of shape (n_paths, n_years, N_BUCKETS)

    Path i is drawn from RngStream(seed, i) only, so any chunking of the paths
    reproduces the same draws.
    """
    z = np.empty((n_paths, n_years, N_BUCKETS))
    for i in range(n_paths):
        z[i] = RngStream(seed, i).normal((n_years, N_BUCKETS))
    return z


def _accumulate(
    profile: ClientProfile,
    contributions: Sequence[float],
    factors: np.ndarray,
    withdrawals: Mapping[int, float],
) -> np.ndarray:
    n_paths = factors.shape[0]
    split = check_split(profile.contribution_split)
    balances = np.tile(profile.initial_balances.as_array(), (n_paths, 1))
    for year, contribution in enumerate(contributions):
        if contribution < 0:
            raise ValueError(f"contribution must be >= 0, got {contribution}")
        balances = (balances + contribution * split) * factors[:, year]
        amount = withdrawals.get(year + 1, 0.0)
        if amount > 0:
            _withdraw_columns(balances, amount)
    return balances


def simulate_paths(
    profile: ClientProfile,
    contributions: Sequence[float],
    model: MarketModel,
    n_paths: int = DEFAULT_N_PATHS,
    seed: int = 0,
    withdrawals: Optional[Mapping[int, float]] = None,
) -> PathEnsemble:
    """Replay a contribution sequence under `n_paths` independent market paths

    Args:
        profile: starting balances and contribution split.
        contributions: one contribution per year, year 0 first.
        model: market model.
        n_paths: number of Monte Carlo paths.
        seed: key of the per-path streams.
        withdrawals: {year_index: amount} withdrawn at the end of that year
            (prior goals). Withdrawals on the final year are not applied.

    Returns:
        PathEnsemble with the per-path balances after `len(contributions)` years.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    n_years = len(contributions)
    withdrawals = {
        y: a for y, a in (withdrawals or {}).items() if 1 <= y < n_years
    }
    factors = model.factors(_draw_paths(n_paths, n_years, seed))
    return PathEnsemble(_accumulate(profile, contributions, factors, withdrawals))


def estimate_goal_success(
    profile: ClientProfile,
    contributions: Sequence[float],
    goal_amount: float,
    goal_year_index: int,
    model: MarketModel,
    n_paths: int = DEFAULT_N_PATHS,
    seed: int = 0,
    withdrawals: Optional[Mapping[int, float]] = None,
) -> float:
    """Monte Carlo estimate of P(total balance at the goal year >= goal_amount)"""
    if len(contributions) != goal_year_index:
        raise ValueError(
            f"expected {goal_year_index} contributions, got {len(contributions)}"
        )
    ensemble = simulate_paths(
        profile, contributions, model, n_paths, seed, withdrawals
    )
    return ensemble.success_rate(goal_amount)


def estimate_retirement_success(
    profile: ClientProfile,
    contributions: Sequence[float],
    annual_spending: float,
    drawdown_years: int,
    model: MarketModel,
    n_paths: int = DEFAULT_N_PATHS,
    seed: int = 0,
    withdrawals: Optional[Mapping[int, float]] = None,
) -> float:
    """Monte Carlo estimate of funding `annual_spending` for `drawdown_years`

    Each path accumulates to the retirement year, then withdraws the spending
    level at every post-retirement year-start with growth continuing. A path
    fails at the first year-start whose balance cannot cover the spending.
    """
    if drawdown_years < 1:
        raise ValueError(f"drawdown_years must be >= 1, got {drawdown_years}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if annual_spending < 0:
        raise ValueError(f"annual_spending must be >= 0, got {annual_spending}")
    n_years = len(contributions)
    withdrawals = {
        y: a for y, a in (withdrawals or {}).items() if 1 <= y < n_years
    }
    # accumulation draws come first so they match simulate_paths with the same seed
    z = _draw_paths(n_paths, n_years + drawdown_years, seed)
    factors = model.factors(z)
    balances = _accumulate(profile, contributions, factors, withdrawals)

    alive = np.ones(n_paths, dtype=bool)
    for year in range(drawdown_years):
        short = balances.sum(axis=1) < annual_spending - CURRENCY_EPS
        alive &= ~short
        _withdraw_columns(balances, annual_spending)
        balances *= factors[:, n_years + year]
    return float(np.mean(alive))
