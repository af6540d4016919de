from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

import numpy as np

from .market import (
    DEFAULT_DRAWDOWN_YEARS,
    DEFAULT_N_PATHS,
    AccountBalances,
    check_split,
)

N_ACTIONS = 21
ACTION_INCREMENT = 0.05
MAX_CUSTOM_GOALS = 3
DEFAULT_THRESHOLD = 0.70
DEFAULT_TOLERANCE = 0.06
DEFAULT_RHO = 10.0
DEFAULT_RHO_PRIME = 100.0


class GoalKind(str, Enum):
    PRE_RETIREMENT = "pre_retirement"
    RETIREMENT = "retirement"


@dataclass(frozen=True)
class ClientProfile:
    """Demographic and financial starting point of one investor

    Attributes:
        current_age (float): age in years at year 0.
        domicile (int): categorical code of the state of domicile.
        annual_income (float): income in year 0.
        annual_spending (float): pre-retirement spending, constant over time.
        initial_balances (AccountBalances): balances at year 0.
        income_growth_rate (float): yearly income growth.
        contribution_split (tuple): fraction of every contribution going to the
            taxable, tax-deferred and tax-free buckets.
    """

    current_age: float
    annual_income: float
    annual_spending: float
    domicile: int = 0
    initial_balances: AccountBalances = field(default_factory=AccountBalances)
    income_growth_rate: float = 0.0
    contribution_split: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.current_age > 0:
            raise ValueError(f"current_age must be > 0, got {self.current_age}")
        if self.annual_income < 0 or self.annual_spending < 0:
            raise ValueError("annual_income and annual_spending must be >= 0")
        if self.income_growth_rate <= -1:
            raise ValueError("income_growth_rate must be > -1")
        split = tuple(float(v) for v in check_split(self.contribution_split))
        object.__setattr__(self, "contribution_split", split)

    def income_at(self, year_index: int) -> float:
        return self.annual_income * (1.0 + self.income_growth_rate) ** year_index


@dataclass(frozen=True)
class Goal:
    """A pre-retirement or retirement goal

    For the retirement kind, `target_amount` is the annual post-retirement
    spending level and `drawdown_years` is the horizon over which it must be
    funded.
    """

    kind: GoalKind
    target_year_index: int
    target_amount: float
    threshold: float = DEFAULT_THRESHOLD
    tolerance: float = 0.0
    name: str = ""
    drawdown_years: int = DEFAULT_DRAWDOWN_YEARS

    def __post_init__(self):
        object.__setattr__(self, "kind", GoalKind(self.kind))
        if not self.name:
            object.__setattr__(self, "name", self.kind.value)
        if self.target_year_index < 1:
            raise ValueError(
                f"goal {self.name}: target year must be >= 1, "
                f"got {self.target_year_index}"
            )
        if not self.target_amount > 0:
            raise ValueError(f"goal {self.name}: amount must be > 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(
                f"goal {self.name}: threshold must be in (0, 1), got {self.threshold}"
            )
        if self.tolerance < 0 or self.threshold + self.tolerance > 1.0:
            raise ValueError(
                f"goal {self.name}: tolerance must be >= 0 and threshold + "
                f"tolerance <= 1"
            )
        if self.drawdown_years < 1:
            raise ValueError(f"goal {self.name}: drawdown_years must be >= 1")

    @classmethod
    def retirement(
        cls,
        year: int,
        annual_spending: float,
        threshold: float = DEFAULT_THRESHOLD,
        tolerance: float = DEFAULT_TOLERANCE,
        drawdown_years: int = DEFAULT_DRAWDOWN_YEARS,
    ) -> Goal:
        return cls(
            GoalKind.RETIREMENT,
            year,
            annual_spending,
            threshold,
            tolerance,
            "retirement",
            drawdown_years,
        )

    @classmethod
    def pre_retirement(
        cls,
        year: int,
        amount: float,
        threshold: float = DEFAULT_THRESHOLD,
        name: str = "",
    ) -> Goal:
        return cls(GoalKind.PRE_RETIREMENT, year, amount, threshold, 0.0, name)


@dataclass(frozen=True)
class GoalSet:
    """Exactly one retirement goal and up to three earlier custom goals"""

    retirement: Goal
    pre_retirement: tuple[Goal, ...] = ()

    def __post_init__(self):
        goals = tuple(
            sorted(self.pre_retirement, key=lambda g: g.target_year_index)
        )
        named = []
        for i, goal in enumerate(goals, start=1):
            if goal.name == GoalKind.PRE_RETIREMENT.value:
                goal = Goal(
                    goal.kind,
                    goal.target_year_index,
                    goal.target_amount,
                    goal.threshold,
                    goal.tolerance,
                    f"goal{i}",
                )
            named.append(goal)
        object.__setattr__(self, "pre_retirement", tuple(named))
        self.validate()

    def validate(self) -> None:
        if self.retirement.kind is not GoalKind.RETIREMENT:
            raise ValueError("the retirement slot must hold a retirement goal")
        if len(self.pre_retirement) > MAX_CUSTOM_GOALS:
            raise ValueError(
                f"at most {MAX_CUSTOM_GOALS} pre-retirement goals are supported"
            )
        years = [g.target_year_index for g in self.pre_retirement]
        for goal in self.pre_retirement:
            if goal.kind is not GoalKind.PRE_RETIREMENT:
                raise ValueError(f"goal {goal.name} is not a pre-retirement goal")
            if goal.target_year_index >= self.retirement.target_year_index:
                raise ValueError(
                    f"goal {goal.name} (year {goal.target_year_index}) must come "
                    f"before retirement (year {self.retirement.target_year_index})"
                )
        if len(set(years)) != len(years):
            raise ValueError("pre-retirement goal years must be distinct")
        names = [g.name for g in self]
        if len(set(names)) != len(names):
            raise ValueError(f"goal names must be unique, got {names}")

    def __iter__(self) -> Iterator[Goal]:
        yield from self.pre_retirement
        yield self.retirement

    def __len__(self) -> int:
        return len(self.pre_retirement) + 1

    def ordered(self) -> Iterator[Goal]:
        """Pre-retirement goals by target year"""
        yield from self.pre_retirement

    @property
    def names(self) -> list[str]:
        return [g.name for g in self]

    @property
    def horizon(self) -> int:
        return self.retirement.target_year_index

    def goal_at(self, year_index: int) -> Optional[Goal]:
        for goal in self:
            if goal.target_year_index == year_index:
                return goal
        return None


@dataclass(frozen=True)
class RewardConfig:
    rho: float = DEFAULT_RHO
    rho_prime: float = DEFAULT_RHO_PRIME
    n_paths: int = DEFAULT_N_PATHS

    def __post_init__(self):
        if not (self.rho > 0 and self.rho_prime > 0):
            raise ValueError("rho and rho_prime must be > 0")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")


def max_contribution(profile: ClientProfile, year_index: int) -> float:
    """C_max: income of the year minus spending, floored at zero"""
    if year_index < 0:
        raise ValueError(f"year_index must be >= 0, got {year_index}")
    return max(0.0, profile.income_at(year_index) - profile.annual_spending)


def action_to_contribution(action: int, c_max: float) -> float:
    if isinstance(action, (bool, np.bool_)) or not 0 <= action < N_ACTIONS:
        raise ValueError(f"action must be in [0, {N_ACTIONS - 1}], got {action}")
    if int(action) != action:
        raise ValueError(f"action must be an integer, got {action}")
    return ACTION_INCREMENT * int(action) * c_max


def _check_probability(p_actual: float) -> float:
    if not 0.0 <= p_actual <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p_actual}")
    return float(p_actual)


def pre_retirement_reward(p_actual: float, goal: Goal, cfg: RewardConfig) -> float:
    """rho when the goal meets its threshold, a linear shortfall penalty otherwise"""
    p = _check_probability(p_actual)
    if p >= goal.threshold:
        return cfg.rho
    return cfg.rho_prime * (p - goal.threshold)


def retirement_reward(p_actual: float, goal: Goal, cfg: RewardConfig) -> float:
    """rho inside [P, P + tolerance], linear penalties below and above the band"""
    p = _check_probability(p_actual)
    upper = goal.threshold + goal.tolerance
    if p < goal.threshold:
        return cfg.rho_prime * (p - goal.threshold)
    if p > upper:
        return cfg.rho_prime * (upper - p)
    return cfg.rho
