"""YAML investor profile documents

A document describes one persona: the client profile, the goals, the market
model and every training knob. Loading validates the whole document into the
frozen configuration types of `goalplan.core`; unknown keys are rejected at
every level and errors name the dotted path of the offending field.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar, Union

import numpy as np
import yaml

from ..core.agent import AgentConfig, EpsilonSchedule
from ..core.goals import (
    DEFAULT_THRESHOLD,
    DEFAULT_TOLERANCE,
    ClientProfile,
    Goal,
    GoalSet,
    RewardConfig,
)
from ..core.market import (
    DEFAULT_DRAWDOWN_YEARS,
    AccountBalances,
    Bucket,
    MarketModel,
)
from ..core.oracle import OracleConfig
from ..core.training import TrainingConfig

logger = logging.getLogger(__name__)

BUCKET_KEYS = tuple(b.name.lower() for b in Bucket)

_T = TypeVar("_T")


class ConfigError(ValueError):
    pass


class ConfigParseError(ConfigError):
    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[int] = None
    ):
        super().__init__(message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ProfileDocument:
    """A fully validated persona document

    `training` carries the profile, goals, market, reward and agent settings
    as well, so it is all `train` needs.
    """

    training: TrainingConfig
    oracle: OracleConfig = field(default_factory=OracleConfig)

    @property
    def profile(self) -> ClientProfile:
        return self.training.profile

    @property
    def goals(self) -> GoalSet:
        return self.training.goals

    @property
    def market(self) -> MarketModel:
        return self.training.market

    @property
    def reward(self) -> RewardConfig:
        return self.training.reward

    @property
    def agent(self) -> AgentConfig:
        return self.training.agent


def _join(path: str, key: Union[str, int]) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def _mapping(
    data: Any, path: str, allowed: tuple[str, ...], required: tuple[str, ...] = ()
) -> dict:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{_join(path, str(key))}: unknown field")
    for key in required:
        if data.get(key) is None:
            raise ConfigError(f"{_join(path, key)}: required field missing")
    return data


def _number(data: dict, key: str, path: str, default: Any = None) -> Any:
    value = data.get(key, default)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{_join(path, key)}: expected a number, got {value!r}")
    return float(value)


def _integer(data: dict, key: str, path: str, default: Any = None) -> Any:
    value = data.get(key, default)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{_join(path, key)}: expected an integer, got {value!r}")
    return value


def _build(path: str, factory: Callable[..., _T], *args, **kwargs) -> _T:
    try:
        return factory(*args, **kwargs)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _buckets(value: Any, path: str, default: float) -> Union[float, list[float]]:
    """Scalar or {taxable, tax_deferred, tax_free} mapping"""
    if isinstance(value, dict):
        data = _mapping(value, path, BUCKET_KEYS)
        return [_number(data, key, path, default) for key in BUCKET_KEYS]
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number or bucket mapping")
    return float(value)


def _parse_profile(raw: Any) -> ClientProfile:
    path = "profile"
    data = _mapping(
        raw,
        path,
        (
            "current_age",
            "domicile",
            "annual_income",
            "annual_spending",
            "income_growth_rate",
            "balances",
            "contribution_split",
        ),
        required=("current_age", "annual_income", "annual_spending"),
    )
    balances = _mapping(data.get("balances"), _join(path, "balances"), BUCKET_KEYS)
    split_path = _join(path, "contribution_split")
    if "contribution_split" in data:
        split_data = _mapping(data["contribution_split"], split_path, BUCKET_KEYS)
        split = tuple(_number(split_data, k, split_path, 0.0) for k in BUCKET_KEYS)
    else:
        split = (1.0, 0.0, 0.0)
    initial = _build(
        _join(path, "balances"),
        AccountBalances,
        *(_number(balances, k, _join(path, "balances"), 0.0) for k in BUCKET_KEYS),
    )
    return _build(
        path,
        ClientProfile,
        current_age=_number(data, "current_age", path),
        annual_income=_number(data, "annual_income", path),
        annual_spending=_number(data, "annual_spending", path),
        domicile=_integer(data, "domicile", path, 0),
        initial_balances=initial,
        income_growth_rate=_number(data, "income_growth_rate", path, 0.0),
        contribution_split=split,
    )


def _parse_goals(raw: Any) -> GoalSet:
    path = "goals"
    data = _mapping(raw, path, ("retirement", "pre_retirement"), ("retirement",))
    r_path = _join(path, "retirement")
    r_data = _mapping(
        data["retirement"],
        r_path,
        ("year", "annual_spending", "threshold", "tolerance", "drawdown_years"),
        ("year", "annual_spending"),
    )
    retirement = _build(
        r_path,
        Goal.retirement,
        _integer(r_data, "year", r_path),
        _number(r_data, "annual_spending", r_path),
        _number(r_data, "threshold", r_path, DEFAULT_THRESHOLD),
        _number(r_data, "tolerance", r_path, DEFAULT_TOLERANCE),
        _integer(r_data, "drawdown_years", r_path, DEFAULT_DRAWDOWN_YEARS),
    )

    items = data.get("pre_retirement") or []
    p_path = _join(path, "pre_retirement")
    if not isinstance(items, list):
        raise ConfigError(f"{p_path}: expected a list")
    pre_retirement = []
    for i, item in enumerate(items):
        g_path = _join(p_path, i)
        g_data = _mapping(
            item, g_path, ("name", "year", "amount", "threshold"), ("year", "amount")
        )
        name = g_data.get("name", "")
        if not isinstance(name, str):
            raise ConfigError(f"{_join(g_path, 'name')}: expected a string")
        pre_retirement.append(
            _build(
                g_path,
                Goal.pre_retirement,
                _integer(g_data, "year", g_path),
                _number(g_data, "amount", g_path),
                _number(g_data, "threshold", g_path, DEFAULT_THRESHOLD),
                name,
            )
        )
    return _build(path, GoalSet, retirement, tuple(pre_retirement))


def _parse_market(raw: Any) -> MarketModel:
    path = "market"
    data = _mapping(raw, path, ("log_mean", "log_vol"))
    defaults = MarketModel()
    log_mean = _buckets(
        data.get("log_mean"), _join(path, "log_mean"), float(defaults.log_mean[0])
    )
    log_vol = _buckets(
        data.get("log_vol"), _join(path, "log_vol"), float(defaults.log_vol[0])
    )
    return _build(path, MarketModel, log_mean, log_vol)


def _parse_reward(raw: Any) -> RewardConfig:
    path = "reward"
    data = _mapping(raw, path, ("rho", "rho_prime", "n_paths"))
    defaults = RewardConfig()
    return _build(
        path,
        RewardConfig,
        rho=_number(data, "rho", path, defaults.rho),
        rho_prime=_number(data, "rho_prime", path, defaults.rho_prime),
        n_paths=_integer(data, "n_paths", path, defaults.n_paths),
    )


def _parse_agent(raw: Any) -> AgentConfig:
    path = "agent"
    data = _mapping(
        raw,
        path,
        (
            "gamma",
            "learning_rate",
            "batch_size",
            "target_sync_period",
            "warmup_transitions",
            "replay_capacity",
            "hidden_sizes",
            "epsilon",
        ),
    )
    d = AgentConfig()
    e_path = _join(path, "epsilon")
    e_data = _mapping(data.get("epsilon"), e_path, ("start", "end", "decay_steps"))
    epsilon = _build(
        e_path,
        EpsilonSchedule,
        _number(e_data, "start", e_path, d.epsilon.start),
        _number(e_data, "end", e_path, d.epsilon.end),
        _integer(e_data, "decay_steps", e_path, d.epsilon.decay_steps),
    )
    hidden = data.get("hidden_sizes", list(d.hidden_sizes))
    h_path = _join(path, "hidden_sizes")
    if not isinstance(hidden, list) or not all(
        isinstance(h, int) and not isinstance(h, bool) for h in hidden
    ):
        raise ConfigError(f"{h_path}: expected a list of integers")
    return _build(
        path,
        AgentConfig,
        gamma=_number(data, "gamma", path, d.gamma),
        learning_rate=_number(data, "learning_rate", path, d.learning_rate),
        batch_size=_integer(data, "batch_size", path, d.batch_size),
        target_sync_period=_integer(
            data, "target_sync_period", path, d.target_sync_period
        ),
        warmup_transitions=_integer(
            data, "warmup_transitions", path, d.warmup_transitions
        ),
        replay_capacity=_integer(data, "replay_capacity", path, d.replay_capacity),
        hidden_sizes=tuple(hidden),
        epsilon=epsilon,
    )


def _parse_oracle(raw: Any) -> OracleConfig:
    path = "oracle"
    d = OracleConfig()
    data = _mapping(raw, path, tuple(d.__dataclass_fields__))
    return _build(
        path,
        OracleConfig,
        wealth_levels=_integer(data, "wealth_levels", path, d.wealth_levels),
        horizon=_integer(data, "horizon", path, d.horizon),
        goal_amount=_number(data, "goal_amount", path),
        wealth_max=_number(data, "wealth_max", path),
        market_nodes=_integer(data, "market_nodes", path, d.market_nodes),
        training_steps=_integer(data, "training_steps", path, d.training_steps),
        learning_rate=_number(data, "learning_rate", path, d.learning_rate),
        tie_tolerance=_number(data, "tie_tolerance", path, d.tie_tolerance),
        min_agreement=_number(data, "min_agreement", path, d.min_agreement),
    )


def build_document(raw: Any) -> ProfileDocument:
    """Validate an already parsed YAML tree"""
    data = _mapping(
        raw,
        "<document>",
        ("profile", "goals", "market", "reward", "agent", "training", "oracle"),
        ("profile", "goals"),
    )
    path = "training"
    t_data = _mapping(
        data.get("training"),
        path,
        ("n_episodes", "seed", "moving_average_window", "log_every"),
    )
    training = _build(
        path,
        TrainingConfig,
        profile=_parse_profile(data["profile"]),
        goals=_parse_goals(data["goals"]),
        market=_parse_market(data.get("market")),
        reward=_parse_reward(data.get("reward")),
        agent=_parse_agent(data.get("agent")),
        n_episodes=_integer(t_data, "n_episodes", path, 6000),
        seed=_integer(t_data, "seed", path, 0),
        moving_average_window=_integer(t_data, "moving_average_window", path, 100),
        log_every=_integer(t_data, "log_every", path, 100),
    )
    return ProfileDocument(training, _parse_oracle(data.get("oracle")))


def parse_document(text: str, source: str = "<string>") -> ProfileDocument:
    """Parse and validate YAML text

    Raises:
        ConfigParseError: malformed YAML, with the line and column of the error.
        ConfigError: schema violation, naming the dotted field path.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        if mark is None:
            raise ConfigParseError(f"{source}: {e}") from e
        line, column = mark.line + 1, mark.column + 1
        problem = getattr(e, "problem", None) or "invalid YAML"
        raise ConfigParseError(
            f"{source}:{line}:{column}: {problem}", line, column
        ) from e
    return build_document(raw)


def load_document(path: Union[str, Path]) -> ProfileDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config ({e.strerror})") from e
    document = parse_document(text, str(path))
    logger.debug("loaded profile document %s", path)
    return document


def load_profile(
    path: Union[str, Path],
) -> tuple[
    ClientProfile, GoalSet, MarketModel, RewardConfig, AgentConfig, TrainingConfig
]:
    doc = load_document(path)
    return doc.profile, doc.goals, doc.market, doc.reward, doc.agent, doc.training


def _buckets_out(values: np.ndarray) -> Union[float, dict[str, float]]:
    if np.all(values == values[0]):
        return float(values[0])
    return {key: float(v) for key, v in zip(BUCKET_KEYS, values)}


def document_to_dict(document: ProfileDocument) -> dict:
    """Plain-data form of a document with every default written out"""
    t = document.training
    profile, goals, agent = t.profile, t.goals, t.agent
    retirement = goals.retirement
    balances = profile.initial_balances.as_array().tolist()
    return {
        "profile": {
            "current_age": profile.current_age,
            "domicile": profile.domicile,
            "annual_income": profile.annual_income,
            "annual_spending": profile.annual_spending,
            "income_growth_rate": profile.income_growth_rate,
            "balances": dict(zip(BUCKET_KEYS, balances)),
            "contribution_split": dict(zip(BUCKET_KEYS, profile.contribution_split)),
        },
        "goals": {
            "retirement": {
                "year": retirement.target_year_index,
                "annual_spending": retirement.target_amount,
                "threshold": retirement.threshold,
                "tolerance": retirement.tolerance,
                "drawdown_years": retirement.drawdown_years,
            },
            "pre_retirement": [
                {
                    "name": g.name,
                    "year": g.target_year_index,
                    "amount": g.target_amount,
                    "threshold": g.threshold,
                }
                for g in goals.ordered()
            ],
        },
        "market": {
            "log_mean": _buckets_out(t.market.log_mean),
            "log_vol": _buckets_out(t.market.log_vol),
        },
        "reward": {
            "rho": t.reward.rho,
            "rho_prime": t.reward.rho_prime,
            "n_paths": t.reward.n_paths,
        },
        "agent": {
            "gamma": agent.gamma,
            "learning_rate": agent.learning_rate,
            "batch_size": agent.batch_size,
            "target_sync_period": agent.target_sync_period,
            "warmup_transitions": agent.warmup_transitions,
            "replay_capacity": agent.replay_capacity,
            "hidden_sizes": list(agent.hidden_sizes),
            "epsilon": {
                "start": agent.epsilon.start,
                "end": agent.epsilon.end,
                "decay_steps": agent.epsilon.decay_steps,
            },
        },
        "training": {
            "n_episodes": t.n_episodes,
            "seed": t.seed,
            "moving_average_window": t.moving_average_window,
            "log_every": t.log_every,
        },
        "oracle": {
            name: getattr(document.oracle, name)
            for name in document.oracle.__dataclass_fields__
        },
    }


def dump_document(document: ProfileDocument) -> str:
    """Serialise a document so that parsing the result gives an equal document"""
    return yaml.safe_dump(document_to_dict(document), sort_keys=False)
