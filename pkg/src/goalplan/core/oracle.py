"""Discretized planning MDP solved exactly and by the DQN agent

The full planning problem has a continuous state, so value iteration can only
check the agent on a reduced version of it: total wealth on a grid, a short
horizon and a single funding goal at the end of that horizon. The reduced
problem keeps the action grid, the income-driven C_max and the threshold
reward of a pre-retirement goal, so an agent that solves it exercises the same
machinery as the full environment.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import lognorm

from .agent import AgentConfig, DQNAgent, EpsilonSchedule
from .environment import StepResult
from .goals import (
    ACTION_INCREMENT,
    DEFAULT_THRESHOLD,
    N_ACTIONS,
    ClientProfile,
    Goal,
    GoalSet,
    RewardConfig,
    max_contribution,
    pre_retirement_reward,
)
from .market import CURRENCY_EPS, MarketModel
from .mdp import TabularMDP, ValueTable, value_iteration
from .network import QNetwork
from .rng import RngStream, derive_seed
from .training import run_episode

logger = logging.getLogger(__name__)

MAX_WEALTH_LEVELS = 50
MAX_HORIZON = 10
# Q* gaps below this are floating-point noise, the actions are exactly tied
STRICT_TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class OracleConfig:
    """Size of the discretized planning problem and of the DQN run on it

    Attributes:
        wealth_levels: points of the wealth grid, at most 50.
        horizon: years until the goal, at most 10.
        goal_amount: currency target; defaults to the first pre-retirement goal.
        wealth_max: top of the wealth grid; defaults to twice the goal amount.
        market_nodes: Gauss-Hermite nodes of the annual market factor.
        training_steps: environment steps the agent trains for.
        learning_rate: step size of the tabular TD update.
        tie_tolerance: Q* gap under which two actions count as equally optimal.
        min_agreement: agreement needed for the oracle run to pass.
    """

    wealth_levels: int = 20
    horizon: int = 5
    goal_amount: Optional[float] = None
    wealth_max: Optional[float] = None
    market_nodes: int = 3
    training_steps: int = 150_000
    learning_rate: float = 0.1
    tie_tolerance: float = 0.1
    min_agreement: float = 0.9

    def __post_init__(self):
        if not 2 <= self.wealth_levels <= MAX_WEALTH_LEVELS:
            raise ValueError(
                f"wealth_levels must be in [2, {MAX_WEALTH_LEVELS}], "
                f"got {self.wealth_levels}"
            )
        if not 1 <= self.horizon <= MAX_HORIZON:
            raise ValueError(
                f"horizon must be in [1, {MAX_HORIZON}], got {self.horizon}"
            )
        if self.goal_amount is not None and not self.goal_amount > 0:
            raise ValueError("goal_amount must be > 0")
        if self.wealth_max is not None and not self.wealth_max > 0:
            raise ValueError("wealth_max must be > 0")
        if self.market_nodes < 1:
            raise ValueError("market_nodes must be >= 1")
        if self.training_steps < 1 or not self.learning_rate > 0:
            raise ValueError("training_steps and learning_rate must be positive")
        if self.tie_tolerance < 0 or not 0.0 <= self.min_agreement <= 1.0:
            raise ValueError("tie_tolerance must be >= 0, min_agreement in [0, 1]")


@dataclass(frozen=True, eq=False)
class PlanningMDP:
    """Tabular planning problem plus the grid its states index

    State `year * n_levels + level` holds wealth `grid[level]` at the start of
    `year`; the last state is the absorbing terminal.
    """

    mdp: TabularMDP
    grid: np.ndarray
    horizon: int
    goal: Goal

    @property
    def n_levels(self) -> int:
        return len(self.grid)

    @property
    def terminal_state(self) -> int:
        return self.mdp.n_states - 1

    def state_index(self, year: int, level: int) -> int:
        if not (0 <= year < self.horizon and 0 <= level < self.n_levels):
            raise ValueError(f"no state for year {year}, level {level}")
        return year * self.n_levels + level

    def nearest_level(self, wealth: float) -> int:
        return int(np.argmin(np.abs(self.grid - wealth)))


def _annual_factor(
    market: MarketModel, split: tuple[float, ...]
) -> tuple[float, float]:
    weights = np.asarray(split)
    return float(weights @ market.log_mean), float(weights @ market.log_vol)


def factor_nodes(
    log_mean: float, log_vol: float, n_nodes: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite discretisation of exp(log_mean + log_vol * z)

    Returns:
        (factors, probabilities): probabilities sum to one.
    """
    if log_vol == 0.0:
        return np.array([math.exp(log_mean)]), np.array([1.0])
    z, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    return np.exp(log_mean + log_vol * z), w / w.sum()


def reach_probability(
    wealth: float, amount: float, log_mean: float, log_vol: float
) -> float:
    """P(wealth * exp(log_mean + log_vol * z) >= amount) for standard normal z"""
    if log_vol == 0.0:
        return 1.0 if wealth * math.exp(log_mean) >= amount - CURRENCY_EPS else 0.0
    if wealth <= 0.0:
        return 0.0
    return float(lognorm.sf(amount, s=log_vol, scale=wealth * math.exp(log_mean)))


def _spread(grid: np.ndarray, wealth: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Split probability mass between the grid points around each wealth value"""
    step = grid[1] - grid[0]
    position = np.clip(wealth, grid[0], grid[-1]) / step
    lower = np.minimum(np.floor(position).astype(np.int64), len(grid) - 2)
    upper_share = position - lower
    out = np.zeros(len(grid))
    np.add.at(out, lower, mass * (1.0 - upper_share))
    np.add.at(out, lower + 1, mass * upper_share)
    return out


def _oracle_goal(goals: GoalSet, cfg: OracleConfig) -> Goal:
    first = next(goals.ordered(), None)
    amount = cfg.goal_amount
    if amount is None:
        if first is None:
            raise ValueError(
                "oracle needs goal_amount when no pre-retirement goal is configured"
            )
        amount = first.target_amount
    threshold = first.threshold if first is not None else DEFAULT_THRESHOLD
    name = first.name if first is not None else "goal1"
    return Goal.pre_retirement(cfg.horizon, amount, threshold, name)


def build_planning_mdp(
    profile: ClientProfile,
    goals: GoalSet,
    market: MarketModel,
    reward: RewardConfig,
    cfg: OracleConfig,
) -> PlanningMDP:
    """Discretize the single-goal planning problem into a TabularMDP

    Each year the action picks a contribution on the usual 21-level grid of
    C_max; wealth then grows by one Gauss-Hermite node of the annual factor and
    the result is split linearly between its neighbouring grid levels. The
    last year leads to the terminal state and pays the pre-retirement reward
    of the exact probability that the goal amount is reached.
    """
    goal = _oracle_goal(goals, cfg)
    wealth_max = cfg.wealth_max or 2.0 * goal.target_amount
    grid = np.linspace(0.0, wealth_max, cfg.wealth_levels)
    log_mean, log_vol = _annual_factor(market, profile.contribution_split)
    factors, probs = factor_nodes(log_mean, log_vol, cfg.market_nodes)

    n_levels = cfg.wealth_levels
    n_states = cfg.horizon * n_levels + 1
    terminal_state = n_states - 1
    transition = np.zeros((n_states, N_ACTIONS, n_states))
    rewards = np.zeros((n_states, N_ACTIONS))
    terminal = np.zeros(n_states, dtype=bool)
    terminal[terminal_state] = True
    transition[terminal_state, :, terminal_state] = 1.0

    for year in range(cfg.horizon):
        c_max = max_contribution(profile, year)
        last_year = year == cfg.horizon - 1
        for level, wealth in enumerate(grid):
            s = year * n_levels + level
            for action in range(N_ACTIONS):
                invested = wealth + ACTION_INCREMENT * action * c_max
                if last_year:
                    p = reach_probability(
                        invested, goal.target_amount, log_mean, log_vol
                    )
                    rewards[s, action] = pre_retirement_reward(p, goal, reward)
                    transition[s, action, terminal_state] = 1.0
                else:
                    start = (year + 1) * n_levels
                    transition[s, action, start : start + n_levels] = _spread(
                        grid, invested * factors, probs
                    )

    logger.debug(
        "planning MDP: %d states, goal %.0f in %d years",
        n_states,
        goal.target_amount,
        cfg.horizon,
    )
    mdp = TabularMDP(transition, rewards, terminal)
    return PlanningMDP(mdp, grid, cfg.horizon, goal)


class TabularEnv:
    """Sampling environment over a TabularMDP with one-hot states

    Every episode starts in a uniformly drawn nonterminal state (exploring
    starts) and ends on reaching a terminal state or after `max_steps` steps.
    """

    def __init__(self, mdp: TabularMDP, max_steps: int = 100):
        if max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {max_steps}")
        self.mdp = mdp
        self.max_steps = max_steps
        self._starts = np.flatnonzero(~mdp.terminal)
        if len(self._starts) == 0:
            raise ValueError("the MDP has no nonterminal state to start from")
        self._stream: Optional[RngStream] = None
        self._state = 0
        self._steps = 0

    @property
    def n_states(self) -> int:
        return self.mdp.n_states

    @property
    def state(self) -> int:
        return self._state

    def one_hot(self, state: int) -> np.ndarray:
        x = np.zeros(self.n_states)
        x[state] = 1.0
        return x

    def reset(self, seed: int = 0) -> np.ndarray:
        self._stream = RngStream(seed, 0)
        self._state = int(self._starts[self._stream.integers(0, len(self._starts))])
        self._steps = 0
        return self.one_hot(self._state)

    def step(self, action: int) -> StepResult:
        if self._stream is None:
            raise RuntimeError("call reset() before step()")
        s = self._state
        reward = float(self.mdp.reward[s, action])
        self._state = self._stream.choice(self.n_states, self.mdp.transition[s, action])
        self._steps += 1
        done = bool(self.mdp.terminal[self._state])
        truncated = not done and self._steps >= self.max_steps
        return StepResult(self.one_hot(self._state), reward, done, truncated=truncated)


def tabular_agent_config(
    gamma: float, learning_rate: float, training_steps: int
) -> AgentConfig:
    """Linear, bias-free agent over one-hot states: a replayed Q-learning table

    Exploration stays uniform for the whole run; Q-learning is off-policy, and
    a decaying epsilon would leave some actions of hopeless states untried.
    """
    return AgentConfig(
        gamma=gamma,
        learning_rate=learning_rate,
        batch_size=32,
        target_sync_period=50,
        warmup_transitions=500,
        replay_capacity=min(training_steps, 50_000),
        hidden_sizes=(),
        bias=False,
        epsilon=EpsilonSchedule(start=1.0, end=1.0, decay_steps=0),
    )


def train_tabular_agent(
    env: TabularEnv, config: AgentConfig, training_steps: int, seed: int = 0
) -> DQNAgent:
    """Run episodes of `env` until `training_steps` environment steps are taken"""
    agent = DQNAgent(
        config, env.n_states, env.mdp.n_actions, seed=derive_seed(seed, 0)
    )
    step = episode = 0
    while step < training_steps:
        _, step = run_episode(
            env, agent, step, seed=derive_seed(seed, 1, episode), episode=episode
        )
        episode += 1
    logger.debug("tabular agent trained for %d episodes", episode)
    return agent


def policy_agreement(
    values: ValueTable,
    net: QNetwork,
    terminal: np.ndarray,
    tie_tolerance: float = 0.0,
) -> float:
    """Fraction of nonterminal states where the network's greedy action is optimal

    An action counts as optimal when its Q* lies within `tie_tolerance` of V*.
    """
    states = np.flatnonzero(~np.asarray(terminal))
    features = np.eye(len(terminal))[states]
    chosen = np.argmax(net.forward(features), axis=1)
    q_chosen = values.q[states, chosen]
    best = values.q[states].max(axis=1)
    return float(np.mean(q_chosen >= best - tie_tolerance))


@dataclass
class OracleReport:
    """Agreement of the trained agent with the exact solution

    `agreement` counts an action as optimal within `tie_tolerance` of V*, and
    decides `passed`. `strict_agreement` only accepts exact ties.
    `relative_tolerance` is the tie tolerance as a fraction of the success
    reward rho.
    """

    n_states: int
    agreement: float
    strict_agreement: float
    min_agreement: float
    tie_tolerance: float
    relative_tolerance: float
    start_value: float
    mean_regret: float

    @property
    def passed(self) -> bool:
        return self.agreement >= self.min_agreement


def run_oracle(
    profile: ClientProfile,
    goals: GoalSet,
    market: MarketModel,
    reward: RewardConfig,
    gamma: float,
    cfg: OracleConfig,
    seed: int = 0,
) -> OracleReport:
    """Solve the discretized problem exactly, train a DQN on it and compare"""
    planning = build_planning_mdp(profile, goals, market, reward, cfg)
    values, _ = value_iteration(planning.mdp, gamma)

    env = TabularEnv(planning.mdp, max_steps=cfg.horizon)
    config = tabular_agent_config(gamma, cfg.learning_rate, cfg.training_steps)
    agent = train_tabular_agent(env, config, cfg.training_steps, seed)

    terminal = planning.mdp.terminal
    agreement = policy_agreement(values, agent.net, terminal, cfg.tie_tolerance)
    strict = policy_agreement(values, agent.net, terminal, STRICT_TIE_TOLERANCE)
    states = np.flatnonzero(~terminal)
    chosen = np.argmax(agent.net.forward(np.eye(len(terminal))[states]), axis=1)
    regret = values.v[states] - values.q[states, chosen]
    start_level = planning.nearest_level(profile.initial_balances.total)
    start = planning.state_index(0, start_level)

    report = OracleReport(
        n_states=len(states),
        agreement=agreement,
        strict_agreement=strict,
        min_agreement=cfg.min_agreement,
        tie_tolerance=cfg.tie_tolerance,
        relative_tolerance=cfg.tie_tolerance / reward.rho,
        start_value=float(values.v[start]),
        mean_regret=float(np.mean(regret)),
    )
    logger.info(
        "oracle: %d states, agreement %.1f%% (strict %.1f%%), mean regret %.4f",
        report.n_states,
        100.0 * report.agreement,
        100.0 * report.strict_agreement,
        report.mean_regret,
    )
    if not report.passed:
        logger.warning(
            "oracle agreement %.1f%% is below the required %.1f%%",
            100.0 * report.agreement,
            100.0 * cfg.min_agreement,
        )
    return report
