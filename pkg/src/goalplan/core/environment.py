from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .goals import (
    MAX_CUSTOM_GOALS,
    N_ACTIONS,
    ClientProfile,
    Goal,
    GoalKind,
    GoalSet,
    RewardConfig,
    action_to_contribution,
    max_contribution,
    pre_retirement_reward,
    retirement_reward,
)
from .market import (
    AccountBalances,
    MarketModel,
    estimate_goal_success,
    estimate_retirement_success,
    step_year,
    withdraw_for_goal,
)
from .rng import RngStream, derive_seed

logger = logging.getLogger(__name__)

STATE_DIM = 17
MONEY_SCALE = 1e-6
YEAR_SCALE = 1e-2

# state layout
AGE = 0
DOMICILE = 1
INCOME = 2
SPENDING = 3
TAXABLE = 4
TAX_DEFERRED = 5
TAX_FREE = 6
TOTAL_CONTRIBUTION = 7
N_CUSTOM_GOALS = 8
RETIREMENT_YEARS_LEFT = 9
RETIREMENT_AMOUNT = 10
FIRST_GOAL_SLOT = 11


class EpisodeDoneError(RuntimeError):
    pass


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: float
    done: bool
    info: dict[str, float] = field(default_factory=dict)
    truncated: bool = False


class GoalPlanningEnv:
    """Multi-goal financial planning environment

    One episode runs from year 0 to the retirement year, one step per year. The
    action picks a contribution on a 21-level grid of the year's C_max; the
    balances then evolve through one market draw from the episode stream.
    Rewards are sparse: only goal years pay, through the Monte Carlo success
    probability of the contributions made so far.

    Notes:
        - An instance is single-threaded mutable state. Use one environment per
          worker when running episodes in parallel.
        - Pre-retirement goal amounts leave the portfolio on their target year,
          whether or not the goal was funded in full.

    Examples:
        >>> env = GoalPlanningEnv(profile, goals, MarketModel(), RewardConfig())
        >>> state = env.reset(seed=1)
        >>> result = env.step(20)  # contribute all of C_max this year
    """

    STATE_DIM = STATE_DIM
    N_ACTIONS = N_ACTIONS

    def __init__(
        self,
        profile: ClientProfile,
        goals: GoalSet,
        market: MarketModel,
        reward: Optional[RewardConfig] = None,
    ):
        goals.validate()
        self.profile = profile
        self.goals = goals
        self.market = market
        self.reward_cfg = reward or RewardConfig()
        self._seed = 0
        self._stream: Optional[RngStream] = None
        self._year = 0
        self._balances = profile.initial_balances
        self._contributions: list[float] = []
        self._withdrawals: dict[int, float] = {}
        self._done = True

    @property
    def year(self) -> int:
        return self._year

    @property
    def done(self) -> bool:
        return self._done

    @property
    def balances(self) -> AccountBalances:
        return self._balances

    @property
    def contributions(self) -> list[float]:
        return list(self._contributions)

    @property
    def c_max(self) -> float:
        return max_contribution(self.profile, self._year)

    @property
    def horizon(self) -> int:
        return self.goals.horizon

    def reset(self, seed: int = 0) -> np.ndarray:
        """Start a new episode at year 0 and return its state"""
        self.goals.validate()
        self._seed = int(seed)
        self._stream = RngStream(self._seed, 0)
        self._year = 0
        self._balances = self.profile.initial_balances
        self._contributions = []
        self._withdrawals = {}
        self._done = False
        return self.encode_state()

    def step(self, action: int) -> StepResult:
        """Advance one year

        Raises:
            EpisodeDoneError: if the episode already reached retirement.
            ValueError: if the action is outside the grid.
        """
        if self._done:
            raise EpisodeDoneError("episode is done, call reset() first")
        contribution = action_to_contribution(action, self.c_max)
        factors = self.market.factors(self._stream.normal(len(self.market.log_mean)))
        self._balances = step_year(
            self._balances, contribution, self.profile.contribution_split, factors
        )
        self._contributions.append(contribution)
        self._year += 1

        reward = 0.0
        info: dict[str, float] = {}
        goal = self.goals.goal_at(self._year)
        if goal is not None:
            p_actual = self._estimate_success(goal)
            info[goal.name] = p_actual
            if goal.kind is GoalKind.RETIREMENT:
                reward = retirement_reward(p_actual, goal, self.reward_cfg)
                self._done = True
            else:
                reward = pre_retirement_reward(p_actual, goal, self.reward_cfg)
                self._balances, _ = withdraw_for_goal(
                    self._balances, goal.target_amount
                )
                self._withdrawals[self._year] = goal.target_amount
            logger.debug(
                "year %d goal %s success %.3f reward %.3f",
                self._year,
                goal.name,
                p_actual,
                reward,
            )
        return StepResult(self.encode_state(), reward, self._done, info)

    def _estimate_success(self, goal: Goal) -> float:
        slot = self.goals.names.index(goal.name) + 1
        seed = derive_seed(self._seed, slot)
        n_paths = self.reward_cfg.n_paths
        if goal.kind is GoalKind.RETIREMENT:
            return estimate_retirement_success(
                self.profile,
                self._contributions,
                goal.target_amount,
                goal.drawdown_years,
                self.market,
                n_paths,
                seed,
                withdrawals=self._withdrawals,
            )
        return estimate_goal_success(
            self.profile,
            self._contributions,
            goal.target_amount,
            goal.target_year_index,
            self.market,
            n_paths,
            seed,
            withdrawals=self._withdrawals,
        )

    def encode_state(self) -> np.ndarray:
        """17-dim state: money scaled by 1e-6, years by 1e-2, empty goal slots 0"""
        state = np.zeros(STATE_DIM)
        state[AGE] = (self.profile.current_age + self._year) * YEAR_SCALE
        state[DOMICILE] = self.profile.domicile
        state[INCOME] = self.profile.income_at(self._year) * MONEY_SCALE
        state[SPENDING] = self.profile.annual_spending * MONEY_SCALE
        state[TAXABLE : TAX_FREE + 1] = self._balances.as_array() * MONEY_SCALE
        state[TOTAL_CONTRIBUTION] = sum(self._contributions) * MONEY_SCALE
        state[N_CUSTOM_GOALS] = len(self.goals.pre_retirement) * YEAR_SCALE
        retirement = self.goals.retirement
        state[RETIREMENT_YEARS_LEFT] = self._years_left(retirement) * YEAR_SCALE
        state[RETIREMENT_AMOUNT] = retirement.target_amount * MONEY_SCALE
        for i, goal in enumerate(self.goals.pre_retirement[:MAX_CUSTOM_GOALS]):
            offset = FIRST_GOAL_SLOT + 2 * i
            state[offset] = self._years_left(goal) * YEAR_SCALE
            state[offset + 1] = goal.target_amount * MONEY_SCALE
        return state

    def _years_left(self, goal: Goal) -> int:
        return max(0, goal.target_year_index - self._year)
