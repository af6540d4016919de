from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np
import pandas as pd

from .agent import AgentConfig, DQNAgent, TrainingDivergenceError
from .environment import N_ACTIONS, STATE_DIM, GoalPlanningEnv, StepResult
from .goals import ClientProfile, GoalKind, GoalSet, RewardConfig
from .hooks import TrainingHook
from .market import MarketModel
from .mdp import discounted_return
from .network import QNetwork
from .replay import Experience
from .rng import derive_seed

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
# derive_seed namespaces under the master seed
_AGENT_KEY = 0
_ENV_KEY = 1


class CheckpointCompatibilityError(ValueError):
    pass


class Environment(Protocol):
    def reset(self, seed: int = 0) -> np.ndarray: ...

    def step(self, action: int) -> StepResult: ...


@dataclass(frozen=True)
class TrainingConfig:
    """Everything a training run depends on, master seed included"""

    profile: ClientProfile
    goals: GoalSet
    market: MarketModel = field(default_factory=MarketModel)
    reward: RewardConfig = field(default_factory=RewardConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    n_episodes: int = 6000
    seed: int = 0
    moving_average_window: int = 100
    log_every: int = 100

    def __post_init__(self):
        if self.n_episodes < 1:
            raise ValueError(f"n_episodes must be >= 1, got {self.n_episodes}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.moving_average_window < 1 or self.log_every < 1:
            raise ValueError("moving_average_window and log_every must be >= 1")


@dataclass
class EpisodeMetrics:
    episode: int
    accumulated_reward: float
    success: dict[str, float]
    epsilon: float
    steps: int
    discounted_return: float = 0.0


@dataclass(eq=False)
class Checkpoint:
    net: QNetwork
    agent: AgentConfig
    step: int = 0
    format_version: int = CHECKPOINT_FORMAT_VERSION

    def __eq__(self, other) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self.agent == other.agent
            and self.step == other.step
            and self.format_version == other.format_version
            and self.net.same_parameters(other.net)
        )


def run_episode(
    env: Environment,
    agent: DQNAgent,
    global_step: int,
    seed: int = 0,
    episode: int = 0,
) -> tuple[EpisodeMetrics, int]:
    """Play one epsilon-greedy episode, storing and learning from every transition

    Returns:
        (metrics, global step after the episode)
    """
    state = env.reset(seed)
    rewards: list[float] = []
    success: dict[str, float] = {}
    while True:
        epsilon = agent.epsilon(global_step)
        action = agent.act(state, epsilon)
        result = env.step(action)
        agent.observe(
            Experience(state, action, result.reward, result.next_state, result.done)
        )
        agent.learn()
        global_step += 1
        rewards.append(result.reward)
        success.update(result.info)
        state = result.next_state
        if result.done or result.truncated:
            break
    metrics = EpisodeMetrics(
        episode=episode,
        accumulated_reward=float(sum(rewards)),
        success=success,
        epsilon=epsilon,
        steps=len(rewards),
        discounted_return=discounted_return(rewards, agent.config.gamma),
    )
    return metrics, global_step


class Trainer:
    """Composition root of a training run

    Owns the environment, the agent, the global step counter and the hooks.
    Per-episode environment seeds and the agent seed are derived from the
    master seed, so a (config, seed) pair fully determines every metric and
    the final parameters.

    Attributes:
      - env: the planning environment.
      - agent (DQNAgent): learner.
      - hooks (list[TrainingHook]): registered hooks, sorted by priority.
      - metrics (list[EpisodeMetrics]): one row per finished episode.
      - global_step (int): environment steps taken so far.
    """

    def __init__(
        self,
        config: TrainingConfig,
        env: Optional[Environment] = None,
        agent: Optional[DQNAgent] = None,
    ):
        self.config = config
        self.env = env or GoalPlanningEnv(
            config.profile, config.goals, config.market, config.reward
        )
        self.agent = agent or DQNAgent(
            config.agent,
            STATE_DIM,
            N_ACTIONS,
            seed=derive_seed(config.seed, _AGENT_KEY),
        )
        self.hooks: list[TrainingHook] = []
        self.metrics: list[EpisodeMetrics] = []
        self.global_step = 0

    def register_hook(self, hook: TrainingHook) -> None:
        self.hooks.append(hook)
        self.hooks.sort(key=lambda h: h.priority)

    def episode_seed(self, episode: int) -> int:
        return derive_seed(self.config.seed, _ENV_KEY, episode)

    def run_episode(self) -> EpisodeMetrics:
        episode = len(self.metrics)
        metrics, self.global_step = run_episode(
            self.env,
            self.agent,
            self.global_step,
            seed=self.episode_seed(episode),
            episode=episode,
        )
        self.metrics.append(metrics)
        for hook in self.hooks:
            if hook.enabled:
                try:
                    hook.on_episode_end(self, metrics)
                except Exception as e:
                    hook.on_error(self, e)
        return metrics

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(self.agent.net.copy(), self.agent.config, self.global_step)

    def train(self) -> tuple[Checkpoint, list[EpisodeMetrics]]:
        remaining = self.config.n_episodes - len(self.metrics)
        logger.info(
            "training %d episodes (seed %d, horizon %s)",
            remaining,
            self.config.seed,
            getattr(self.env, "horizon", "?"),
        )
        try:
            for _ in range(remaining):
                self.run_episode()
        except TrainingDivergenceError:
            logger.error(
                "training diverged in episode %d at global step %d",
                len(self.metrics),
                self.global_step,
            )
            raise
        finally:
            for hook in self.hooks:
                hook.shutdown(self)
        logger.info("training finished after %d steps", self.global_step)
        return self.checkpoint(), list(self.metrics)


def train(
    config: TrainingConfig, hooks: Sequence[TrainingHook] = ()
) -> tuple[Checkpoint, list[EpisodeMetrics]]:
    trainer = Trainer(config)
    for hook in hooks:
        trainer.register_hook(hook)
    return trainer.train()


def moving_average(series: Sequence[float], window: int) -> np.ndarray:
    """Trailing mean over `window` values, the first values average what exists"""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    values = pd.Series(np.asarray(series, dtype=np.float64))
    return values.rolling(window, min_periods=1).mean().to_numpy()


def success_series(metrics: Sequence[EpisodeMetrics], goal_name: str) -> np.ndarray:
    """Observed success probability of one goal per episode, NaN when absent"""
    return np.array([m.success.get(goal_name, np.nan) for m in metrics])


@dataclass(frozen=True)
class ScheduleRow:
    year: int
    age: float
    c_max: float
    action: int
    contribution: float


@dataclass
class EvaluationReport:
    """Summary of greedy episodes played by a checkpoint

    Attributes:
        n_episodes: episodes played.
        mean_reward / reward_std: accumulated (undiscounted) reward statistics.
        mean_discounted_return: mean discounted return under the agent's gamma.
        success: mean observed success probability per goal.
        schedule: greedy contribution schedule of the first episode.
        schedule_is_stable: whether every episode chose the same actions.
        retirement_in_band: whether the mean retirement probability lies in
            [threshold, threshold + tolerance].
    """

    n_episodes: int
    mean_reward: float
    reward_std: float
    mean_discounted_return: float
    success: dict[str, float]
    schedule: list[ScheduleRow]
    schedule_is_stable: bool
    retirement_in_band: bool


def _check_compatible(checkpoint: Checkpoint) -> None:
    net = checkpoint.net
    if net.n_inputs != STATE_DIM or net.n_outputs != N_ACTIONS:
        raise CheckpointCompatibilityError(
            f"checkpoint network maps {net.n_inputs} -> {net.n_outputs}, the "
            f"environment needs {STATE_DIM} -> {N_ACTIONS}"
        )


def _greedy_episode(
    env: GoalPlanningEnv, net: QNetwork, seed: int
) -> tuple[list[float], dict[str, float], list[ScheduleRow]]:
    state = env.reset(seed)
    rewards: list[float] = []
    success: dict[str, float] = {}
    rows: list[ScheduleRow] = []
    done = False
    while not done:
        year, c_max = env.year, env.c_max
        action = int(np.argmax(net.forward(state)))
        result = env.step(action)
        rows.append(
            ScheduleRow(
                year=year,
                age=env.profile.current_age + year,
                c_max=c_max,
                action=action,
                contribution=env.contributions[-1],
            )
        )
        rewards.append(result.reward)
        success.update(result.info)
        state = result.next_state
        done = result.done
    return rewards, success, rows


def evaluate_policy(
    checkpoint: Checkpoint,
    profile: ClientProfile,
    goals: GoalSet,
    model: MarketModel,
    n_episodes: int = 10,
    seed: int = 0,
    reward: Optional[RewardConfig] = None,
) -> EvaluationReport:
    """Play greedy (epsilon = 0) episodes without touching the checkpoint

    Episode i uses a seed derived from (seed, i) only, so the report does not
    depend on the order the episodes are played in.

    Raises:
        CheckpointCompatibilityError: if the network does not fit the
            environment's state and action sizes.
    """
    _check_compatible(checkpoint)
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1, got {n_episodes}")
    env = GoalPlanningEnv(profile, goals, model, reward)
    gamma = checkpoint.agent.gamma

    totals, discounted = [], []
    success: dict[str, list[float]] = {name: [] for name in goals.names}
    schedules: list[list[ScheduleRow]] = []
    for episode in range(n_episodes):
        rewards, probs, rows = _greedy_episode(
            env, checkpoint.net, derive_seed(seed, _ENV_KEY, episode)
        )
        totals.append(sum(rewards))
        discounted.append(discounted_return(rewards, gamma))
        for name, p in probs.items():
            success[name].append(p)
        schedules.append(rows)

    mean_success = {
        name: float(np.mean(values)) if values else float("nan")
        for name, values in success.items()
    }
    first_actions = [row.action for row in schedules[0]]
    stable = all([row.action for row in rows] == first_actions for rows in schedules)
    retirement = goals.retirement
    p_retirement = mean_success[retirement.name]
    in_band = (
        retirement.kind is GoalKind.RETIREMENT
        and retirement.threshold
        <= p_retirement
        <= retirement.threshold + retirement.tolerance
    )
    return EvaluationReport(
        n_episodes=n_episodes,
        mean_reward=float(np.mean(totals)),
        reward_std=float(np.std(totals)),
        mean_discounted_return=float(np.mean(discounted)),
        success=mean_success,
        schedule=schedules[0],
        schedule_is_stable=stable,
        retirement_in_band=in_band,
    )
