import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .network import QNetwork
from .replay import BufferNotReadyError, Experience, ExperienceBatch, ReplayBuffer
from .rng import RngStream, derive_seed

logger = logging.getLogger(__name__)


class TrainingDivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from `start` to `end` over `decay_steps`, then flat"""

    start: float = 1.0
    end: float = 0.01
    decay_steps: int = 100_000

    def __post_init__(self):
        if not self.start >= self.end >= 0.0 or self.start > 1.0:
            raise ValueError(
                f"epsilon schedule needs 1 >= start >= end >= 0, got "
                f"{self.start} -> {self.end}"
            )
        if self.decay_steps < 0:
            raise ValueError(f"decay_steps must be >= 0, got {self.decay_steps}")


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters of the DQN agent

    Attributes:
        gamma (float): discount factor of the TD targets.
        learning_rate (float): gradient step size, the alpha of the Q update.
        batch_size (int): transitions per update.
        target_sync_period (int): optimizer steps between target syncs.
        warmup_transitions (int): transitions collected before the first update.
        replay_capacity (int): replay buffer size.
        hidden_sizes (tuple[int, ...]): hidden layer widths, empty for a
            linear network.
        bias (bool): whether network layers carry biases.
        epsilon (EpsilonSchedule): exploration schedule.
    """

    gamma: float = 0.95
    learning_rate: float = 1e-3
    batch_size: int = 32
    target_sync_period: int = 500
    warmup_transitions: int = 1000
    replay_capacity: int = 50_000
    hidden_sizes: tuple[int, ...] = (64, 64)
    bias: bool = True
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def __post_init__(self):
        hidden = tuple(int(h) for h in self.hidden_sizes)
        object.__setattr__(self, "hidden_sizes", hidden)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("batch_size", "target_sync_period", "replay_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.warmup_transitions < 0:
            raise ValueError("warmup_transitions must be >= 0")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")


def epsilon_at(schedule: EpsilonSchedule, step: int) -> float:
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if step >= schedule.decay_steps:
        return schedule.end
    fraction = step / schedule.decay_steps
    return schedule.start + fraction * (schedule.end - schedule.start)


def q_forward(net: QNetwork, state: np.ndarray) -> np.ndarray:
    return net.forward(state)


def select_action(
    net: QNetwork, state: np.ndarray, epsilon: float, rng: RngStream
) -> int:
    """Epsilon-greedy: uniform random action with probability epsilon, else argmax

    With epsilon == 0 no random number is consumed.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return rng.integers(0, net.n_outputs)
    return int(np.argmax(q_forward(net, state)))


def sample_batch(
    buffer: ReplayBuffer, batch_size: int, rng: RngStream
) -> ExperienceBatch:
    return buffer.sample(batch_size, rng)


def td_targets(
    target: QNetwork, batch: ExperienceBatch, gamma: float
) -> np.ndarray:
    """y = r + gamma * max_a Q_target(s', a), or y = r on terminal transitions"""
    bootstrap = target.forward(batch.next_states).max(axis=1)
    return batch.rewards + gamma * np.where(batch.dones, 0.0, bootstrap)


def td_train_batch(
    net: QNetwork, target: QNetwork, batch: ExperienceBatch, cfg: AgentConfig
) -> float:
    """One gradient step of the TD regression on `batch`

    The target network is only read. Returns the mean squared TD error
    before the step; the step itself descends half of it, so the update of a
    single transition is `learning_rate * (y - Q)`.

    Raises:
        TrainingDivergenceError: if the loss is not finite; parameters are
            left untouched in that case.
    """
    targets = td_targets(target, batch, cfg.gamma)
    loss, grads = net.loss_and_gradients(batch.states, batch.actions, targets)
    if not np.isfinite(loss):
        raise TrainingDivergenceError(f"TD loss is not finite: {loss}")
    net.apply_gradients(grads, cfg.learning_rate)
    return 2.0 * loss


def sync_target(net: QNetwork) -> QNetwork:
    return net.copy()


class DQNAgent:
    """Q-network, target network, replay buffer and exploration stream

    The agent counts optimizer steps and refreshes the target network exactly
    every `target_sync_period` of them.

    Args:
        config: agent hyperparameters.
        n_inputs: state size.
        n_actions: number of discrete actions.
        seed: seeds the network initialisation and the exploration stream.
        net: optional pre-trained network (e.g. from a checkpoint).
    """

    def __init__(
        self,
        config: AgentConfig,
        n_inputs: int,
        n_actions: int,
        seed: int = 0,
        net: Optional[QNetwork] = None,
    ):
        self.config = config
        layer_sizes = (n_inputs, *config.hidden_sizes, n_actions)
        if net is None:
            net = QNetwork(layer_sizes, seed=derive_seed(seed, 0), bias=config.bias)
        elif net.layer_sizes != layer_sizes:
            raise ValueError(
                f"network layers {net.layer_sizes} do not match {layer_sizes}"
            )
        self.net = net
        self.target = sync_target(net)
        self.buffer = ReplayBuffer(config.replay_capacity, n_inputs)
        self.rng = RngStream(derive_seed(seed, 1))
        self.optimizer_steps = 0

    def epsilon(self, step: int) -> float:
        return epsilon_at(self.config.epsilon, step)

    def act(self, state: np.ndarray, epsilon: float) -> int:
        return select_action(self.net, state, epsilon, self.rng)

    def greedy(self, state: np.ndarray) -> int:
        return select_action(self.net, state, 0.0, self.rng)

    def observe(self, experience: Experience) -> None:
        self.buffer.push(experience)

    def learn(self) -> Optional[float]:
        """Train on one replay batch once warmup is over

        Returns:
            the mean squared TD error of the batch, or None when no
            update happened.
        """
        if len(self.buffer) < max(self.config.warmup_transitions, 1):
            return None
        try:
            batch = sample_batch(self.buffer, self.config.batch_size, self.rng)
        except BufferNotReadyError:
            return None
        loss = td_train_batch(self.net, self.target, batch, self.config)
        self.optimizer_steps += 1
        if self.optimizer_steps % self.config.target_sync_period == 0:
            self.target = sync_target(self.net)
            logger.debug("target network synced at step %d", self.optimizer_steps)
        return loss
