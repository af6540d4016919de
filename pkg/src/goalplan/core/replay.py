from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .rng import RngStream


class BufferNotReadyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Experience:
    """One (state, action, reward, next_state, done) transition"""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ExperienceBatch:
    """Columnar view of sampled experiences, one array per field"""

    __slots__ = ("states", "actions", "rewards", "next_states", "dones")

    def __init__(
        self,
        states: np.ndarray,
        actions: np.ndarray,
        rewards: np.ndarray,
        next_states: np.ndarray,
        dones: np.ndarray,
    ):
        self.states = states
        self.actions = actions
        self.rewards = rewards
        self.next_states = next_states
        self.dones = dones

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self) -> Iterator[Experience]:
        for i in range(len(self)):
            yield Experience(
                self.states[i],
                int(self.actions[i]),
                float(self.rewards[i]),
                self.next_states[i],
                bool(self.dones[i]),
            )

    def __repr__(self) -> str:
        return f"<ExperienceBatch size={len(self)}>"

    @classmethod
    def from_experiences(cls, experiences: list[Experience]) -> "ExperienceBatch":
        return cls(
            np.array([e.state for e in experiences], dtype=np.float64),
            np.array([e.action for e in experiences], dtype=np.int64),
            np.array([e.reward for e in experiences], dtype=np.float64),
            np.array([e.next_state for e in experiences], dtype=np.float64),
            np.array([e.done for e in experiences], dtype=bool),
        )


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int):
        """Fixed-capacity FIFO store of transitions

        Transitions live in dense preallocated numpy columns indexed by a ring
        pointer. Once full, every push overwrites the oldest row. Sampling is
        uniform with replacement over the rows currently held.

        Args:
            capacity: maximum number of transitions kept.
            state_dim: length of the state vectors.
        """
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.state_dim = state_dim
        self.storage: dict[str, np.ndarray] = {
            "states": np.zeros((capacity, state_dim)),
            "actions": np.zeros(capacity, dtype=np.int64),
            "rewards": np.zeros(capacity),
            "next_states": np.zeros((capacity, state_dim)),
            "dones": np.zeros(capacity, dtype=bool),
        }
        self._next = 0
        self._length = 0

    def __len__(self) -> int:
        return self._length

    def push(self, experience: Experience) -> None:
        state = np.asarray(experience.state, dtype=np.float64)
        next_state = np.asarray(experience.next_state, dtype=np.float64)
        if state.shape != (self.state_dim,) or next_state.shape != (self.state_dim,):
            raise ValueError(
                f"buffer expects states of shape {(self.state_dim,)}, got "
                f"{state.shape} and {next_state.shape}"
            )
        row = self._next
        self.storage["states"][row] = state
        self.storage["actions"][row] = experience.action
        self.storage["rewards"][row] = experience.reward
        self.storage["next_states"][row] = next_state
        self.storage["dones"][row] = experience.done
        self._next = (row + 1) % self.capacity
        self._length = min(self._length + 1, self.capacity)

    def _rows(self, rows: np.ndarray) -> ExperienceBatch:
        return ExperienceBatch(
            **{name: column[rows] for name, column in self.storage.items()}
        )

    def sample(self, batch_size: int, rng: RngStream) -> ExperienceBatch:
        """Uniform sample with replacement

        Raises:
            BufferNotReadyError: if fewer than `batch_size` transitions are held.
        """
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if self._length < batch_size:
            raise BufferNotReadyError(
                f"buffer holds {self._length} transitions, {batch_size} requested"
            )
        return self._rows(rng.integers(0, self._length, size=batch_size))

    def experiences(self) -> ExperienceBatch:
        """Everything currently held, oldest first"""
        if self._length < self.capacity:
            rows = np.arange(self._length)
        else:
            rows = (np.arange(self.capacity) + self._next) % self.capacity
        return self._rows(rows)
