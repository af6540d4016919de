import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

PROBABILITY_ATOL = 1e-9
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERATIONS = 100_000


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscountedReturnConfig:
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """A finite MDP stored as dense numpy arrays.

    Attributes:
        transition: array of shape (S, A, S), `transition[s, a, s2]` is the
            probability of moving from s to s2 under action a.
        reward: array of shape (S, A) with the expected reward of (s, a).
        terminal: boolean array of shape (S,). Terminal states must absorb
            with probability 1 and reward 0.
    """

    transition: np.ndarray
    reward: np.ndarray
    terminal: np.ndarray

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=np.float64)
        reward = np.asarray(self.reward, dtype=np.float64)
        terminal = np.asarray(self.terminal, dtype=bool)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "terminal", terminal)

        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ValueError(
                f"transition must have shape (S, A, S), got {transition.shape}"
            )
        n_states, n_actions = transition.shape[:2]
        if n_states < 1 or n_actions < 1:
            raise ValueError("MDP needs at least one state and one action")
        if reward.shape != (n_states, n_actions):
            raise ValueError(
                f"reward must have shape {(n_states, n_actions)}, got {reward.shape}"
            )
        if terminal.shape != (n_states,):
            raise ValueError(
                f"terminal must have shape {(n_states,)}, got {terminal.shape}"
            )
        if np.any(transition < 0):
            raise ValueError("transition probabilities must be nonnegative")
        row_sums = transition.sum(axis=2)
        if not np.allclose(row_sums, 1.0, rtol=0.0, atol=PROBABILITY_ATOL):
            raise ValueError("transition rows must sum to 1")
        for s in np.flatnonzero(terminal):
            if not np.allclose(transition[s, :, s], 1.0, rtol=0.0, atol=1e-12):
                raise ValueError(f"terminal state {s} must self-transition")
            if np.any(reward[s] != 0.0):
                raise ValueError(f"terminal state {s} must have zero reward")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """pi(a|s) as an (S, A) array of row distributions"""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 2:
            raise ValueError(f"policy must have shape (S, A), got {probs.shape}")
        if np.any(probs < 0):
            raise ValueError("policy probabilities must be nonnegative")
        if not np.allclose(probs.sum(axis=1), 1.0, rtol=0.0, atol=PROBABILITY_ATOL):
            raise ValueError("policy rows must sum to 1")

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> "TabularPolicy":
        actions = np.asarray(actions, dtype=np.int64)
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "TabularPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @property
    def actions(self) -> np.ndarray:
        """Most likely action per state (lowest index on ties)"""
        return np.argmax(self.probs, axis=1)


@dataclass(frozen=True, eq=False)
class ValueTable:
    v: np.ndarray
    q: np.ndarray


def _check_gamma(gamma: float) -> float:
    return DiscountedReturnConfig(gamma).gamma


def _check_policy_shape(mdp: TabularMDP, policy: TabularPolicy) -> None:
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(
            f"policy shape {policy.probs.shape} does not match MDP "
            f"{(mdp.n_states, mdp.n_actions)}"
        )


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of gamma^k * rewards[k] over a finite episode"""
    gamma = _check_gamma(gamma)
    total = 0.0
    # Horner form keeps gamma=0 exact
    for r in reversed(list(rewards)):
        total = float(r) + gamma * total
    return total


def policy_induced_dynamics(
    mdp: TabularMDP, policy: TabularPolicy
) -> tuple[np.ndarray, np.ndarray]:
    """Markov chain induced by following `policy` on `mdp`

    Returns:
        (P_pi, R_pi): transition matrix of shape (S, S) and the expected reward
        per state of shape (S,).
    """
    _check_policy_shape(mdp, policy)
    p_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    r_pi = np.einsum("sa,sa->s", policy.probs, mdp.reward)
    return p_pi, r_pi


def q_from_v(mdp: TabularMDP, v: np.ndarray, gamma: float) -> np.ndarray:
    """One-step lookahead Q(s, a) = R(s, a) + gamma * sum_s2 P(s2|s, a) V(s2)"""
    return mdp.reward + gamma * (mdp.transition @ v)


def policy_evaluation(
    mdp: TabularMDP,
    policy: TabularPolicy,
    gamma: float,
    tol: float = DEFAULT_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> np.ndarray:
    """Iterate V <- R_pi + gamma * P_pi V until the sup-norm change is below tol

    Raises:
        ConvergenceError: if the iteration cap is reached first.
    """
    gamma = _check_gamma(gamma)
    p_pi, r_pi = policy_induced_dynamics(mdp, policy)
    v = np.zeros(mdp.n_states)
    for iteration in range(1, max_iterations + 1):
        v_new = r_pi + gamma * (p_pi @ v)
        v_new[mdp.terminal] = 0.0
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta < tol:
            logger.debug("policy evaluation converged in %d iterations", iteration)
            return v
    raise ConvergenceError(
        f"policy evaluation did not converge within {max_iterations} iterations"
    )


def greedy_policy_from_q(q: np.ndarray) -> TabularPolicy:
    """Deterministic greedy policy, ties broken by the lowest action index"""
    q = np.asarray(q, dtype=np.float64)
    return TabularPolicy.deterministic(np.argmax(q, axis=1), q.shape[1])


def value_iteration(
    mdp: TabularMDP,
    gamma: float,
    tol: float = DEFAULT_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> tuple[ValueTable, TabularPolicy]:
    """Solve the Bellman optimality equation by repeated backups

    Returns:
        (ValueTable, TabularPolicy): optimal V*, Q* and the greedy policy in Q*.

    Raises:
        ConvergenceError: if the iteration cap is reached first.
    """
    gamma = _check_gamma(gamma)
    v = np.zeros(mdp.n_states)
    for iteration in range(1, max_iterations + 1):
        q = q_from_v(mdp, v, gamma)
        v_new = q.max(axis=1)
        v_new[mdp.terminal] = 0.0
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta < tol:
            logger.debug("value iteration converged in %d iterations", iteration)
            q = q_from_v(mdp, v, gamma)
            return ValueTable(v=v, q=q), greedy_policy_from_q(q)
    raise ConvergenceError(
        f"value iteration did not converge within {max_iterations} iterations"
    )
