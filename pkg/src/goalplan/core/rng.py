from typing import Optional, Sequence, Union

import numpy as np

_SEED_MASK = (1 << 64) - 1
# each counter owns a 2**192-block slice of the Philox counter space
_COUNTER_SHIFT = 192


def derive_seed(*keys: int) -> int:
    """Derive a 64-bit seed from a sequence of nonnegative integer keys

    Used to fan a master seed out into episode, estimator and exploration seeds
    so that every consumer has its own reproducible stream.
    """
    if not keys:
        raise ValueError("derive_seed needs at least one key")
    entropy = [int(k) & _SEED_MASK for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


class RngStream:
    """Counter-based random stream

    Wraps a numpy Generator over a Philox bit generator keyed by `seed`. The
    `counter` selects a non-overlapping block of the Philox counter space, so
    identical (seed, counter) pairs produce identical draws, and streams with
    different counters are independent.

    Examples:
        >>> paths = [RngStream(seed=7, counter=i) for i in range(3)]
        >>> paths[1].normal(size=2)  # same two numbers every run
    """

    __slots__ = ("seed", "counter", "generator")

    def __init__(self, seed: int, counter: int = 0):
        if counter < 0:
            raise ValueError(f"counter must be nonnegative, got {counter}")
        self.seed = int(seed) & _SEED_MASK
        self.counter = int(counter)
        bit_generator = np.random.Philox(
            key=self.seed, counter=self.counter << _COUNTER_SHIFT
        )
        self.generator = np.random.Generator(bit_generator)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, counter={self.counter})"

    def substream(self, counter: int) -> "RngStream":
        """A fresh stream on the same key with a different counter block"""
        return RngStream(self.seed, counter)

    def normal(
        self, size: Optional[Union[int, Sequence[int]]] = None
    ) -> Union[float, np.ndarray]:
        return self.generator.standard_normal(size)

    def random(self) -> float:
        return float(self.generator.random())

    def integers(
        self, low: int, high: int, size: Optional[Union[int, Sequence[int]]] = None
    ) -> Union[int, np.ndarray]:
        """Uniform integers in [low, high)"""
        if size is None:
            return int(self.generator.integers(low, high))
        return self.generator.integers(low, high, size=size)

    def choice(self, n: int, p: np.ndarray) -> int:
        return int(self.generator.choice(n, p=p))
