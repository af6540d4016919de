import numpy as np
import pytest

from src.goalplan.core.replay import (
    BufferNotReadyError,
    Experience,
    ExperienceBatch,
    ReplayBuffer,
)
from src.goalplan.core.rng import RngStream


def experience(i, dim=3, done=False):
    state, next_state = np.full(dim, float(i)), np.full(dim, i + 1.0)
    return Experience(state, i % 5, float(i), next_state, done)


@pytest.fixture
def buffer():
    return ReplayBuffer(capacity=4, state_dim=3)


def test_capacity_validation():
    with pytest.raises(ValueError):
        ReplayBuffer(0, 3)


def test_push_grows_until_capacity(buffer):
    for i in range(6):
        buffer.push(experience(i))
        assert len(buffer) == min(i + 1, 4)


def test_oldest_is_overwritten_first(buffer):
    for i in range(6):
        buffer.push(experience(i))
    held = buffer.experiences()
    np.testing.assert_array_equal(held.rewards, [2.0, 3.0, 4.0, 5.0])
    np.testing.assert_array_equal(held.states[:, 0], [2.0, 3.0, 4.0, 5.0])


def test_experiences_before_full(buffer):
    buffer.push(experience(0))
    buffer.push(experience(1, done=True))
    held = list(buffer.experiences())
    assert [e.reward for e in held] == [0.0, 1.0]
    assert [e.done for e in held] == [False, True]
    assert isinstance(held[0].action, int)


def test_push_rejects_wrong_shape(buffer):
    with pytest.raises(ValueError):
        buffer.push(experience(0, dim=2))


def test_sample_needs_enough_transitions(buffer):
    buffer.push(experience(0))
    with pytest.raises(BufferNotReadyError):
        buffer.sample(2, RngStream(0))
    with pytest.raises(ValueError):
        buffer.sample(0, RngStream(0))


def test_sample_draws_held_rows_only(buffer):
    for i in range(10):
        buffer.push(experience(i))
    rng = RngStream(1)
    batches = [buffer.sample(4, rng) for _ in range(50)]
    rewards = np.concatenate([batch.rewards for batch in batches])
    assert len(rewards) == 200
    # uniform draws over many batches reach every held slot
    assert set(rewards.tolist()) == {6.0, 7.0, 8.0, 9.0}
    for batch in batches:
        np.testing.assert_array_equal(batch.states[:, 0], batch.rewards)
        np.testing.assert_array_equal(batch.next_states[:, 0], batch.rewards + 1.0)


def test_sample_is_reproducible(buffer):
    for i in range(4):
        buffer.push(experience(i))
    rng_a, rng_b = RngStream(5), RngStream(5)
    for _ in range(5):
        a = buffer.sample(3, rng_a)
        b = buffer.sample(3, rng_b)
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.rewards, b.rewards)


def test_batch_from_experiences():
    batch = ExperienceBatch.from_experiences([experience(1), experience(2, done=True)])
    assert len(batch) == 2
    assert batch.states.shape == (2, 3)
    assert batch.actions.dtype == np.int64
    np.testing.assert_array_equal(batch.dones, [False, True])
    assert repr(batch) == "<ExperienceBatch size=2>"
