import numpy as np
import pytest
from scipy.stats import chisquare

from src.goalplan.core.agent import (
    AgentConfig,
    DQNAgent,
    EpsilonSchedule,
    TrainingDivergenceError,
    epsilon_at,
    q_forward,
    sample_batch,
    select_action,
    sync_target,
    td_targets,
    td_train_batch,
)
from src.goalplan.core.network import QNetwork
from src.goalplan.core.replay import (
    BufferNotReadyError,
    Experience,
    ExperienceBatch,
    ReplayBuffer,
)
from src.goalplan.core.rng import RngStream

N_STATES = 4
N_ACTIONS = 3


def one_hot(i, n=N_STATES):
    return np.eye(n)[i]


def tabular_config(**kwargs):
    args = dict(
        gamma=0.9,
        learning_rate=0.5,
        batch_size=1,
        warmup_transitions=1,
        hidden_sizes=(),
        bias=False,
    )
    args.update(kwargs)
    return AgentConfig(**args)


@pytest.fixture
def agent():
    return DQNAgent(tabular_config(), N_STATES, N_ACTIONS, seed=3)


def test_epsilon_schedule_endpoints():
    schedule = EpsilonSchedule(1.0, 0.01, 100)
    assert epsilon_at(schedule, 0) == 1.0
    assert abs(epsilon_at(schedule, 50) - 0.505) <= 1e-12
    assert epsilon_at(schedule, 100) == 0.01
    assert epsilon_at(schedule, 10_000) == 0.01


def test_epsilon_schedule_without_decay():
    assert epsilon_at(EpsilonSchedule(0.3, 0.3, 0), 0) == 0.3


def test_epsilon_schedule_validation():
    with pytest.raises(ValueError):
        EpsilonSchedule(0.1, 0.5, 10)
    with pytest.raises(ValueError):
        EpsilonSchedule(1.5, 0.1, 10)
    with pytest.raises(ValueError):
        EpsilonSchedule(1.0, 0.1, -1)
    with pytest.raises(ValueError):
        epsilon_at(EpsilonSchedule(), -1)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"gamma": 1.5},
        {"learning_rate": 0.0},
        {"batch_size": 0},
        {"target_sync_period": 0},
        {"warmup_transitions": -1},
        {"hidden_sizes": (64, 0)},
    ],
)
def test_agent_config_validation(kwargs):
    with pytest.raises(ValueError):
        AgentConfig(**kwargs)


def test_greedy_action_consumes_no_randomness():
    net = QNetwork((2, 3), seed=0, bias=False)
    net.weights = [np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]])]
    rng = RngStream(4)
    assert select_action(net, np.array([1.0, 0.0]), 0.0, rng) == 1
    assert rng.random() == RngStream(4).random()


def test_greedy_ties_pick_lowest_action():
    net = QNetwork((2, 3), seed=0, bias=False)
    net.weights = [np.zeros((3, 2))]
    assert select_action(net, np.ones(2), 0.0, RngStream(0)) == 0


def test_select_action_rejects_bad_epsilon():
    net = QNetwork((2, 3), seed=0)
    with pytest.raises(ValueError):
        select_action(net, np.ones(2), 1.5, RngStream(0))


def test_random_actions_are_uniform():
    net = QNetwork((2, 21), seed=0)
    rng = RngStream(11)
    n = 100_000
    counts = np.bincount(
        [select_action(net, np.ones(2), 1.0, rng) for _ in range(n)], minlength=21
    )
    assert counts.sum() == n
    assert chisquare(counts).pvalue > 0.01


def test_td_targets_stop_at_terminal():
    target = QNetwork((2, 2), seed=0, bias=False)
    target.weights = [np.array([[1.0, 0.0], [0.0, 2.0]])]
    batch = ExperienceBatch.from_experiences(
        [
            Experience(np.zeros(2), 0, 1.0, np.array([1.0, 1.0]), False),
            Experience(np.zeros(2), 0, 1.0, np.array([1.0, 1.0]), True),
        ]
    )
    np.testing.assert_allclose(td_targets(target, batch, 0.5), [2.0, 1.0])


def test_single_update_matches_tabular_q_learning(agent):
    s, a, r, s_next = one_hot(1), 2, 3.0, one_hot(2)
    q_before = agent.net.forward(s)[a]
    bootstrap = agent.target.forward(s_next).max()
    agent.observe(Experience(s, a, r, s_next, False))
    agent.learn()
    expected = q_before + 0.5 * (r + 0.9 * bootstrap - q_before)
    assert abs(agent.net.forward(s)[a] - expected) <= 1e-10


def test_train_batch_reports_mean_squared_error(agent):
    batch = ExperienceBatch.from_experiences(
        [
            Experience(one_hot(0), 1, 2.0, one_hot(3), True),
            Experience(one_hot(2), 0, -1.0, one_hot(3), True),
        ]
    )
    q = agent.net.forward(np.array([one_hot(0), one_hot(2)]))
    errors = np.array([q[0, 1] - 2.0, q[1, 0] + 1.0])
    loss = td_train_batch(agent.net, agent.target, batch, agent.config)
    assert loss == pytest.approx(np.mean(errors**2))
    # each row moves by learning_rate / batch size times its error
    after = agent.net.forward(np.array([one_hot(0), one_hot(2)]))
    np.testing.assert_allclose(
        [after[0, 1], after[1, 0]], [q[0, 1], q[1, 0]] - 0.25 * errors
    )


def test_update_only_touches_taken_entry(agent):
    before = agent.net.forward(np.eye(N_STATES))
    agent.observe(Experience(one_hot(0), 1, 1.0, one_hot(3), True))
    agent.learn()
    after = agent.net.forward(np.eye(N_STATES))
    changed = np.argwhere(before != after)
    np.testing.assert_array_equal(changed, [[0, 1]])


def test_learn_waits_for_warmup():
    agent = DQNAgent(tabular_config(warmup_transitions=5), N_STATES, N_ACTIONS)
    for _ in range(4):
        agent.observe(Experience(one_hot(0), 0, 1.0, one_hot(1), False))
        assert agent.learn() is None
    agent.observe(Experience(one_hot(0), 0, 1.0, one_hot(1), False))
    assert agent.learn() is not None
    assert agent.optimizer_steps == 1


def test_target_sync_every_period():
    agent = DQNAgent(tabular_config(target_sync_period=3), N_STATES, N_ACTIONS)
    agent.observe(Experience(one_hot(0), 0, 1.0, one_hot(1), False))
    for step in range(1, 10):
        frozen = agent.target
        agent.learn()
        assert agent.target.same_parameters(agent.net) == (step % 3 == 0)
        if step % 3:
            assert agent.target is frozen


def test_target_is_not_modified_by_training(agent):
    target = agent.target.copy()
    agent.observe(Experience(one_hot(0), 0, 5.0, one_hot(1), False))
    agent.learn()
    assert agent.target.same_parameters(target)


def test_divergence_leaves_parameters_untouched(agent):
    before = agent.net.copy()
    batch = ExperienceBatch.from_experiences(
        [Experience(one_hot(0), 0, float("nan"), one_hot(1), False)]
    )
    with pytest.raises(TrainingDivergenceError):
        td_train_batch(agent.net, agent.target, batch, agent.config)
    assert agent.net.same_parameters(before)


def test_agent_rejects_mismatched_network():
    with pytest.raises(ValueError):
        DQNAgent(tabular_config(), N_STATES, N_ACTIONS, net=QNetwork((4, 5, 3)))


def test_agent_reuses_given_network():
    net = QNetwork((N_STATES, N_ACTIONS), seed=9, bias=False)
    agent = DQNAgent(tabular_config(), N_STATES, N_ACTIONS, net=net)
    assert agent.net is net
    assert agent.target.same_parameters(net)
    assert agent.target is not net


def test_same_seed_same_agent():
    a = DQNAgent(AgentConfig(), 17, 21, seed=5)
    b = DQNAgent(AgentConfig(), 17, 21, seed=5)
    assert a.net.same_parameters(b.net)
    assert a.act(np.ones(17), 0.5) == b.act(np.ones(17), 0.5)


def test_q_forward_single_and_batch(agent):
    single = q_forward(agent.net, one_hot(2))
    assert single.shape == (N_ACTIONS,)
    batch = q_forward(agent.net, np.eye(N_STATES))
    assert batch.shape == (N_STATES, N_ACTIONS)
    np.testing.assert_array_equal(batch[2], single)


def test_sync_target_is_an_independent_copy(agent):
    copy = sync_target(agent.net)
    assert copy is not agent.net
    np.testing.assert_array_equal(
        q_forward(copy, one_hot(1)), q_forward(agent.net, one_hot(1))
    )
    agent.observe(Experience(one_hot(1), 0, 5.0, one_hot(2), True))
    agent.learn()
    assert not copy.same_parameters(agent.net)


def test_sample_batch_needs_enough_transitions():
    buffer = ReplayBuffer(8, N_STATES)
    rng = RngStream(1)
    buffer.push(Experience(one_hot(0), 1, 1.0, one_hot(1), False))
    with pytest.raises(BufferNotReadyError):
        sample_batch(buffer, 2, rng)
    buffer.push(Experience(one_hot(1), 2, 0.0, one_hot(2), True))
    batch = sample_batch(buffer, 2, rng)
    assert len(batch) == 2
    assert set(batch.actions.tolist()) <= {1, 2}
