import numpy as np
import pytest

from src.goalplan.core.environment import (
    AGE,
    FIRST_GOAL_SLOT,
    INCOME,
    N_CUSTOM_GOALS,
    RETIREMENT_YEARS_LEFT,
    STATE_DIM,
    TAXABLE,
    TOTAL_CONTRIBUTION,
    EpisodeDoneError,
    GoalPlanningEnv,
)
from src.goalplan.core.goals import ClientProfile, Goal, GoalSet, RewardConfig
from src.goalplan.core.market import AccountBalances, MarketModel

FLAT = MarketModel.uniform(0.0, 0.0)


@pytest.fixture
def profile():
    return ClientProfile(
        current_age=35,
        annual_income=100_000,
        annual_spending=80_000,
        initial_balances=AccountBalances(taxable=50_000),
    )


@pytest.fixture
def goals():
    return GoalSet(
        Goal.retirement(30, 40_000),
        (
            Goal.pre_retirement(10, 50_000, name="house"),
            Goal.pre_retirement(5, 10_000, name="car"),
        ),
    )


@pytest.fixture
def env(profile, goals):
    return GoalPlanningEnv(profile, goals, MarketModel(), RewardConfig(n_paths=50))


def run(env, actions, seed=0):
    env.reset(seed)
    return [env.step(a) for a in actions]


def test_reset_state_layout(env):
    state = env.reset(seed=1)
    assert state.shape == (STATE_DIM,)
    assert state[AGE] == pytest.approx(0.35)
    assert state[INCOME] == pytest.approx(0.1)
    assert state[TAXABLE] == pytest.approx(0.05)
    assert state[TOTAL_CONTRIBUTION] == 0.0
    assert state[N_CUSTOM_GOALS] == pytest.approx(0.02)
    assert state[RETIREMENT_YEARS_LEFT] == pytest.approx(0.30)
    # goals fill slots by target year, the third slot stays empty
    assert state[FIRST_GOAL_SLOT] == pytest.approx(0.05)
    assert state[FIRST_GOAL_SLOT + 1] == pytest.approx(0.01)
    assert state[FIRST_GOAL_SLOT + 2] == pytest.approx(0.10)
    np.testing.assert_array_equal(state[FIRST_GOAL_SLOT + 4 :], 0.0)


def test_zero_balances_encode_as_zero(goals):
    profile = ClientProfile(current_age=30, annual_income=0.0, annual_spending=0.0)
    env = GoalPlanningEnv(profile, goals, FLAT)
    state = env.reset()
    np.testing.assert_array_equal(state[INCOME : TOTAL_CONTRIBUTION + 1], 0.0)


def test_encoding_is_deterministic(env):
    env.reset(3)
    env.step(10)
    np.testing.assert_array_equal(env.encode_state(), env.encode_state())


def test_years_left_drop_each_step(env):
    before = env.reset()
    after = env.step(5).next_state
    drop = before[RETIREMENT_YEARS_LEFT] - after[RETIREMENT_YEARS_LEFT]
    assert drop == pytest.approx(0.01)
    assert before[FIRST_GOAL_SLOT] - after[FIRST_GOAL_SLOT] == pytest.approx(0.01)
    assert after[AGE] == pytest.approx(0.36)


def test_contribution_follows_action(env):
    env.reset()
    env.step(7)
    assert env.contributions == [pytest.approx(7_000)]
    assert env.c_max == 20_000


def test_episode_length_and_done(env):
    results = run(env, [20] * 30)
    assert len(results) == 30
    assert [r.done for r in results] == [False] * 29 + [True]
    assert env.done


def test_step_after_done_raises(env):
    run(env, [0] * 30)
    with pytest.raises(EpisodeDoneError):
        env.step(0)


def test_step_before_reset_raises(env):
    with pytest.raises(EpisodeDoneError):
        env.step(0)


def test_bad_action_rejected(env):
    env.reset()
    with pytest.raises(ValueError):
        env.step(21)


def test_rewards_are_sparse(env):
    results = run(env, [12] * 30, seed=4)
    rewarded_years = [i + 1 for i, r in enumerate(results) if r.info]
    assert rewarded_years == [5, 10, 30]
    for year, result in enumerate(results, start=1):
        if year not in (5, 10, 30):
            assert result.reward == 0.0
            assert result.info == {}
    assert sum(r.reward != 0.0 for r in results) <= 3


def test_info_reports_probabilities(env):
    results = run(env, [20] * 30, seed=2)
    seen = {}
    for r in results:
        seen.update(r.info)
    assert set(seen) == {"car", "house", "retirement"}
    assert all(0.0 <= p <= 1.0 for p in seen.values())


def test_trivially_met_goal_pays_rho(profile):
    goals = GoalSet(Goal.retirement(3, 1_000), (Goal.pre_retirement(2, 1_000),))
    env = GoalPlanningEnv(profile, goals, FLAT, RewardConfig(n_paths=10))
    results = run(env, [20, 20, 20])
    assert results[1].reward == 10.0
    assert results[1].info == {"goal1": 1.0}


def test_goal_amount_is_withdrawn(profile):
    goals = GoalSet(Goal.retirement(3, 1_000), (Goal.pre_retirement(1, 30_000),))
    env = GoalPlanningEnv(profile, goals, FLAT, RewardConfig(n_paths=10))
    env.reset()
    env.step(0)
    assert env.balances.total == pytest.approx(20_000)


def test_unreachable_goals_are_penalised():
    poor = ClientProfile(current_age=30, annual_income=10_000, annual_spending=10_000)
    goals = GoalSet(Goal.retirement(4, 50_000), (Goal.pre_retirement(2, 80_000),))
    env = GoalPlanningEnv(poor, goals, FLAT, RewardConfig(n_paths=10))
    results = run(env, [20] * 4)
    assert results[1].reward == pytest.approx(-70.0)
    assert results[3].reward == pytest.approx(-70.0)


def test_deterministic_market_repeats_exactly(profile, goals):
    env = GoalPlanningEnv(profile, goals, MarketModel.uniform(0.04, 0.0))
    first = run(env, [3, 7, 20, 0, 11] * 6, seed=1)
    second = run(env, [3, 7, 20, 0, 11] * 6, seed=99)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.next_state, b.next_state)
        assert a.reward == b.reward


def test_same_seed_reproduces_noisy_episode(env):
    first = run(env, [10] * 30, seed=8)
    second = run(env, [10] * 30, seed=8)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.next_state, b.next_state)
        assert a.reward == b.reward
        assert a.info == b.info
