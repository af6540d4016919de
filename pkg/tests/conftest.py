from pathlib import Path

import pytest

CONFIGS_DIR = Path(__file__).resolve().parents[1] / "configs"

MINIMAL_DOCUMENT = """\
profile:
  current_age: 40
  annual_income: 60000
  annual_spending: 50000
goals:
  retirement: {year: 5, annual_spending: 10000, drawdown_years: 5}
"""


@pytest.fixture
def configs_dir():
    return CONFIGS_DIR


@pytest.fixture
def minimal_yaml():
    return MINIMAL_DOCUMENT


@pytest.fixture
def quick_config(tmp_path):
    """A persona small enough to train for a handful of episodes in a test"""
    path = tmp_path / "quick.yaml"
    path.write_text(
        MINIMAL_DOCUMENT
        + """\
  pre_retirement:
    - {name: car, year: 3, amount: 15000}
reward: {n_paths: 20}
agent:
  hidden_sizes: [8]
  batch_size: 4
  warmup_transitions: 4
  epsilon: {start: 1.0, end: 0.1, decay_steps: 20}
training: {n_episodes: 3, seed: 1, moving_average_window: 2}
oracle:
  wealth_levels: 3
  horizon: 2
  goal_amount: 15000
  training_steps: 2000
""",
        encoding="utf-8",
    )
    return path


EXACT_ORACLE_DOCUMENT = """\
# deterministic market: every Q* gap that is not an exact tie is at least 3.8
profile:
  current_age: 40
  annual_income: 60000
  annual_spending: 50000
goals:
  retirement: {year: 5, annual_spending: 10000, drawdown_years: 5}
  pre_retirement:
    - {name: goal1, year: 2, amount: 20000}
market: {log_mean: 0.0, log_vol: 0.0}
oracle:
  wealth_levels: 9
  horizon: 2
  goal_amount: 20000
  market_nodes: 1
  training_steps: 40000
  learning_rate: 0.2
  min_agreement: 0.9
"""


@pytest.fixture
def exact_oracle_config(tmp_path):
    """A planning problem small enough to solve and learn exactly in a test"""
    path = tmp_path / "exact_oracle.yaml"
    path.write_text(EXACT_ORACLE_DOCUMENT, encoding="utf-8")
    return path
