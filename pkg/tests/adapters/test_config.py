import math

import numpy as np
import pytest

from src.goalplan.adapters.config import (
    ConfigError,
    ConfigParseError,
    ProfileDocument,
    build_document,
    dump_document,
    load_document,
    load_profile,
    parse_document,
)
from src.goalplan.core.agent import AgentConfig
from src.goalplan.core.market import MarketModel
from src.goalplan.core.oracle import OracleConfig


def test_minimal_document_fills_defaults(minimal_yaml):
    doc = parse_document(minimal_yaml)
    assert isinstance(doc, ProfileDocument)
    assert doc.profile.current_age == 40.0
    assert doc.profile.contribution_split == (1.0, 0.0, 0.0)
    assert doc.goals.retirement.target_year_index == 5
    assert doc.goals.retirement.threshold == 0.70
    assert doc.goals.pre_retirement == ()
    assert doc.market == MarketModel()
    assert doc.agent == AgentConfig()
    assert doc.reward.n_paths == 1000
    assert doc.training.n_episodes == 6000
    assert doc.training.seed == 0
    assert doc.oracle == OracleConfig()


def test_shipped_configs_load(configs_dir):
    paths = sorted(configs_dir.glob("*.yaml"))
    assert len(paths) >= 4
    for path in paths:
        load_document(path)


def test_reference_persona(configs_dir):
    profile, goals, market, reward, agent, training = load_profile(
        configs_dir / "reference.yaml"
    )
    assert profile.annual_income == 100_000
    assert goals.names == ["house", "retirement"]
    assert goals.retirement.target_amount == 40_000
    assert market.log_mean[0] == pytest.approx(math.log(1.05), abs=1e-4)
    assert agent.hidden_sizes == (64, 64)
    assert training.n_episodes == 6000
    assert training.goals is goals


def test_per_bucket_market():
    doc = parse_document(
        """
profile: {current_age: 30, annual_income: 1, annual_spending: 1}
goals: {retirement: {year: 3, annual_spending: 1}}
market:
  log_mean: {taxable: 0.03, tax_free: 0.06}
  log_vol: 0.1
"""
    )
    default = MarketModel().log_mean[1]
    np.testing.assert_allclose(doc.market.log_mean, [0.03, default, 0.06])
    np.testing.assert_allclose(doc.market.log_vol, 0.1)


@pytest.mark.parametrize(
    "text, path",
    [
        (
            "profile: {current_age: 30, annual_income: 1, annual_spending: 1}\n"
            "goals: {}\n",
            "goals.retirement",
        ),
        ("goals: {retirement: {year: 3, annual_spending: 1}}\n", "profile"),
        (
            "profile: {current_age: 30, annual_income: 1, annual_spending: 1, age: 3}\n"
            "goals: {retirement: {year: 3, annual_spending: 1}}\n",
            "profile.age",
        ),
        (
            "profile: {current_age: null, annual_income: 1, annual_spending: 1}\n"
            "goals: {retirement: {year: 3, annual_spending: 1}}\n",
            "profile.current_age",
        ),
    ],
)
def test_schema_errors_name_the_field(text, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        parse_document(text)


def base(**sections):
    raw = {
        "profile": {"current_age": 30, "annual_income": 1, "annual_spending": 1},
        "goals": {"retirement": {"year": 10, "annual_spending": 1}},
    }
    raw.update(sections)
    return raw


def test_threshold_out_of_range():
    goals = {
        "retirement": {"year": 10, "annual_spending": 1},
        "pre_retirement": [{"year": 5, "amount": 1, "threshold": 1.5}],
    }
    with pytest.raises(ConfigError, match=r"goals\.pre_retirement\[0\]"):
        build_document(base(goals=goals))


def test_too_many_goals():
    goals = {
        "retirement": {"year": 10, "annual_spending": 1},
        "pre_retirement": [{"year": y, "amount": 1} for y in (1, 2, 3, 4)],
    }
    with pytest.raises(ConfigError, match="goals"):
        build_document(base(goals=goals))


@pytest.mark.parametrize(
    "sections",
    [
        {"reward": {"n_paths": "many"}},
        {"reward": {"rho": True}},
        {"agent": {"hidden_sizes": 64}},
        {"agent": {"batch_size": 3.5}},
        {"agent": {"epsilon": {"start": 0.1, "end": 0.5}}},
        {"market": {"log_vol": -0.1}},
        {"market": {"log_mean": {"bonds": 0.01}}},
        {"training": {"n_episodes": 0}},
        {"oracle": {"wealth_levels": 80}},
        {"profile": [1, 2]},
    ],
)
def test_invalid_values(sections):
    with pytest.raises(ConfigError):
        build_document(base(**sections))


def test_document_must_be_a_mapping():
    with pytest.raises(ConfigError, match="mapping"):
        parse_document("- just\n- a list\n")


def test_malformed_yaml_reports_position():
    with pytest.raises(ConfigParseError) as info:
        parse_document("a: b: c\n", source="broken.yaml")
    assert (info.value.line, info.value.column) == (1, 5)
    assert str(info.value).startswith("broken.yaml:1:5:")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_document(tmp_path / "nope.yaml")


def test_dump_is_idempotent(configs_dir):
    for path in sorted(configs_dir.glob("*.yaml")):
        doc = load_document(path)
        text = dump_document(doc)
        assert parse_document(text) == doc
        assert dump_document(parse_document(text)) == text


def test_dump_writes_defaults(minimal_yaml):
    text = dump_document(parse_document(minimal_yaml))
    assert "n_episodes: 6000" in text
    assert "decay_steps: 100000" in text
    assert "goal_amount: null" in text
