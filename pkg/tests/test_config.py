import json
import warnings

import pytest

from condist.config import ConfigError, ConfigWarning, ExperimentConfig, load_config, parse_config


def test_minimal_config_fills_defaults():
    cfg = parse_config({})
    assert (cfg.m_y, cfg.m_x, cfg.replications) == (201, 51, 200)
    assert cfg.n == (500, 2000, 8000, 32000)
    assert cfg.bandwidths(32) == pytest.approx((32 ** -0.2, 32 ** -0.2))


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="h3"):
        parse_config({"h3": 0.1})
    with pytest.raises(ConfigError, match="bandwidth.'h3'"):
        parse_config({"bandwidth": {"h3": 0.1}})


def test_all_errors_listed():
    with pytest.raises(ConfigError) as exc:
        parse_config({"bandwidth": {"h1": -1}, "replications": 0, "grid": {"m_y": 1},
                      "kernel": {"w": "cosine"}})
    text = " ".join(exc.value.errors)
    for field in ("bandwidth.h1", "replications", "grid.m_y", "kernel"):
        assert field in text
    assert len(exc.value.errors) == 4


def test_gamma_range_and_schedules():
    with pytest.raises(ConfigError, match="gamma"):
        parse_config({"dgp": "B", "bandwidth": {"gamma": 0.6}})
    with pytest.raises(ConfigError, match="at least 4"):
        parse_config({"n": [100, 200]}, "rates")
    with pytest.raises(ConfigError, match="increasing"):
        parse_config({"n": [200, 100]}, "alr")
    with pytest.raises(ConfigError, match="scalar covariate"):
        parse_config({"dgp": "B"}, "clt")


def test_side_condition_warnings():
    with pytest.warns(ConfigWarning, match="√n h₁² → 0"):
        parse_config({"bandwidth": {"gamma": 0.1}}, "clt")
    with pytest.warns(ConfigWarning, match="√n h₁/|log h₁| → ∞"):
        parse_config({"bandwidth": {"gamma": 0.6}}, "clt")
    with pytest.warns(ConfigWarning, match="d\\+4"):
        parse_config({"bandwidth": {"gamma": 0.1}}, "alr")
    with pytest.warns(ConfigWarning, match="replications"):
        parse_config({"replications": 5}, "rates")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        parse_config({"bandwidth": {"gamma": 0.35}}, "clt")
        parse_config({}, "rates")


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"dgp": "c", "seed": 3}))
    cfg = load_config(p)
    assert cfg.dgp == "C" and cfg.seed == 3
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    p.write_text("{bad")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)


def test_overrides_and_dict():
    cfg = ExperimentConfig().with_overrides(seed=9, replications=None)
    assert cfg.seed == 9 and cfg.replications == 200
    d = cfg.to_dict()
    assert d["n"] == [500, 2000, 8000, 32000] and "command" not in d
    assert cfg.delta(400) == pytest.approx(0.05)
