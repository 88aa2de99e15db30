import dataclasses
import json

import numpy as np
import pytest

import abclab as ab
from abclab.errors import ConfigurationError
from abclab.expressions import ExpressionError

from conftest import CONFIG_DIR, load


# ---------------------------------------------------------------------------
# expression grammar
# ---------------------------------------------------------------------------
def test_expr_basic():
    assert ab.eval_coeff_expr("2*z+1", {"z": 0.5}) == pytest.approx(2.0)


def test_expr_step_indicator():
    assert ab.eval_coeff_expr("step(0.5, 3) + 1", {"z": 0.25}) == pytest.approx(1.0)
    assert ab.eval_coeff_expr("step(0.5, 3) + 1", {"z": 0.75}) == pytest.approx(4.0)


def test_expr_trig_identity():
    assert ab.eval_coeff_expr("sin(x)^2 + cos(x)^2", {"x": 0.7}) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("text,env,expected", [
    ("2^3", {}, 8.0),
    ("2*3^2", {}, 18.0),          # '^' binds tightest
    ("6/3/2", {}, 1.0),           # left-associative
    ("1 - 2 - 3", {}, -4.0),
    ("-x+1", {"x": 0.25}, 0.75),
    ("exp(0)", {}, 1.0),
    ("abs(0-3)", {}, 3.0),
    ("1.5e2", {}, 150.0),
    ("(1+2)*(3+4)", {}, 21.0),
])
def test_expr_grammar(text, env, expected):
    assert ab.eval_coeff_expr(text, env) == pytest.approx(expected)


def test_expr_parse_error_has_position():
    with pytest.raises(ExpressionError, match="position"):
        ab.eval_coeff_expr("2 +* 3", {})
    with pytest.raises(ExpressionError):
        ab.eval_coeff_expr("sin(1, 2)", {})
    with pytest.raises(ExpressionError):
        ab.eval_coeff_expr("nope(1)", {})
    with pytest.raises(ExpressionError):
        ab.eval_coeff_expr("2 @ 3", {})


def test_expr_division_by_zero():
    with pytest.raises(ExpressionError, match="division by zero"):
        ab.eval_coeff_expr("1/z", {"z": 0.0})


def test_expr_unknown_variable():
    with pytest.raises(ExpressionError, match="unknown variable"):
        ab.eval_coeff_expr("q + 1", {"x": 0.0})


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------
def test_minimal_config_gets_defaults():
    cfg = ab.parse_config("{}")
    assert cfg.geometry["n_cells"] == 64
    assert cfg.model == "wave"
    assert cfg.flags["b1_mode"] == "zero"
    assert cfg.solver["tol"] == 1e-10


def test_round_trip_idempotent():
    for name in ("abc-1d", "special-case", "timoshenko-strip"):
        cfg = load(name)
        again = ab.parse_config(ab.serialize_config(cfg))
        assert cfg == again


def test_duplicate_key_rejected():
    with pytest.raises(ConfigurationError, match="duplicate key"):
        ab.parse_config('{"model": "wave", "model": "wave"}')


def test_unknown_keys_rejected_with_path():
    with pytest.raises(ConfigurationError, match="top level"):
        ab.parse_config('{"bogus": 1}')
    with pytest.raises(ConfigurationError, match="geometry"):
        ab.parse_config('{"geometry": {"kind": "interval", "zzz": 2}}')
    with pytest.raises(ConfigurationError, match="solver"):
        ab.parse_config('{"solver": {"speed": 11}}')


def test_b3_zero_requires_vanishing_spring():
    with pytest.raises(ConfigurationError, match="b3_zero"):
        ab.parse_config(json.dumps({
            "coefficients": {"k": "1"},
            "flags": {"b3_zero": True},
        }))


def test_neutral_interval_needs_acknowledgement():
    doc = {"flags": {"neutral": True}}
    with pytest.raises(ConfigurationError, match="neutral_m_zero"):
        ab.parse_config(json.dumps(doc))
    doc["flags"]["neutral_m_zero"] = True
    cfg = ab.parse_config(json.dumps(doc))
    assert cfg.flags["neutral"]


def test_neutral_variable_rho_flagged():
    cfg = ab.parse_config(json.dumps({
        "geometry": {"kind": "strip", "nx": 4, "ny": 4},
        "coefficients": {"rho": "1 + z"},
        "flags": {"neutral": True},
    }))
    assert any("variable rho" in w for w in cfg.warnings)


def test_divergence_requires_a():
    with pytest.raises(ConfigurationError, match="coefficients.a"):
        ab.parse_config('{"model": "divergence"}')


def test_biharmonic_needs_interval():
    with pytest.raises(ConfigurationError, match="interval"):
        ab.parse_config(json.dumps({
            "geometry": {"kind": "strip", "nx": 4, "ny": 4},
            "model": "biharmonic",
        }))


def test_bad_initial_token():
    with pytest.raises(ConfigurationError, match="compatible-random"):
        ab.parse_config('{"initial": "random-please"}')


def test_shipped_configs_parse_and_pass_assumptions():
    for name in ("abc-1d", "special-case", "timoshenko-strip"):
        cfg = ab.load_config(CONFIG_DIR / f"{name}.json")
        mesh, sys = ab.build_system(cfg)
        report = ab.check_assumptions(sys.ops, mesh)
        assert report.passed, f"{name}: {report.summary_lines()}"


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------
def test_compatible_random_is_deterministic(abc1d_cfg, abc1d):
    mesh, sys = abc1d
    s1 = ab.initial_state_from_config(abc1d_cfg, mesh, sys)
    s2 = ab.initial_state_from_config(abc1d_cfg, mesh, sys)
    assert np.array_equal(s1, s2)
    s3 = ab.initial_state_from_config(abc1d_cfg, mesh, sys, seed_override=999)
    assert not np.array_equal(s1, s3)


def test_expression_initial_data_compatibility(abc1d_cfg):
    cfg = dataclasses.replace(abc1d_cfg, initial={
        "f": "sin(3.141592653589793*x)^2", "g": "0", "h": "0", "j": "0"})
    mesh, sys = ab.build_system(cfg)
    state = ab.initial_state_from_config(cfg, mesh, sys)
    u, v, x, y = sys.split(state)
    # y0 = j - B2 f
    assert np.allclose(y, -sys.ops.B2 @ u, atol=1e-12)


def test_incompatible_initial_data_rejected(abc1d_cfg):
    # f with nonzero flux but j = 0 violates the compatibility
    cfg = dataclasses.replace(abc1d_cfg, initial={
        "f": "x^2", "g": "0", "h": "0", "j": "0"})
    mesh, sys = ab.build_system(cfg)
    with pytest.raises(ConfigurationError, match="incompatible"):
        ab.initial_state_from_config(cfg, mesh, sys)


def test_biharmonic_scenario_end_to_end():
    cfg = ab.parse_config(json.dumps({
        "geometry": {"kind": "interval", "n_cells": 16},
        "model": "biharmonic",
        "coefficients": {"r": "1", "s": "0.5", "p": "0-1", "q": "0-0.5"},
        "initial": {"f": "x*(1-x)", "g": "0", "h": "0", "j": "0-2"},
    }))
    mesh, sys = ab.build_system(cfg)
    state = ab.initial_state_from_config(cfg, mesh, sys)
    u, v, x, y = sys.split(state)
    assert u.size == 15                      # endpoints pinned and removed
    assert np.allclose(y, -2.0 - sys.ops.B2 @ u, atol=1e-10)


def test_biharmonic_scenario_rejects_nonvanishing_endpoint():
    cfg = ab.parse_config(json.dumps({
        "geometry": {"kind": "interval", "n_cells": 16},
        "model": "biharmonic",
        "initial": {"f": "1 + x", "g": "0", "h": "0", "j": "0"},
    }))
    mesh, sys = ab.build_system(cfg)
    with pytest.raises(ConfigurationError, match="pinned"):
        ab.initial_state_from_config(cfg, mesh, sys)
