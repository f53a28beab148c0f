"""Pointwise classifiers and theorem-level checks."""

import math

import numpy as np
import pytest

from conecalc import analysis, cones, dini, funcs
from conecalc.cones import FiberCone
from conecalc.errors import (DimensionMismatchError, ImproperConeError)

LAD = dini.ScaleLadder(t0=0.1, ratio=0.5, k_min=0, k_max=12, seed=0)
LIGHT = FiberCone.from_arcs([(math.pi / 4, 3 * math.pi / 4)])


class TestClassifyPoint:
    def test_kink(self):
        r = analysis.classify_point(funcs.builtin("abs"), [0.0], LAD)
        assert r.lipschitz
        assert r.lipschitz_constant == pytest.approx(1.0, abs=1e-4)
        assert not r.strictly_differentiable
        assert r.derivative is None
        assert r.fo_extremum == "min"
        assert r.checks["dual_agrees"]
        # the graph map collapses symmetric pairs and has vertical covectors
        assert r.whitney_immersive is False
        assert r.microlocally_submersive is False

    def test_smooth_regular_point(self):
        r = analysis.classify_point(funcs.builtin("cube"), [1.0], LAD)
        assert r.lipschitz and r.strictly_differentiable
        assert r.derivative[0][0] == pytest.approx(3.0, abs=1e-4)
        assert r.fo_extremum == "none"
        assert r.whitney_immersive is True
        assert r.microlocally_submersive is True

    def test_oscillatory_lipschitz_not_strict(self):
        r = analysis.classify_point(funcs.builtin("x2sin"), [0.0], LAD)
        assert r.lipschitz
        assert not r.strictly_differentiable
        assert r.fo_extremum == "stationary"
        assert r.checks["dual_agrees"]

    def test_unbounded_slope(self):
        r = analysis.classify_point(funcs.builtin("sqrt_abs"), [0.0], LAD)
        assert not r.lipschitz
        assert not r.strictly_differentiable
        assert r.checks["dual_agrees"]

    def test_report_plumbing(self):
        r = analysis.classify_point(funcs.builtin("abs"), [0.0], LAD)
        assert r.point == [0.0]
        assert set(r.tolerances) == {"vertical", "strict_vertical"}
        assert r.ladder["t0"] == LAD.t0
        assert r.conormal.regime == "dimM1"


class TestFoExtremum:
    def test_min_with_fermat(self):
        out = analysis.fo_extremum(funcs.builtin("abs"), [0.0], LAD)
        assert out["tag"] == "min"
        assert out["fermat"]["whitney_horizontal"]
        assert out["fermat"]["conormal_vertical"]
        assert out["fermat"]["worst_angle"] <= out["fermat"]["tolerance"]

    def test_max(self):
        h = funcs.parse_expr("0 - abs(x)", 1)
        assert analysis.fo_extremum(h, [0.0], LAD)["tag"] == "max"

    def test_smooth_critical_point_is_stationary(self):
        # first-order radial bounds vanish both ways at a smooth max too
        h = funcs.parse_expr("0 - x^2", 1)
        assert analysis.fo_extremum(h, [0.0], LAD)["tag"] == "stationary"

    def test_stationary_inflection(self):
        assert analysis.fo_extremum(funcs.builtin("cube"), [0.0], LAD)["tag"] \
            == "stationary"

    def test_none(self):
        out = analysis.fo_extremum(funcs.builtin("cube"), [0.5], LAD)
        assert out["tag"] == "none"
        assert "fermat" not in out

    def test_scalar_only(self):
        with pytest.raises(DimensionMismatchError):
            analysis.fo_extremum(funcs.parse_expr("x, x", 1), [0.0], LAD)


class TestMeanValue:
    def test_parabola_witness_at_midpoint(self):
        h = funcs.parse_expr("x^2", 1)
        ws = analysis.mean_value_witness(h, [0.0], [1.0])
        best = ws[0]
        assert best["c"] == pytest.approx(0.5, abs=1e-2)
        # chord slope 1: covector perpendicular to (1, 1), oriented by eta0
        nu = np.asarray(best["nu"])
        want = np.array([1.0, -1.0]) / math.sqrt(2.0)
        assert min(np.linalg.norm(nu - want), np.linalg.norm(nu + want)) <= 0.05

    def test_eta0_flips_covector(self):
        h = funcs.parse_expr("x^2", 1)
        up = analysis.mean_value_witness(h, [0.0], [1.0], eta0=1.0)[0]
        down = analysis.mean_value_witness(h, [0.0], [1.0], eta0=-1.0)[0]
        assert np.allclose(up["nu"], np.negative(down["nu"]), atol=1e-12)

    def test_requires_distinct_endpoints(self):
        with pytest.raises(ValueError):
            analysis.mean_value_witness(funcs.builtin("abs"), [1.0], [1.0])

    def test_scalar_only(self):
        with pytest.raises(DimensionMismatchError):
            analysis.mean_value_witness(funcs.parse_expr("x, x", 1),
                                        [0.0], [1.0])


class TestChainRule:
    def test_irregular_pair_violates_inclusion(self):
        out = analysis.chain_rule_check(funcs.builtin("cbrt"),
                                        funcs.builtin("cube"), [0.0], LAD)
        assert not out["regular"]
        assert not out["inclusion_holds"]

    def test_regular_pair_strict_inclusion(self):
        out = analysis.chain_rule_check(funcs.builtin("cube"),
                                        funcs.builtin("cbrt"), [0.0], LAD)
        assert out["regular"]
        assert out["inclusion_holds"]
        assert out["strict_inclusion"]

    def test_smooth_pair_equality(self):
        out = analysis.chain_rule_check(funcs.builtin("cube"),
                                        funcs.builtin("cube"), [1.0], LAD)
        assert out["regular"] and out["inclusion_holds"]
        assert out["equality_checked"]
        assert out["equality_holds"]

    def test_dimension_guard(self):
        with pytest.raises(DimensionMismatchError):
            analysis.chain_rule_check(funcs.builtin("x1sq_sin"),
                                      funcs.builtin("x1sq_sin"), [0.0, 0.0], LAD)


class TestMonotone1d:
    def test_cubic_non_decreasing_with_flat_point(self):
        out = analysis.monotone_classify_1d(funcs.builtin("cube"),
                                            [-1.0, 1.0], LAD)
        assert out["tag"] == "non-decreasing"
        assert out["submersion_failures"] == [0.0]
        assert 0.0 in out["immersion_failures"]

    def test_linear_strict_embedding(self):
        out = analysis.monotone_classify_1d(funcs.parse_expr("2*x", 1),
                                            [-1.0, 1.0], LAD)
        assert out["tag"] == "strictly-increasing-embedding"
        assert out["submersion_failures"] == []
        assert out["immersion_failures"] == []

    def test_kink_is_not_monotone(self):
        out = analysis.monotone_classify_1d(funcs.builtin("abs"),
                                            [-0.5, 0.5], LAD)
        assert out["tag"] == "none"

    def test_one_dimensional_only(self):
        with pytest.raises(DimensionMismatchError):
            analysis.monotone_classify_1d(funcs.builtin("x1sq_sin"),
                                          [-1.0, 1.0], LAD)


class TestCausal:
    def test_identity_is_causal(self):
        h = funcs.parse_expr("x1, x2", 2)
        out = analysis.causal_check(h, LIGHT, LIGHT, [[0.0, 0.0], [0.3, -0.1]],
                                    LAD)
        assert out["causal"]
        assert out["lipschitz_when_causal"]

    def test_half_turn_is_not_causal(self):
        h = funcs.parse_expr("0 - x1, 0 - x2", 2)
        out = analysis.causal_check(h, LIGHT, LIGHT, [[0.0, 0.0]], LAD)
        assert not out["causal"]

    def test_scalar_dual_cross_check(self):
        ray = FiberCone.from_directions(np.array([[1.0]]), 1, resolution=1e-9)
        out = analysis.causal_check(funcs.parse_expr("2*x", 1), ray, ray,
                                    [[0.1]], LAD)
        entry = out["per_point"][0]
        assert entry["causal"] and entry["dual_checked"] and entry["dual_ok"]

    def test_improper_fields_rejected(self):
        h = funcs.parse_expr("x1, x2", 2)
        with pytest.raises(ImproperConeError):
            analysis.causal_check(h, FiberCone.zero(2), LIGHT, [[0.0, 0.0]], LAD)
        with pytest.raises(ImproperConeError):
            analysis.causal_check(h, FiberCone.full(2), LIGHT, [[0.0, 0.0]], LAD)
        with pytest.raises(TypeError):
            analysis.causal_check(h, lambda p: 7, LIGHT, [[0.0, 0.0]], LAD)

    def test_time_function_coordinate(self):
        h = funcs.parse_expr("x2", 2)
        out = analysis.time_function_check(h, LIGHT, [[0.0, 0.0], [0.5, 0.2]],
                                           LAD)
        assert out["time_function"] and out["causal"]
        for e in out["per_point"]:
            assert e["microlocally_submersive"] and e["strict_image_positive"]

    def test_causal_but_not_time_function(self):
        ray = FiberCone.from_directions(np.array([[1.0]]), 1, resolution=1e-9)
        out = analysis.time_function_check(funcs.builtin("cube"), ray,
                                           [[0.0]], LAD)
        assert out["causal"]
        assert not out["time_function"]
        assert not out["per_point"][0]["microlocally_submersive"]
