"""Directional quotient estimation: slabs, radial bounds, Lipschitz constants."""

import math

import numpy as np
import pytest

from conecalc import dini, funcs

LAD = dini.ScaleLadder(t0=0.1, ratio=0.5, k_min=0, k_max=10, seed=0)


class TestScaleLadder:
    def test_radii_geometric(self):
        lad = dini.ScaleLadder(t0=0.2, ratio=0.5, k_min=1, k_max=4)
        assert np.allclose(lad.radii(), [0.1, 0.05, 0.025, 0.0125])

    @pytest.mark.parametrize("kw", [
        {"ratio": 1.2}, {"ratio": 0.0},
        {"k_min": 5, "k_max": 5},
        {"t0": 1e-12, "k_max": 30},
    ])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            dini.ScaleLadder(**{"t0": 0.1, "ratio": 0.5,
                                "k_min": 0, "k_max": 8, **kw})

    def test_clamped_keeps_three_scales(self):
        lad = dini.ScaleLadder(t0=0.1, ratio=0.5, k_min=4, k_max=16)
        c = lad.clamped(1e-3)
        assert c.k_max - c.k_min >= 2
        assert c.radii().min() >= 1e-3 * c.ratio

    def test_clamped_noop_for_tiny_floor(self):
        lad = dini.ScaleLadder(t0=0.1, ratio=0.5, k_min=4, k_max=16)
        assert lad.clamped(1e-12) == lad
        assert lad.clamped(None) == lad

    def test_for_handle_reads_scale_floor(self):
        lad = dini.ScaleLadder(t0=0.5, ratio=0.5, k_min=0, k_max=20)
        h = funcs.builtin("preiss_lip(4)")
        c = lad.for_handle(h)
        assert c.k_max < lad.k_max
        assert c.radii().min() >= 4.0 ** -4 * 0.5

    def test_resolve_seed(self, monkeypatch):
        monkeypatch.delenv("CONECALC_SEED", raising=False)
        assert dini.resolve_seed(None) == 0
        assert dini.resolve_seed(5) == 5
        monkeypatch.setenv("CONECALC_SEED", "77")
        assert dini.resolve_seed(None) == 77
        assert dini.resolve_seed(5) == 5
        assert dini.ScaleLadder(seed=None).resolved_seed() == 77


class TestQuotients:
    def test_linear_exact(self):
        h = funcs.parse_expr("3*x", 1)
        assert dini.sup_quotient(h, [0.0], [1.0], LAD) == pytest.approx(3.0, abs=1e-6)
        assert dini.inf_quotient(h, [0.0], [1.0], LAD) == pytest.approx(3.0, abs=1e-6)
        assert dini.sup_quotient(h, [0.0], [-1.0], LAD) == pytest.approx(-3.0, abs=1e-6)

    def test_linear_multidim_exact(self):
        # direction jitter decays like ratio^(2k); at the extrapolated
        # shells it leaves a few-ppm wobble, hence the 1e-5 budget
        h = funcs.parse_expr("2*x1 - x2", 2)
        for u in ([1.0, 0.0], [0.0, 1.0], [0.6, 0.8]):
            want = 2 * u[0] - u[1]
            got = dini.sup_quotient(h, [0.3, -0.2], u, LAD)
            assert got == pytest.approx(want, abs=1e-5)

    def test_positive_homogeneity(self):
        h = funcs.parse_expr("x1^2 + sin(x2)", 2)
        base = dini.sup_quotient(h, [0.5, 0.1], [0.6, 0.8], LAD)
        double = dini.sup_quotient(h, [0.5, 0.1], [1.2, 1.6], LAD)
        assert double == pytest.approx(2 * base, abs=5e-4)

    def test_ordering_chain(self):
        # inf quotient <= inf derivative <= sup derivative <= sup quotient
        cases = [(funcs.builtin("abs"), 0.0), (funcs.builtin("x2sin"), 0.0),
                 (funcs.builtin("cube"), 0.7),
                 (funcs.builtin("preiss_lip(5)"), 0.37)]
        for h, x in cases:
            iq = dini.inf_quotient(h, [x], [1.0], LAD)
            idv = dini.inf_derivative(h, [x], [1.0], LAD)
            sdv = dini.sup_derivative(h, [x], [1.0], LAD)
            sq = dini.sup_quotient(h, [x], [1.0], LAD)
            eps = 1e-6
            assert iq <= idv + eps <= sdv + 2 * eps <= sq + 3 * eps

    def test_moving_vs_fixed_base_on_oscillation(self):
        # x^2 sin(1/x): one-sided derivative at 0 vanishes, but slopes
        # near 0 approach 1, so the moving-base quotient sees them
        h = funcs.builtin("x2sin")
        assert abs(dini.sup_derivative(h, [0.0], [1.0], LAD)) <= 0.05
        assert dini.sup_quotient(h, [0.0], [1.0], LAD) == pytest.approx(1.0, abs=0.05)

    def test_abs_slab_at_kink(self):
        h = funcs.builtin("abs")
        assert dini.sup_quotient(h, [0.0], [1.0], LAD) == pytest.approx(1.0, abs=1e-6)
        assert dini.inf_quotient(h, [0.0], [1.0], LAD) == pytest.approx(-1.0, abs=1e-6)
        assert dini.sup_derivative(h, [0.0], [1.0], LAD) == pytest.approx(1.0, abs=1e-6)

    def test_divergence_flagged(self):
        h = funcs.builtin("sqrt_abs")
        p = dini.sup_quotient_profile(h, [0.0], [1.0], LAD)
        assert p.limit == math.inf and p.diverged

    def test_profile_table(self):
        p = dini.sup_quotient_profile(funcs.builtin("abs"), [0.0], [1.0], LAD)
        rows = p.table()
        assert len(rows) == len(LAD.radii())
        assert all(set(r) == {"radius", "high", "low"} for r in rows)

    def test_slabs_match_single_queries(self):
        h = funcs.builtin("abs")
        U = np.array([[1.0], [-1.0]])
        lows, highs, _, _ = dini.quotient_slabs(h, [0.0], U, LAD)
        assert highs == pytest.approx([1.0, 1.0], abs=1e-6)
        assert lows == pytest.approx([-1.0, -1.0], abs=1e-6)

    def test_vector_function_rejected(self):
        h = funcs.parse_expr("x, 2*x", 1)
        with pytest.raises(ValueError):
            dini.sup_quotient(h, [0.0], [1.0], LAD)


class TestRadialBounds:
    def test_kink(self):
        lo, hi = dini.radial_bounds(funcs.builtin("abs"), [0.0], LAD)
        assert lo == pytest.approx(1.0, abs=1e-6)
        assert hi == pytest.approx(1.0, abs=1e-6)

    def test_smooth_point_symmetric(self):
        lo, hi = dini.radial_bounds(funcs.builtin("abs"), [1.0], LAD)
        assert lo == pytest.approx(-1.0, abs=1e-6)
        assert hi == pytest.approx(1.0, abs=1e-6)

    def test_flat(self):
        lo, hi = dini.radial_bounds(funcs.builtin("cube"), [0.0], LAD)
        assert abs(lo) <= 1e-4 and abs(hi) <= 1e-4

    def test_blowup(self):
        lo, hi = dini.radial_bounds(funcs.builtin("sqrt_abs"), [0.0], LAD)
        assert hi == math.inf


class TestLipschitzConstants:
    def test_kink(self):
        pw, loc = dini.lipschitz_constants(funcs.builtin("abs"), [0.0], LAD)
        assert pw == pytest.approx(1.0, abs=1e-4)
        assert loc == pytest.approx(1.0, abs=1e-4)

    def test_smooth(self):
        pw, loc = dini.lipschitz_constants(funcs.builtin("cube"), [1.0], LAD)
        assert pw == pytest.approx(3.0, abs=0.05)
        assert loc == pytest.approx(3.0, abs=0.05)

    def test_pointwise_strictly_smaller_on_oscillation(self):
        pw, loc = dini.lipschitz_constants(funcs.builtin("x2sin"), [0.0], LAD)
        assert pw <= 0.1
        assert loc == pytest.approx(1.0, abs=0.1)

    def test_vector_valued_reduces_over_covectors(self):
        h = funcs.parse_expr("x1 + x2, x1 - x2", 2)
        pw, loc = dini.lipschitz_constants(h, [0.0, 0.0], LAD)
        # operator norm of [[1,1],[1,-1]] is sqrt(2)
        assert pw == pytest.approx(math.sqrt(2), abs=0.05)
        assert loc == pytest.approx(math.sqrt(2), abs=0.05)

    def test_local_never_below_pointwise(self):
        for tag, x in (("abs", 0.3), ("xsin", 0.0), ("preiss_lip(5)", 0.61)):
            pw, loc = dini.lipschitz_constants(funcs.builtin(tag), [x], LAD)
            assert loc >= pw - 1e-9
