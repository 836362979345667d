import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semcf.conditioning import (
    Evidence,
    box_moments,
    condition_box,
    condition_point,
    partial_cov,
    regression_coeffs,
)
from semcf.errors import (
    InvalidEvidence,
    OverlappingSets,
    SingularEvidenceCovariance,
    SingularRegressorCovariance,
    UnknownVertex,
    ZeroMassBox,
)
from semcf.random_models import random_sem
from semcf.sem import GaussianMoments, implied_moments
from semcf.truncated import box_moments_std, truncated_normal_1d

STD = GaussianMoments(("X",), [0.0], [[1.0]])


class TestEvidence:
    def test_normalized_moves_degenerate_box(self):
        ev = Evidence(box={"X": (1.0, 1.0), "Y": (0.0, 2.0)}).normalized()
        assert ev.point == {"X": 1.0} and ev.box == {"Y": (0.0, 2.0)}

    @pytest.mark.parametrize("kwargs, exc", [
        (dict(box={"X": (1.0, 0.0)}), InvalidEvidence),
        (dict(box={"X": (math.nan, 1.0)}), InvalidEvidence),
        (dict(point={"X": math.inf}), InvalidEvidence),
        (dict(point={"X": 1.0}, box={"X": (0.0, 2.0)}), OverlappingSets),
    ])
    def test_invalid(self, kwargs, exc):
        with pytest.raises(exc):
            Evidence(**kwargs)


class TestPoint:
    def test_m2(self, m2):
        cm = condition_point(implied_moments(m2), {"X": 1.0})
        assert cm.mu("Z") == pytest.approx(0.5, abs=1e-12)
        assert cm.sigma("Z") == pytest.approx(0.5, abs=1e-12)
        assert cm.mu("X") == 1.0 and cm.sigma("X") == 0.0

    def test_independent_unchanged(self):
        m = GaussianMoments(("A", "Y"), [0.0, 2.0], [[1.0, 0.0], [0.0, 3.0]])
        cm = condition_point(m, {"A": 5.0})
        assert cm.mu("Y") == 2.0 and cm.sigma("Y") == 3.0

    def test_all_observed(self, m2):
        cm = condition_point(implied_moments(m2), {"Z": 0.1, "X": 0.2, "Y": 0.3})
        assert np.allclose(cm.cov, 0.0, atol=1e-12)

    def test_singular_on_support(self):
        # B = 2A exactly; observing both consistently is fine
        m = GaussianMoments(("A", "B", "C"), [0, 0, 0],
                            [[1, 2, 0.5], [2, 4, 1.0], [0.5, 1.0, 1.0]])
        cm = condition_point(m, {"A": 1.0, "B": 2.0})
        assert cm.mu("C") == pytest.approx(0.5)
        assert cm.sigma("C") == pytest.approx(0.75)

    def test_singular_off_support(self):
        m = GaussianMoments(("A", "B"), [0, 0], [[1, 2], [2, 4]])
        with pytest.raises(SingularEvidenceCovariance):
            condition_point(m, {"A": 1.0, "B": 3.0})

    def test_unknown(self, m2):
        with pytest.raises(UnknownVertex):
            condition_point(implied_moments(m2), {"Q": 1.0})

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_variance_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        model = random_sem(rng, int(rng.integers(2, 8)))
        m = implied_moments(model)
        r = [str(v) for v in rng.choice(m.variables, int(rng.integers(1, len(m))), replace=False)]
        cm = condition_point(m, {v: float(rng.normal()) for v in r})
        assert np.all(np.diag(cm.cov) <= np.diag(m.cov) + 1e-12)


class TestBox:
    def test_half_line(self):
        bm = box_moments(STD, {"X": (0.0, np.inf)})
        assert bm.mass == pytest.approx(0.5, abs=1e-15)
        assert bm.mean[0] == pytest.approx(math.sqrt(2 / math.pi), abs=1e-14)
        assert bm.cov[0, 0] == pytest.approx(1 - 2 / math.pi, abs=1e-14)
        assert bm.method == "closed_form"

    def test_whole_line(self, m2):
        m = implied_moments(m2)
        bm = box_moments(m, {"X": (-np.inf, np.inf)})
        assert bm.mass == 1.0
        assert np.array_equal(bm.cov, m.cov)

    def test_symmetric(self):
        bm = box_moments(STD, {"X": (-0.7, 0.7)})
        assert abs(bm.mean[0]) < 1e-15

    def test_zero_mass(self):
        with pytest.raises(ZeroMassBox):
            box_moments(STD, {"X": (40.0, 41.0)})

    def test_far_tail_is_accurate(self):
        mass, mean, var = truncated_normal_1d(0.0, 1.0, 6.0, np.inf)
        assert mass == pytest.approx(9.865876450377e-10, rel=1e-10)
        # Mills-ratio asymptotics: mean ~ 6 + 1/6 - ..., variance ~ 1/36
        assert 6.15 < mean < 6.17 and 0.02 < var < 0.03

    def test_m1_propagation(self, m1):
        cm = condition_box(implied_moments(m1), Evidence(box={"X": (0.0, np.inf)}))
        assert cm.sigma("X") == pytest.approx(0.363380, abs=1e-6)
        assert cm.sigma("X", "Y") == pytest.approx(0.181690, abs=1e-6)
        assert cm.sigma("Y") == pytest.approx(1.090845, abs=1e-6)
        assert cm.mass == pytest.approx(0.5)

    def test_empty_is_identity(self, m2):
        m = implied_moments(m2)
        cm = condition_box(m, Evidence())
        assert np.array_equal(cm.cov, m.cov) and np.array_equal(cm.mean, m.mean)

    def test_degenerate_matches_point(self, m2):
        m = implied_moments(m2)
        a = condition_box(m, Evidence(box={"X": (1.0, 1.0)}))
        b = condition_point(m, {"X": 1.0})
        assert np.allclose(a.cov, b.cov, atol=1e-8) and np.allclose(a.mean, b.mean, atol=1e-8)

    def test_narrow_box_approaches_point(self, m2):
        m = implied_moments(m2)
        h = 1e-5
        a = condition_box(m, Evidence(box={"X": (1.0 - h, 1.0 + h)}))
        b = condition_point(m, {"X": 1.0})
        assert np.allclose(a.cov, b.cov, atol=1e-8) and np.allclose(a.mean, b.mean, atol=1e-8)

    def test_box_with_point(self, m2):
        m = implied_moments(m2)
        cm = condition_box(m, Evidence(point={"Z": 0.0}, box={"X": (0.0, np.inf)}))
        # given Z = 0: X ~ N(0, 1) and Y = 0.5 X + e
        assert cm.sigma("Z") == 0.0
        assert cm.mu("X") == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
        assert cm.sigma("Y") == pytest.approx(0.25 * (1 - 2 / math.pi) + 1.0, abs=1e-10)

    def test_product_box_matches_closed_form(self):
        var = np.array([1.0, 2.0, 0.5])
        m = GaussianMoments(("A", "B", "C"), [0.3, -0.2, 0.1], np.diag(var))
        box = {"A": (-1.0, 1.0), "B": (2.0, np.inf), "C": (-np.inf, 0.5)}
        bm = box_moments(m, box)
        assert bm.method == "quadrature"
        ref = [truncated_normal_1d(m.mu(v), m.sigma(v), *box[v]) for v in m.variables]
        assert bm.mass == pytest.approx(np.prod([r[0] for r in ref]), rel=1e-10)
        np.testing.assert_allclose(bm.mean, [r[1] for r in ref], atol=1e-9)
        np.testing.assert_allclose(np.diag(bm.cov), [r[2] for r in ref], atol=1e-9)
        assert np.max(np.abs(bm.cov - np.diag(np.diag(bm.cov)))) < 1e-9

    def test_complementary_halves_reassemble(self, m3):
        # law of total variance over {X < c} and {X >= c}
        m = implied_moments(m3)
        c = 0.4
        lo = condition_box(m, Evidence(box={"X": (-np.inf, c)}))
        hi = condition_box(m, Evidence(box={"X": (c, np.inf)}))
        mean = lo.mass * lo.mean + hi.mass * hi.mean
        second = sum(p.mass * (p.cov + np.outer(p.mean, p.mean)) for p in (lo, hi))
        assert lo.mass + hi.mass == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(mean, m.mean, atol=1e-6)
        np.testing.assert_allclose(second - np.outer(mean, mean), m.cov, atol=1e-6)

    def test_four_dimensional_uses_qmc(self):
        rng = np.random.default_rng(1)
        L = rng.normal(size=(4, 4))
        S = L @ L.T + np.eye(4)
        names = ("A", "B", "C", "D")
        m = GaussianMoments(names, np.zeros(4), S)
        box = {v: (-1.0, np.inf) for v in names}
        bm = box_moments(m, box, n_mc=100_000, seed=3)
        assert bm.method == "qmc"
        again = box_moments(m, box, n_mc=100_000, seed=3)
        assert np.array_equal(bm.cov, again.cov)
        draws = rng.multivariate_normal(np.zeros(4), S, size=1_000_000)
        ok = np.all(draws >= -1.0, axis=1)
        se = np.sqrt(ok.mean() * (1 - ok.mean()) / len(ok))
        assert abs(ok.mean() - bm.mass) <= 4 * se + 4 * bm.error_estimate
        kept = draws[ok]
        se_mean = kept.std(0) / np.sqrt(len(kept))
        assert np.all(np.abs(kept.mean(0) - bm.mean) <= 4 * se_mean + 4 * bm.mean_error)

    def test_singular_box_covariance(self):
        m = GaussianMoments(("A", "B"), [0, 0], [[1, 1], [1, 1]])
        with pytest.raises(SingularEvidenceCovariance):
            box_moments(m, {"A": (0, 1), "B": (0, 1)})

    def test_std_rejects_zero_mass(self):
        with pytest.raises(ZeroMassBox):
            box_moments_std(np.zeros(2), np.eye(2), np.array([30.0, 30.0]), np.array([31.0, 31.0]))


class TestRegression:
    def test_m2(self, m2):
        m = implied_moments(m2)
        assert regression_coeffs(m, ["Y"], ["X"])[0, 0] == pytest.approx(1.0)
        assert regression_coeffs(m, ["Y"], ["X"], ["Z"])[0, 0] == pytest.approx(0.5)

    def test_m3(self, m3):
        assert regression_coeffs(implied_moments(m3), ["Y"], ["X"])[0, 0] == pytest.approx(0.75)

    def test_independent(self):
        m = GaussianMoments(("A", "Y"), [0, 0], np.eye(2))
        assert regression_coeffs(m, ["Y"], ["A"])[0, 0] == 0.0

    def test_singular(self):
        m = GaussianMoments(("A", "B", "Y"), [0, 0, 0], [[1, 1, 0], [1, 1, 0], [0, 0, 1]])
        with pytest.raises(SingularRegressorCovariance):
            regression_coeffs(m, ["Y"], ["A", "B"])

    def test_overlap(self, m2):
        with pytest.raises(OverlappingSets):
            regression_coeffs(implied_moments(m2), ["Y"], ["Y"])

    def test_partial_cov_m2(self, m2):
        m = implied_moments(m2)
        assert partial_cov(m, ["Y"], ["Y"], ["X"])[0, 0] == pytest.approx(1.5)
