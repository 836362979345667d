import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semcf.conditioning import Evidence
from semcf.errors import DimensionMismatch, ModelError, NotPositiveSemidefinite, PartitionMismatch, UnknownVertex
from semcf.graph import build_diagram, descendants
from semcf.oracle import SimConfig, simulate_joint
from semcf.random_models import random_sem
from semcf.sem import (
    GaussianMoments,
    LinearSEM,
    conditional_disturbance_moments,
    disturbance_moments,
    implied_moments,
    total_effect,
    total_effect_by_paths,
)


class TestGaussianMoments:
    def test_rejects_asymmetric(self):
        with pytest.raises(NotPositiveSemidefinite):
            GaussianMoments(("a", "b"), [0, 0], [[1, 0.5], [0.4, 1]])

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveSemidefinite):
            GaussianMoments(("a", "b"), [0, 0], [[1, 2], [2, 1]])

    def test_shape(self):
        with pytest.raises(DimensionMismatch):
            GaussianMoments(("a",), [0, 0], [[1]])

    def test_readonly(self):
        m = GaussianMoments(("a",), [0], [[1]])
        with pytest.raises(ValueError):
            m.cov[0, 0] = 2.0

    def test_subset_and_lookup(self, m2):
        m = implied_moments(m2).subset(["Y", "Z"])
        assert m.variables == ("Y", "Z")
        assert m.sigma("Y", "Z") == pytest.approx(1.5)
        with pytest.raises(UnknownVertex):
            m.index("X")


class TestImplied:
    def test_no_structure(self):
        G = build_diagram(["A", "B"], [], [("A", "B", 0.3)])
        model = LinearSEM(G, {"A": 2.0}, {"B": 1.5})
        m = implied_moments(model)
        assert np.array_equal(m.cov, model.disturbance_cov)
        assert np.array_equal(m.mean, model.disturbance_mean)

    def test_m2(self, m2):
        m = implied_moments(m2)
        assert m.sigma("X") == pytest.approx(2.0, abs=1e-12)
        assert m.sigma("X", "Y") == pytest.approx(2.0, abs=1e-12)
        assert m.sigma("Y") == pytest.approx(3.5, abs=1e-12)
        assert m.sigma("Z", "Y") == pytest.approx(1.5, abs=1e-12)

    def test_m3(self, m3):
        m = implied_moments(m3)
        assert m.sigma("Y") == pytest.approx(2.0, abs=1e-12)
        assert m.sigma("X", "Y") == pytest.approx(1.5, abs=1e-12)
        assert m.sigma("Z", "Y") == pytest.approx(0.5, abs=1e-12)

    def test_nonzero_means(self):
        G = build_diagram(["X", "Y"], [("X", "Y", 2.0)])
        m = implied_moments(LinearSEM(G, means={"X": 1.0, "Y": -1.0}))
        assert m.mean.tolist() == [1.0, 1.0]

    def test_invalid_disturbances(self):
        G = build_diagram(["X", "Y"], [], [("X", "Y", 1.5)])
        with pytest.raises(NotPositiveSemidefinite):
            LinearSEM(G)
        with pytest.raises(NotPositiveSemidefinite):
            LinearSEM(build_diagram(["X"]), {"X": -1.0})

    def test_needs_coefficients(self):
        with pytest.raises(ModelError):
            LinearSEM(build_diagram(["X", "Y"], [("X", "Y")]))

    def test_matches_simulation(self, m2):
        draws = simulate_joint(m2, SimConfig(n_draws=1_000_000, seed=11))
        m = implied_moments(m2)
        n = len(draws)
        c = draws - draws.mean(0)
        for i in range(3):
            for j in range(i, 3):
                prod = c[:, i] * c[:, j]
                assert abs(prod.mean() - m.cov[i, j]) <= 5 * prod.std() / np.sqrt(n)


class TestDisturbances:
    def test_m2_identity(self, m2):
        eps = disturbance_moments(m2.coefficient_matrix, implied_moments(m2))
        np.testing.assert_allclose(eps.cov, np.eye(3), atol=1e-12)

    def test_no_structure(self):
        m = GaussianMoments(("a", "b"), [1, 2], [[2, 1], [1, 2]])
        eps = disturbance_moments(np.zeros((2, 2)), m)
        assert np.array_equal(eps.cov, m.cov) and np.array_equal(eps.mean, m.mean)

    def test_dimension(self, m2):
        with pytest.raises(DimensionMismatch):
            disturbance_moments(np.zeros((2, 2)), implied_moments(m2))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        model = random_sem(rng, int(rng.integers(1, 9)))
        eps = disturbance_moments(model.coefficient_matrix, implied_moments(model))
        np.testing.assert_allclose(eps.cov, model.disturbance_cov, atol=1e-12, rtol=1e-12)
        np.testing.assert_allclose(eps.mean, model.disturbance_mean, atol=1e-12)

    def test_conditional_empty(self, m2):
        joint = implied_moments(m2)
        a = conditional_disturbance_moments(m2.coefficient_matrix, joint, Evidence())
        b = disturbance_moments(m2.coefficient_matrix, joint)
        assert np.array_equal(a.cov, b.cov)

    def test_conditional_point_m2(self, m2):
        eps = conditional_disturbance_moments(m2.coefficient_matrix, implied_moments(m2),
                                              Evidence(point={"X": 1.0}))
        assert eps.mu("Z") == pytest.approx(0.5, abs=1e-12)
        assert eps.sigma("Z") == pytest.approx(0.5, abs=1e-12)

    def test_conditional_box_m1(self, m1):
        eps = conditional_disturbance_moments(m1.coefficient_matrix, implied_moments(m1),
                                              Evidence(box={"X": (0.0, np.inf)}))
        assert eps.mu("Y") == pytest.approx(0.0, abs=1e-10)
        assert eps.sigma("Y") == pytest.approx(1.0, abs=1e-10)


class TestTotalEffect:
    def test_fixtures(self, m1, m2):
        assert total_effect(m1, "X")[0] == pytest.approx(0.5)
        assert total_effect(m2, "X", ["Y"])[0] == pytest.approx(0.5)

    def test_paths(self, chain, m1):
        assert total_effect_by_paths(chain.diagram, "X", "Y") == pytest.approx(7.0)
        assert total_effect_by_paths(m1.diagram, "Y", "X") == 0.0

    def test_partition_mismatch(self, m2):
        with pytest.raises(PartitionMismatch):
            total_effect(m2, "Z", ["Y"])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_paths(self, seed):
        rng = np.random.default_rng(seed)
        model = random_sem(rng, int(rng.integers(2, 9)))
        G = model.diagram
        for x in G.vertices:
            desc = G.sort(descendants(G, x))
            if not desc:
                continue
            tau = total_effect(model, x, desc)
            for y, t in zip(desc, tau):
                assert abs(t - total_effect_by_paths(G, x, y)) < 1e-10
