import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semcf.errors import UnknownVertex, ZeroInstrumentCovariance
from semcf.graph import build_diagram
from semcf.identification import IdentificationResult, backdoor_estimate, identify, iv_estimate
from semcf.random_models import random_model_with_pair
from semcf.sem import GaussianMoments, LinearSEM, implied_moments, total_effect_by_paths


def _obs(model, observed):
    return implied_moments(model).subset(model.diagram.sort(observed))


class TestIdentify:
    def test_m2_backdoor(self, m2):
        r = identify(m2.diagram, ["Z", "X", "Y"], implied_moments(m2), "X", "Y")
        assert r.route == "backdoor" and r.witness == {"t": ("Z",)}
        assert r.tau == pytest.approx(0.5, abs=1e-12)

    def test_m3_iv(self, m3):
        r = identify(m3.diagram, ["Z", "X", "Y"], implied_moments(m3), "X", "Y")
        assert r.route == "conditional_iv" and r.witness == {"z": "Z", "t": ()}
        assert r.tau == pytest.approx(0.5, abs=1e-12)

    def test_m2_hidden_confounder(self, m2):
        r = identify(m2.diagram, ["X", "Y"], _obs(m2, ["X", "Y"]), "X", "Y")
        assert r.route == "unidentified" and r.tau is None and not r.identified

    def test_structural(self, m2):
        r = identify(m2.diagram, ["X", "Y"], None, "X", "Y", model=m2)
        assert r.route == "structural" and r.tau == 0.5

    def test_not_a_descendant(self, m2):
        r = identify(m2.diagram, ["Z", "X", "Y"], implied_moments(m2), "Y", "X")
        assert r.tau == 0.0

    def test_unobserved_treatment(self, m2):
        with pytest.raises(UnknownVertex):
            identify(m2.diagram, ["Z", "Y"], _obs(m2, ["Z", "Y"]), "X", "Y")

    def test_prefers_smallest_set(self):
        # A and B both block; the singleton found first wins
        G = build_diagram(["A", "B", "X", "Y"],
                          [("A", "B", 1.0), ("B", "X", 1.0), ("A", "Y", 1.0), ("X", "Y", 0.7)])
        m = implied_moments(LinearSEM(G))
        r = identify(G, G.vertices, m, "X", "Y")
        assert r.witness == {"t": ("A",)}
        assert r.tau == pytest.approx(0.7)

    def test_size_cap(self):
        # Four confounders, each opening its own back-door path
        names = ["C1", "C2", "C3", "C4", "X", "Y"]
        edges = [(c, "X", 1.0) for c in names[:4]] + [(c, "Y", 1.0) for c in names[:4]] + [("X", "Y", 0.3)]
        G = build_diagram(names, edges)
        m = implied_moments(LinearSEM(G))
        assert identify(G, names, m, "X", "Y", max_adjustment_size=3).route == "unidentified"
        r = identify(G, names, m, "X", "Y", max_adjustment_size=4)
        assert r.route == "backdoor" and r.tau == pytest.approx(0.3)

    def test_result_invariants(self):
        with pytest.raises(ValueError):
            IdentificationResult("backdoor")
        with pytest.raises(ValueError):
            IdentificationResult("unidentified", 1.0)
        assert IdentificationResult("backdoor", 0.5, {"t": ("Z",)}).to_dict() == {
            "kind": "backdoor", "tau": 0.5, "witness": {"t": ["Z"]}}

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_any_route_is_correct(self, seed):
        rng = np.random.default_rng(seed)
        model, x, y = random_model_with_pair(rng, int(rng.integers(2, 8)), bidirected_prob=0.3)
        G = model.diagram
        observed = [v for v in G.vertices if v in (x, y) or rng.random() < 0.7]
        r = identify(G, observed, _obs(model, observed), x, y)
        if r.identified:
            assert abs(r.tau - total_effect_by_paths(G, x, y)) < 1e-8


class TestEstimators:
    def test_backdoor(self, m1, m2):
        assert backdoor_estimate(implied_moments(m2), "X", "Y", ["Z"]) == pytest.approx(0.5)
        assert backdoor_estimate(implied_moments(m1), "X", "Y") == pytest.approx(0.5)
        # misuse: without adjustment the regression slope is not the effect
        assert backdoor_estimate(implied_moments(m2), "X", "Y") == pytest.approx(1.0)

    def test_iv(self, m3):
        m = implied_moments(m3)
        assert iv_estimate(m, "X", "Y", "Z") == pytest.approx(0.5)
        assert iv_estimate(m.scaled(2.0), "X", "Y", "Z") == pytest.approx(0.5)

    def test_iv_zero(self):
        m = GaussianMoments(("Z", "X", "Y"), [0, 0, 0], [[1, 0, 0], [0, 1, 0.5], [0, 0.5, 1]])
        with pytest.raises(ZeroInstrumentCovariance):
            iv_estimate(m, "X", "Y", "Z")

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_iv_scale_invariant(self, seed, c):
        rng = np.random.default_rng(seed)
        L = rng.normal(size=(4, 4))
        m = GaussianMoments(("Z", "X", "Y", "T"), np.zeros(4), L @ L.T + 0.1 * np.eye(4))
        try:
            a = iv_estimate(m, "X", "Y", "Z", ["T"])
        except ZeroInstrumentCovariance:
            return
        assert iv_estimate(m.scaled(c), "X", "Y", "Z", ["T"]) == pytest.approx(a, rel=1e-9)
