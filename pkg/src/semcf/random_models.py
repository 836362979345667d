"""Random Gaussian linear SEMs for property tests and oracle sweeps."""

from __future__ import annotations

import numpy as np

from .graph import build_diagram, descendants
from .sem import LinearSEM


def random_sem(rng, n_vertices, *, edge_prob=0.5, bidirected_prob=0.2,
               coef_range=(-1.5, 1.5), min_abs_coef=0.1, max_error_cov=0.5,
               names=None) -> LinearSEM:
    """Draw a random acyclic model with unit disturbance variances.

    Vertices are named ``V0..V{n-1}`` (or ``names``) and declared in a random
    order so that declaration order differs from topological order.
    Bidirected covariances are redrawn until the disturbance matrix is
    positive definite.
    """
    rng = np.random.default_rng(rng)
    names = list(names or [f"V{i}" for i in range(n_vertices)])
    causal = [names[i] for i in rng.permutation(n_vertices)]
    edges = []
    for j in range(n_vertices):
        for i in range(j):
            if rng.random() < edge_prob:
                lo, hi = coef_range
                c = 0.0
                while abs(c) < min_abs_coef:
                    c = float(rng.uniform(lo, hi))
                edges.append((causal[i], causal[j], c))
    pairs = [(causal[i], causal[j]) for j in range(n_vertices) for i in range(j)
             if rng.random() < bidirected_prob]
    declared = [names[i] for i in rng.permutation(n_vertices)]
    while True:
        bi = [(u, v, float(rng.uniform(-max_error_cov, max_error_cov))) for u, v in pairs]
        S = np.eye(n_vertices)
        idx = {v: k for k, v in enumerate(names)}
        for u, v, c in bi:
            S[idx[u], idx[v]] = S[idx[v], idx[u]] = c
        if np.linalg.eigvalsh(S).min() > 0.05:
            break
    return LinearSEM(build_diagram(declared, edges, bi))


def random_treatment_pair(rng, model: LinearSEM):
    """Pick ``(x, y)`` with ``y`` a descendant of ``x``, or ``None``."""
    rng = np.random.default_rng(rng)
    G = model.diagram
    pairs = [(x, y) for x in G.vertices for y in G.sort(descendants(G, x))]
    if not pairs:
        return None
    return pairs[int(rng.integers(len(pairs)))]


def random_model_with_pair(rng, n_vertices, **kwargs):
    """Redraw until the model has a treatment/response pair."""
    rng = np.random.default_rng(rng)
    while True:
        model = random_sem(rng, n_vertices, **kwargs)
        pair = random_treatment_pair(rng, model)
        if pair is not None:
            return model, pair[0], pair[1]
