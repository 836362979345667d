"""Random query generators shared by the acceptance and oracle tests."""

import numpy as np

from semcf.conditioning import Evidence, box_moments
from semcf.engine import Plan
from semcf.graph import descendants
from semcf.random_models import random_sem
from semcf.sem import implied_moments


def nondescendants(G, x):
    desc = descendants(G, x) | {x}
    return [v for v in G.vertices if v not in desc]


def model_with_plan_pair(rng, n_min=2, n_max=6, need_w=True):
    """Random model and (x, y) with y a descendant of x and, if ``need_w``,
    at least one nondescendant of x available as a plan covariate."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        model = random_sem(rng, n)
        G = model.diagram
        pairs = [(x, y) for x in G.vertices for y in G.sort(descendants(G, x))
                 if not need_w or nondescendants(G, x)]
        if pairs:
            x, y = pairs[int(rng.integers(len(pairs)))]
            return model, x, y


def random_point(rng, model, k=None, exclude=()):
    """Point evidence on ``k`` variables at values drawn from the model."""
    m = implied_moments(model)
    pool = [v for v in m.variables if v not in exclude]
    k = k or int(rng.integers(1, min(2, len(pool)) + 1))
    chosen = list(rng.choice(pool, size=k, replace=False))
    draw = m.mean + np.linalg.cholesky(m.cov + 1e-12 * np.eye(len(m))) @ rng.standard_normal(len(m))
    return Evidence(point={str(v): float(draw[m.index(v)]) for v in chosen})


def random_box(rng, model, k=None, min_mass=0.05):
    """Box evidence on 1-2 variables with probability at least ``min_mass``."""
    m = implied_moments(model)
    k = k or int(rng.integers(1, min(2, len(m)) + 1))
    while True:
        chosen = [str(v) for v in rng.choice(m.variables, size=k, replace=False)]
        box = {}
        for v in chosen:
            mu, sd = m.mu(v), np.sqrt(m.sigma(v))
            kind = rng.integers(3)
            u = np.sort(rng.normal(size=2))
            if kind == 0:
                box[v] = (mu + sd * u[0], np.inf)
            elif kind == 1:
                box[v] = (-np.inf, mu + sd * u[1])
            else:
                box[v] = (mu + sd * u[0], mu + sd * (u[1] + 0.2))
        mass = box_moments(m.subset(chosen), box).mass
        if mass >= min_mass:
            return Evidence(box=box), mass


def random_plan(rng, model, x, x0=None):
    G = model.diagram
    pool = nondescendants(G, x)
    k = int(rng.integers(1, len(pool) + 1))
    w = tuple(str(v) for v in rng.choice(pool, size=k, replace=False))
    w = G.sort(w)
    a = tuple(rng.uniform(-1.5, 1.5, size=len(w)))
    x0 = float(rng.normal()) if x0 is None else x0
    return Plan(x, x0, w, a)


def random_covariates(rng, model, x, exclude=()):
    pool = [v for v in nondescendants(model.diagram, x) if v not in exclude]
    if not pool:
        return ()
    k = int(rng.integers(1, len(pool) + 1))
    return model.diagram.sort(str(v) for v in rng.choice(pool, size=k, replace=False))
