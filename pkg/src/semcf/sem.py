"""Moment algebra of Gaussian linear structural equation models.

``V = A V + e`` with ``e ~ N(mu_e, Sigma_e)``; ``A[i, j]`` is the coefficient of
vertex ``j`` in the equation for vertex ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    ModelError,
    NotPositiveSemidefinite,
    PartitionMismatch,
    UnknownVertex,
)
from .graph import PathDiagram, descendants

PSD_TOL = 1e-9


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianMoments:
    """Mean vector and covariance matrix over an ordered variable list."""

    variables: tuple
    mean: np.ndarray
    cov: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        variables = tuple(self.variables)
        mean = _readonly(self.mean).reshape(-1)
        cov = _readonly(self.cov)
        n = len(variables)
        if len(set(variables)) != n:
            raise DimensionMismatch("duplicate variable names")
        if mean.shape != (n,) or cov.shape != (n, n):
            raise DimensionMismatch(
                f"moments for {n} variables got mean {mean.shape} and cov {cov.shape}"
            )
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ModelError("moments must be finite")
        scale = max(1.0, float(np.max(np.abs(cov)))) if n else 1.0
        if n and not np.allclose(cov, cov.T, rtol=0.0, atol=1e-9 * scale):
            raise NotPositiveSemidefinite("covariance matrix is not symmetric")
        if n and np.linalg.eigvalsh((cov + cov.T) / 2).min() < -PSD_TOL * scale:
            raise NotPositiveSemidefinite("covariance matrix is not positive semidefinite")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(variables)})

    def __len__(self):
        return len(self.variables)

    def __contains__(self, v):
        return v in self._index

    def index(self, v) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise UnknownVertex(f"variable {v!r} not in moments {list(self.variables)}") from None

    def indices(self, vs) -> list:
        return [self.index(v) for v in vs]

    def mu(self, v) -> float:
        return float(self.mean[self.index(v)])

    def sigma(self, u, v=None) -> float:
        v = u if v is None else v
        return float(self.cov[self.index(u), self.index(v)])

    def block(self, rows, cols) -> np.ndarray:
        return self.cov[np.ix_(self.indices(rows), self.indices(cols))]

    def subset(self, vs) -> "GaussianMoments":
        idx = self.indices(vs)
        return GaussianMoments(tuple(vs), self.mean[idx], self.cov[np.ix_(idx, idx)])

    def scaled(self, c: float) -> "GaussianMoments":
        """Same means, covariance multiplied by ``c``."""
        return GaussianMoments(self.variables, self.mean, self.cov * c)


class LinearSEM:
    """A path diagram with numeric coefficients and disturbance moments.

    Parameters
    ----------
    diagram:
        Diagram whose directed edges all carry coefficients.
    variances:
        Disturbance variance per vertex, default 1.
    means:
        Disturbance mean per vertex, default 0.
    observed:
        Variables treated as measured by graphical identification queries,
        default all.

    Off-diagonal disturbance covariances come from the diagram's bidirected
    edges.
    """

    def __init__(
        self,
        diagram: PathDiagram,
        variances: Optional[Mapping] = None,
        means: Optional[Mapping] = None,
        observed: Optional[Sequence] = None,
    ):
        self.diagram = diagram
        self.observed = diagram.vertices if observed is None else diagram.sort(observed)
        verts = diagram.vertices
        n = len(verts)
        variances = dict(variances or {})
        means = dict(means or {})
        for key in list(variances) + list(means):
            diagram.index(key)

        A = np.zeros((n, n))
        for u, v, c in diagram.directed_edges:
            if c is None:
                raise ModelError(f"edge {u}->{v} has no coefficient")
            A[diagram.index(v), diagram.index(u)] = c
        S = np.diag([float(variances.get(v, 1.0)) for v in verts])
        for u, v, c in diagram.bidirected_edges:
            if c is None:
                raise ModelError(f"bidirected edge {u}<->{v} has no covariance")
            i, j = diagram.index(u), diagram.index(v)
            S[i, j] = S[j, i] = c
        if np.any(np.diag(S) < 0) or not np.all(np.isfinite(S)):
            raise NotPositiveSemidefinite("disturbance variances must be finite and nonnegative")
        if n and np.linalg.eigvalsh(S).min() < -PSD_TOL:
            raise NotPositiveSemidefinite(
                "disturbance covariance is not positive semidefinite "
                f"(min eigenvalue {np.linalg.eigvalsh(S).min():.3g})"
            )
        self._A = _readonly(A)
        self._disturbances = GaussianMoments(
            verts, [float(means.get(v, 0.0)) for v in verts], S
        )
        self._implied = None

    @property
    def vertices(self) -> tuple:
        return self.diagram.vertices

    @property
    def coefficient_matrix(self) -> np.ndarray:
        return self._A

    @property
    def disturbances(self) -> GaussianMoments:
        return self._disturbances

    @property
    def disturbance_mean(self) -> np.ndarray:
        return self._disturbances.mean

    @property
    def disturbance_cov(self) -> np.ndarray:
        return self._disturbances.cov

    def reduced_form(self) -> np.ndarray:
        """``(I - A)^{-1}`` by substitution in topological order."""
        return _reduced_form(self.diagram, self._A)

    def __eq__(self, other):
        if not isinstance(other, LinearSEM):
            return NotImplemented
        return (
            self.diagram == other.diagram
            and self.observed == other.observed
            and np.array_equal(self._A, other._A)
            and np.array_equal(self.disturbance_mean, other.disturbance_mean)
            and np.array_equal(self.disturbance_cov, other.disturbance_cov)
        )

    __hash__ = None

    def __repr__(self):
        return f"LinearSEM({self.diagram!r})"


def _reduced_form(G: PathDiagram, A: np.ndarray) -> np.ndarray:
    # Row i of (I - A)^{-1} is e_i + sum over parents j of A[i, j] * row j.
    n = len(G)
    M = np.zeros((n, n))
    for v in G.topological_order:
        i = G.index(v)
        M[i, i] = 1.0
        for p in G.parents(v):
            j = G.index(p)
            M[i] += A[i, j] * M[j]
    return M


def implied_moments(model: LinearSEM) -> GaussianMoments:
    """Joint moments of the observed variables implied by ``model``."""
    if model._implied is None:
        M = model.reduced_form()
        eps = model.disturbances
        cov = M @ eps.cov @ M.T
        model._implied = GaussianMoments(model.vertices, M @ eps.mean, (cov + cov.T) / 2)
    return model._implied


def disturbance_moments(A, joint: GaussianMoments) -> GaussianMoments:
    """Moments of ``e = (I - A) V`` given moments of ``V``."""
    A = np.asarray(A, dtype=float)
    n = len(joint)
    if A.shape != (n, n):
        raise DimensionMismatch(f"coefficient matrix {A.shape} vs {n} variables")
    L = np.eye(n) - A
    cov = L @ joint.cov @ L.T
    return GaussianMoments(joint.variables, L @ joint.mean, (cov + cov.T) / 2)


def conditional_disturbance_moments(A, joint: GaussianMoments, evidence, **box_options):
    """Disturbance moments after updating ``joint`` on ``evidence``.

    Point evidence is exact Gaussian conditioning; box evidence uses
    :func:`semcf.conditioning.condition_box`, so the result holds the exact
    first and second moments of a non-Gaussian law.
    """
    from .conditioning import condition_box

    return disturbance_moments(A, condition_box(joint, evidence, **box_options))


def _sub(model, rows, cols):
    G = model.diagram
    return model.coefficient_matrix[np.ix_([G.index(v) for v in rows], [G.index(v) for v in cols])]


def total_effect(model: LinearSEM, x, s: Optional[Sequence] = None) -> np.ndarray:
    """Total effects of ``x`` on each vertex of ``s`` (default: every
    descendant of ``x`` in declaration order).

    ``s`` must list exactly the descendants of ``x``, in any order.
    """
    G = model.diagram
    desc = descendants(G, x)
    if s is None:
        s = G.sort(desc)
    s = tuple(s)
    if set(s) != desc or len(s) != len(desc):
        raise PartitionMismatch(f"{list(s)} is not the descendant set of {x!r}")
    if not s:
        return np.zeros(0)
    A_ss = _sub(model, s, s)
    A_sx = _sub(model, s, [x])[:, 0]
    return np.linalg.solve(np.eye(len(s)) - A_ss, A_sx)


def total_effect_by_paths(G: PathDiagram, x, y) -> float:
    """Sum over directed paths x -> ... -> y of coefficient products."""
    G.index(x)
    G.index(y)
    coef = {(u, v): c for u, v, c in G.directed_edges}

    def walk(v):
        if v == y:
            return 1.0
        return sum(coef[(v, c)] * walk(c) for c in G.children(v))

    if x == y:
        return 1.0
    return float(walk(x))
