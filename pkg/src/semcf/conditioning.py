"""Updating Gaussian moments on point and interval (box) evidence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import (
    InvalidEvidence,
    OverlappingSets,
    SingularEvidenceCovariance,
    SingularRegressorCovariance,
    ZeroMassBox,
)
from .sem import GaussianMoments
from .truncated import BoxMoments, box_moments_std

SUPPORT_TOL = 1e-8
RANK_TOL = 1e-10


@dataclass(frozen=True)
class Evidence:
    """Point observations ``R = r`` and box observations ``r1 <= R <= r2``.

    Bounds may be infinite.  A box with equal bounds is a point observation in
    disguise; :meth:`normalized` moves it to ``point``.
    """

    point: Mapping = field(default_factory=dict)
    box: Mapping = field(default_factory=dict)

    def __post_init__(self):
        point = {k: float(v) for k, v in dict(self.point).items()}
        box = {}
        for k, bounds in dict(self.box).items():
            lo, hi = (float(b) for b in bounds)
            if math.isnan(lo) or math.isnan(hi):
                raise InvalidEvidence(f"NaN bound for {k!r}")
            if lo > hi:
                raise InvalidEvidence(f"empty box for {k!r}: {lo} > {hi}")
            if lo == hi and math.isinf(lo):
                raise InvalidEvidence(f"box for {k!r} is a point at infinity")
            box[k] = (lo, hi)
        for k, v in point.items():
            if not math.isfinite(v):
                raise InvalidEvidence(f"point value for {k!r} must be finite")
        if set(point) & set(box):
            raise OverlappingSets("a variable cannot carry both point and box evidence")
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "box", box)

    @property
    def variables(self) -> tuple:
        return tuple(self.point) + tuple(self.box)

    def is_empty(self) -> bool:
        return not self.point and not self.box

    def normalized(self) -> "Evidence":
        point = dict(self.point)
        box = {}
        for k, (lo, hi) in self.box.items():
            if lo == hi:
                point[k] = lo
            else:
                box[k] = (lo, hi)
        return Evidence(point, box)


@dataclass(frozen=True, eq=False)
class ConditionedMoments(GaussianMoments):
    """Moments after conditioning, with the box mass and numeric error.

    ``error`` bounds the absolute error of every covariance entry (an
    approximate standard error when a Monte Carlo rule was used); point
    conditioning is exact and reports zero.
    """

    mass: float = 1.0
    error: float = 0.0
    method: str = "exact"


def _psd_pinv(S):
    """Pseudo-inverse of a symmetric PSD matrix and a basis of its null space."""
    w, V = np.linalg.eigh((S + S.T) / 2)
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1e-300)
    keep = w > RANK_TOL * max(scale, 1.0)
    inv = (V[:, keep] / w[keep]) @ V[:, keep].T
    return inv, V[:, ~keep]


def condition_point(moments: GaussianMoments, assignments: Mapping) -> ConditionedMoments:
    """Gaussian conditional moments given ``R = r``.

    Conditioned variables keep their observed value with zero variance.  A
    singular ``Sigma_rr`` is fine as long as ``r`` lies on the support.
    """
    assignments = dict(assignments)
    if not assignments:
        return ConditionedMoments(moments.variables, moments.mean, moments.cov)
    r_idx = moments.indices(assignments)
    r = np.array([float(v) for v in assignments.values()])
    mu, S = moments.mean, moments.cov
    S_rr = S[np.ix_(r_idx, r_idx)]
    inv, null = _psd_pinv(S_rr)
    resid = r - mu[r_idx]
    if null.size and np.max(np.abs(null.T @ resid)) > SUPPORT_TOL * max(1.0, np.max(np.abs(r))):
        raise SingularEvidenceCovariance(
            "observed values are inconsistent with a deterministic relation among "
            f"{list(assignments)}"
        )
    K = S[:, r_idx] @ inv
    mean = mu + K @ resid
    cov = S - K @ S[r_idx, :]
    cov = (cov + cov.T) / 2
    mean[r_idx] = r
    cov[r_idx, :] = 0.0
    cov[:, r_idx] = 0.0
    # tiny negative diagonals from cancellation
    d = np.diag(cov).copy()
    np.fill_diagonal(cov, np.maximum(d, 0.0))
    return ConditionedMoments(moments.variables, mean, cov)


def _truncate(moments: GaussianMoments, box: Mapping, *, tol, n_mc, seed):
    """Truncate ``moments`` to ``box`` and propagate to every variable."""
    mu, S = moments.mean, moments.cov
    n = len(moments)
    constrained, lo, hi = [], [], []
    for v, (a, b) in box.items():
        i = moments.index(v)
        if math.isinf(a) and math.isinf(b):
            continue
        if S[i, i] <= RANK_TOL * max(1.0, float(np.max(np.abs(np.diag(S))))):
            # deterministic given earlier evidence
            if not (a <= mu[i] <= b):
                raise ZeroMassBox(f"{v!r} is fixed at {mu[i]:.6g}, outside [{a}, {b}]")
            continue
        constrained.append(i)
        lo.append(a)
        hi.append(b)
    if not constrained:
        return mu.copy(), S.copy(), 1.0, np.zeros(n), np.zeros((n, n)), "exact"
    c = constrained
    S_cc = S[np.ix_(c, c)]
    mass, m_c, C_c, m_err, C_err, method = box_moments_std(
        mu[c], S_cc, lo, hi, tol=tol, n_mc=n_mc, seed=seed
    )
    B = np.linalg.solve(S_cc, S[c, :]).T  # regression of all variables on the box block
    mean = mu + B @ (m_c - mu[c])
    cov = S - B @ S[c, :] + B @ C_c @ B.T
    cov = (cov + cov.T) / 2
    absB = np.abs(B)
    return mean, cov, mass, absB @ m_err, absB @ C_err @ absB.T, method


def box_moments(marginal: GaussianMoments, box: Mapping, *, tol=1e-8, n_mc=200_000,
                seed=0) -> BoxMoments:
    """Moments of ``marginal`` restricted to ``box`` (keyed by variable).

    Variables of ``marginal`` missing from ``box`` are unconstrained.

    >>> m = GaussianMoments(("X",), [0.0], [[1.0]])
    >>> bm = box_moments(m, {"X": (0.0, np.inf)})
    >>> round(bm.mass, 6), round(float(bm.mean[0]), 6)
    (0.5, 0.797885)
    """
    mean, cov, mass, m_err, c_err, method = _truncate(
        marginal, box, tol=tol, n_mc=n_mc, seed=seed
    )
    return BoxMoments(marginal.variables, mean, cov, mass, m_err, c_err, method)


def condition_box(moments: GaussianMoments, evidence: Optional[Evidence] = None, *,
                  tol=1e-8, n_mc=200_000, seed=0) -> ConditionedMoments:
    """Exact first and second moments of ``moments`` given mixed evidence.

    Point evidence (including boxes with equal bounds) is applied first; the
    box truncation is then propagated to every variable through the
    regression on the boxed block.  The result is generally not Gaussian;
    only its first two moments are returned.
    """
    if evidence is None or evidence.is_empty():
        return ConditionedMoments(moments.variables, moments.mean, moments.cov)
    evidence = evidence.normalized()
    for v in evidence.variables:
        moments.index(v)
    cm = condition_point(moments, evidence.point)
    if not evidence.box:
        return cm
    mean, cov, mass, _, c_err, method = _truncate(
        cm, evidence.box, tol=tol, n_mc=n_mc, seed=seed
    )
    for v in evidence.point:
        i = cm.index(v)
        cov[i, :] = 0.0
        cov[:, i] = 0.0
    err = float(np.max(c_err)) if c_err.size else 0.0
    return ConditionedMoments(moments.variables, mean, cov, mass=mass, error=err, method=method)


def partial_cov(moments: GaussianMoments, rows, cols, given=()) -> np.ndarray:
    """``Sigma_{rows, cols . given}``."""
    rows, cols, given = list(rows), list(cols), list(given)
    if not given:
        return moments.block(rows, cols)
    S_gg = moments.block(given, given)
    inv, _ = _psd_pinv(S_gg)
    return moments.block(rows, cols) - moments.block(rows, given) @ inv @ moments.block(given, cols)


def regression_coeffs(moments: GaussianMoments, targets, regressors, given=()) -> np.ndarray:
    """Coefficients of ``regressors`` in the regression of ``targets`` on
    ``regressors`` and ``given``: ``Sigma_tr.g Sigma_rr.g^{-1}``.

    >>> m = GaussianMoments(("X", "Y"), [0, 0], [[2.0, 1.0], [1.0, 3.0]])
    >>> regression_coeffs(m, ["Y"], ["X"])
    array([[0.5]])
    """
    targets, regressors, given = list(targets), list(regressors), list(given)
    if set(targets) & set(regressors) or set(targets) & set(given) or set(regressors) & set(given):
        raise OverlappingSets("targets, regressors and given must be disjoint")
    S_rr = partial_cov(moments, regressors, regressors, given)
    w = np.linalg.eigvalsh(S_rr) if S_rr.size else np.ones(1)
    scale = max(1.0, float(np.max(np.abs(np.diag(moments.cov)))))
    if w.min() <= 1e-12 * scale:
        raise SingularRegressorCovariance(
            f"conditional covariance of {regressors} given {given} is singular"
        )
    S_tr = partial_cov(moments, targets, regressors, given)
    return np.linalg.solve(S_rr, S_tr.T).T
