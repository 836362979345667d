"""Counterfactual means and variances of the response under plans.

Every query runs on the joint moments of the actual world plus the total
effect of the treatment.  ``source`` is either a :class:`~semcf.sem.LinearSEM`
(total effects come from the coefficients) or an
:class:`ObservationalModel` (graph plus observed moments; the effect is
identified graphically or supplied by the caller).

For a plan ``X = x0 + a W`` with ``W`` nondescendants of ``X``, the twin
world keeps every disturbance, so ``S* = S + tau_sx (x0 + a W - X)``.  All
formulas below are moments of that expression under the actual-world law
after evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .conditioning import ConditionedMoments, Evidence, _psd_pinv, condition_box, condition_point
from .errors import (
    DegenerateTreatment,
    EmptyPlanCovariates,
    InvalidEvidence,
    ModelError,
    NegativeVarianceBeyondTolerance,
    ResponseNotDescendant,
    SingularPlanCovariance,
    Unidentified,
    UnknownVertex,
    ZeroTotalEffect,
)
from .graph import PathDiagram, descendants, partition
from .identification import IdentificationResult, identify
from .sem import GaussianMoments, LinearSEM, implied_moments, total_effect

NEG_VAR_TOL = 1e-9
DEGENERATE = 1e-12


@dataclass(frozen=True)
class EngineConfig:
    """Numerical knobs.  ``tol``, ``n_mc`` and ``seed`` only matter for box
    evidence; ``max_adjustment_size`` bounds the identification search."""

    tol: float = 1e-8
    n_mc: int = 200_000
    seed: int = 0
    max_adjustment_size: int = 4

    def box_options(self) -> dict:
        return {"tol": self.tol, "n_mc": self.n_mc, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class ObservationalModel:
    """Graph plus moments of the observed variables.

    ``tau`` optionally supplies the total effect of the queried treatment on
    the queried response; otherwise it is identified from the graph.
    """

    diagram: PathDiagram
    moments: GaussianMoments
    tau: Optional[float] = None

    def __post_init__(self):
        for v in self.moments.variables:
            self.diagram.index(v)

    @property
    def observed(self) -> tuple:
        return self.moments.variables


Source = Union[LinearSEM, ObservationalModel]


@dataclass(frozen=True)
class Plan:
    """Treatment rule ``X = x0 + a . W``; empty ``w`` is an unconditional plan."""

    x: object
    x0: float = 0.0
    w: tuple = ()
    a: tuple = ()

    def __post_init__(self):
        w = (self.w,) if isinstance(self.w, str) else tuple(self.w)
        a = tuple(float(c) for c in np.atleast_1d(np.asarray(self.a, dtype=float)))
        if not w and a == (0.0,):
            a = ()
        if len(a) != len(w):
            raise ModelError(f"plan has {len(w)} covariates but {len(a)} coefficients")
        if len(set(w)) != len(w):
            raise ModelError("plan covariates must be distinct")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def is_conditional(self) -> bool:
        return any(c != 0.0 for c in self.a)

    def to_dict(self) -> dict:
        return {"x": self.x, "x0": self.x0, "w": list(self.w), "a": list(self.a)}


@dataclass(frozen=True, eq=False)
class CounterfactualResult:
    """Moments of the counterfactual descendants ``S*`` (response first).

    Only the response is reported unless a query asks for the full vector.
    ``residual_cross_cov`` is ``Cov(S*, W)`` for plan queries.
    """

    moments: GaussianMoments
    y_mean: float
    y_var: float
    route: IdentificationResult
    residual_cross_cov: Optional[np.ndarray] = None
    moment_error: float = 0.0
    plan: Optional[Plan] = None
    warnings: tuple = ()


@dataclass(frozen=True)
class CovariateSetScore:
    """One entry of :func:`rank_covariate_sets`.

    ``score`` is the variance reduction the optimal plan over ``w`` achieves
    relative to an unconditional plan; ``flag`` names the error class when
    the candidate was rejected.
    """

    w: tuple
    score: Optional[float]
    optimal_variance: Optional[float]
    flag: Optional[str] = None


@dataclass
class _Setup:
    G: PathDiagram
    moments: GaussianMoments
    s: tuple
    tau: np.ndarray
    route: IdentificationResult


def _setup(source: Source, x, y, full: bool, config: EngineConfig) -> _Setup:
    if isinstance(source, LinearSEM):
        G = source.diagram
        part = partition(G, x, y)
        s = part.s if full else (y,)
        tau_full = total_effect(source, x, part.s)
        tau = tau_full if full else tau_full[:1]
        route = IdentificationResult("structural", float(tau_full[0]), {})
        return _Setup(G, implied_moments(source), s, tau, route)

    if not isinstance(source, ObservationalModel):
        raise TypeError(f"expected LinearSEM or ObservationalModel, got {type(source).__name__}")
    G = source.diagram
    G.index(x)
    G.index(y)
    if y not in descendants(G, x):
        raise ResponseNotDescendant(f"{y!r} is not a descendant of {x!r}")
    if full:
        raise ModelError("vector counterfactuals need a structural model")
    if source.tau is not None:
        route = IdentificationResult("supplied", float(source.tau), {})
    else:
        route = identify(G, source.observed, source.moments, x, y,
                         max_adjustment_size=config.max_adjustment_size)
        if not route.identified:
            raise Unidentified(
                f"total effect of {x!r} on {y!r} is not identifiable from {list(source.observed)}"
            )
    return _Setup(G, source.moments, (y,), np.array([route.tau]), route)


def _clamp(var: float, scale: float) -> float:
    if var < 0.0:
        if var < -NEG_VAR_TOL * max(1.0, scale):
            raise NegativeVarianceBeyondTolerance(
                f"counterfactual variance {var:.3g} is negative; inputs are inconsistent"
            )
        return 0.0
    return var


def _result(st: _Setup, mean, cov, **kwargs) -> CounterfactualResult:
    cov = (cov + cov.T) / 2
    scale = float(np.max(np.abs(np.diag(st.moments.cov)))) if len(st.moments) else 1.0
    y_var = _clamp(float(cov[0, 0]), scale)
    diag = np.diag(cov).copy()
    for i, d in enumerate(diag):
        diag[i] = _clamp(float(d), scale)
    np.fill_diagonal(cov, diag)
    moments = GaussianMoments(tuple(f"{v}*" for v in st.s), mean, cov)
    return CounterfactualResult(moments, float(mean[0]), y_var, st.route, **kwargs)


def _require(moments, vs, what):
    missing = [v for v in vs if v not in moments]
    if missing:
        raise UnknownVertex(f"{what} {missing} are not observed")


def intervene(source: Source, x, y, x0: float, *, full: bool = False,
              config: EngineConfig = EngineConfig()) -> CounterfactualResult:
    """Moments of the response under the intervention ``X = x0``.

    ``mu_y* = mu_y + tau (x0 - mu_x)`` and
    ``var_y* = var_y.x + (tau - beta_yx)^2 var_x``.
    """
    st = _setup(source, x, y, full, config)
    m = st.moments
    _require(m, (x,) + st.s, "variables")
    s_xx = m.sigma(x)
    if s_xx <= DEGENERATE:
        raise DegenerateTreatment(f"variance of {x!r} is {s_xx:.3g}")
    S_ss = m.block(st.s, st.s)
    S_sx = m.block(st.s, [x])[:, 0]
    B_sx = S_sx / s_xx
    mean = m.mean[m.indices(st.s)] + st.tau * (x0 - m.mu(x))
    d = st.tau - B_sx
    cov = S_ss - np.outer(S_sx, S_sx) / s_xx + np.outer(d, d) * s_xx
    return _result(st, mean, cov, plan=Plan(x, x0))


def counterfactual_point(source: Source, evidence, x, y, x0: float, *, full: bool = False,
                         config: EngineConfig = EngineConfig()) -> CounterfactualResult:
    """Response moments under ``X = x0`` given point observations ``R = r``.

    The variance subtracts from the intervention variance the part of
    ``Y - tau X`` explained by ``R``:
    ``(B_yr - tau B_xr) Sigma_rr (B_yr - tau B_xr)'``.
    """
    if isinstance(evidence, Evidence):
        ev = evidence.normalized()
        if ev.box:
            raise InvalidEvidence("counterfactual_point takes point evidence only")
        point = ev.point
    else:
        point = Evidence(point=evidence).point
    if not point:
        return intervene(source, x, y, x0, full=full, config=config)

    st = _setup(source, x, y, full, config)
    m = st.moments
    r = list(point)
    _require(m, [x] + r + list(st.s), "variables")
    s_xx = m.sigma(x)
    if s_xx <= DEGENERATE:
        raise DegenerateTreatment(f"variance of {x!r} is {s_xx:.3g}")
    cm = condition_point(m, point)  # also checks r against the support

    s_idx = m.indices(st.s)
    mean = cm.mean[s_idx] + st.tau * (x0 - cm.mu(x))

    S_ss = m.block(st.s, st.s)
    S_sx = m.block(st.s, [x])[:, 0]
    d = st.tau - S_sx / s_xx
    base = S_ss - np.outer(S_sx, S_sx) / s_xx + np.outer(d, d) * s_xx
    S_rr = m.block(r, r)
    inv, _ = _psd_pinv(S_rr)
    B_sr = m.block(st.s, r) @ inv
    B_xr = m.block([x], r) @ inv
    D = B_sr - np.outer(st.tau, B_xr[0])
    cov = base - D @ S_rr @ D.T
    return _result(st, mean, cov, plan=Plan(x, x0))


def _plan_moments(st: _Setup, cm: ConditionedMoments, plan: Plan):
    """Mean, covariance of ``S*`` and ``Cov(S*, W)`` for ``plan``, from moments
    already conditioned on the evidence.  Division-free expansion."""
    x, w = plan.x, list(plan.w)
    tau = st.tau
    a = np.asarray(plan.a, dtype=float)
    ta = np.outer(tau, a)

    S_ss = cm.block(st.s, st.s)
    S_sx = cm.block(st.s, [x])
    s_xx = cm.sigma(x)
    S_sw = cm.block(st.s, w)
    S_xw = cm.block([x], w)
    S_ww = cm.block(w, w)
    t = tau[:, None]

    cov = (S_ss + ta @ S_ww @ ta.T + t @ t.T * s_xx
           + ta @ S_sw.T + S_sw @ ta.T
           - t @ S_sx.T - S_sx @ t.T
           - ta @ S_xw.T @ t.T - t @ S_xw @ ta.T)
    mean = (cm.mean[cm.indices(st.s)] + tau * (plan.x0 - cm.mu(x))
            + ta @ cm.mean[cm.indices(w)])
    cross = S_sw - t @ S_xw + ta @ S_ww

    # Y* = c.V with c = e_y - tau e_x + tau a e_w; entry-wise error bound.
    c1 = 1.0 + abs(tau[0]) + abs(tau[0]) * float(np.sum(np.abs(a)))
    return mean, cov, cross, cm.error * c1 * c1


def _check_plan_covariates(st: _Setup, x, y, w):
    partition(st.G, x, y, w)  # raises PlanCovariateIsDescendant
    _require(st.moments, list(w) + [x], "plan variables")


def counterfactual_plan(source: Source, evidence: Optional[Evidence], plan: Plan, y, *,
                        full: bool = False, config: EngineConfig = EngineConfig()
                        ) -> CounterfactualResult:
    """Response moments under ``plan`` given point and/or box evidence."""
    st = _setup(source, plan.x, y, full, config)
    _check_plan_covariates(st, plan.x, y, plan.w)
    _require(st.moments, st.s, "variables")
    cm = condition_box(st.moments, evidence, **config.box_options())
    mean, cov, cross, err = _plan_moments(st, cm, plan)
    return _result(st, mean, cov, residual_cross_cov=cross, moment_error=err, plan=plan)


def _plan_terms(cm: ConditionedMoments, x, y, w, tau_y):
    """Pieces of the optimal-plan variance for covariates ``w``.

    Returns ``(d, S_ww_inv)`` with ``d = sigma_yw - tau sigma_xw``; the
    variance reduction is ``d S_ww^{-1} d'``.
    """
    w = list(w)
    S_ww = cm.block(w, w)
    scale = max(1.0, float(np.max(np.abs(np.diag(cm.cov)))))
    if np.linalg.eigvalsh(S_ww).min() <= 1e-12 * scale:
        raise SingularPlanCovariance(f"covariance of {w} given the evidence is singular")
    d = cm.block([y], w)[0] - tau_y * cm.block([x], w)[0]
    return d, np.linalg.inv(S_ww)


def optimal_plan(source: Source, evidence: Optional[Evidence], w: Sequence, x, y,
                 x0: float = 0.0, *, full: bool = False,
                 config: EngineConfig = EngineConfig()):
    """Variance-minimising conditional plan over covariates ``w``.

    Solves ``tau a + sigma_yw S_ww^{-1} - tau sigma_xw S_ww^{-1} = 0`` for the
    response row.  Returns ``(plan, result)``.
    """
    w = (w,) if isinstance(w, str) else tuple(w)
    if not w:
        raise EmptyPlanCovariates("an optimal plan needs at least one covariate")
    st = _setup(source, x, y, full, config)
    _check_plan_covariates(st, x, y, w)
    tau_y = float(st.tau[0])
    if abs(tau_y) < 1e-12:
        raise ZeroTotalEffect(f"{x!r} has no total effect on {y!r}")
    cm = condition_box(st.moments, evidence, **config.box_options())
    d, S_ww_inv = _plan_terms(cm, x, y, w, tau_y)
    a = -(d @ S_ww_inv) / tau_y
    plan = Plan(x, x0, w, tuple(a))
    mean, cov, cross, err = _plan_moments(st, cm, plan)

    # Closed form at the optimum; division by var_x only when it is nonzero.
    s_yy, s_xy, s_xx = cm.sigma(y), cm.sigma(x, y), cm.sigma(x)
    if s_xx > DEGENERATE:
        head = (s_yy - s_xy ** 2 / s_xx) + (tau_y - s_xy / s_xx) ** 2 * s_xx
    else:
        head = s_yy - 2 * tau_y * s_xy + tau_y ** 2 * s_xx
    y_var = head - float(d @ S_ww_inv @ d)
    mu_w = cm.mean[cm.indices(w)]
    y_mean = cm.mu(y) + tau_y * (x0 - cm.mu(x)) - float(d @ S_ww_inv @ mu_w)

    mean = mean.copy()
    cov = cov.copy()
    mean[0] = y_mean
    cov[0, 0] = y_var
    res = _result(st, mean, cov, residual_cross_cov=cross, moment_error=err, plan=plan)
    return plan, res


def rank_covariate_sets(source: Source, evidence: Optional[Evidence], candidates, x, y, *,
                        config: EngineConfig = EngineConfig()) -> list:
    """Order candidate covariate sets by the variance their optimal plan
    removes (largest first).

    Candidates that contain ``x`` or its descendants, or whose covariance is
    singular, are flagged and listed last in input order.
    """
    st = _setup(source, x, y, False, config)
    cm = condition_box(st.moments, evidence, **config.box_options())
    tau_y = float(st.tau[0])
    s_yy, s_xy, s_xx = cm.sigma(y), cm.sigma(x, y), cm.sigma(x)
    base = s_yy - 2 * tau_y * s_xy + tau_y ** 2 * s_xx
    desc = descendants(st.G, x) | {x}
    scored, flagged = [], []
    for cand in candidates:
        w = (cand,) if isinstance(cand, str) else tuple(cand)
        for v in w:
            st.G.index(v)
        if set(w) & desc:
            flagged.append(CovariateSetScore(w, None, None, "PlanCovariateIsDescendant"))
            continue
        _require(st.moments, w, "plan covariates")
        if not w:
            scored.append(CovariateSetScore(w, 0.0, base))
            continue
        try:
            d, S_inv = _plan_terms(cm, x, y, w, tau_y)
        except SingularPlanCovariance:
            flagged.append(CovariateSetScore(w, None, None, "SingularPlanCovariance"))
            continue
        score = float(d @ S_inv @ d)
        scored.append(CovariateSetScore(w, score, base - score))
    scored.sort(key=lambda c: -c.score)  # stable: ties keep input order
    return scored + flagged
