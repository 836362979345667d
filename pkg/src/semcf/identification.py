"""Graphical identification of the total effect and its covariance estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

from .conditioning import partial_cov, regression_coeffs
from .errors import ModelError, UnknownVertex, ZeroInstrumentCovariance
from .graph import PathDiagram, backdoor_admissible, conditional_iv, descendants
from .sem import GaussianMoments, LinearSEM, total_effect_by_paths

ROUTES = ("structural", "backdoor", "conditional_iv", "supplied", "unidentified")


@dataclass(frozen=True)
class IdentificationResult:
    """How the total effect was obtained.

    ``witness`` holds the vertex sets the estimator used, e.g.
    ``{"t": ("Z",)}`` for a back-door set or ``{"z": "Z", "t": ()}`` for an
    instrument.
    """

    route: str
    tau: Optional[float] = None
    witness: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}")
        if (self.tau is None) != (self.route == "unidentified"):
            raise ValueError("tau is present exactly when the route is not 'unidentified'")

    @property
    def identified(self) -> bool:
        return self.route != "unidentified"

    def to_dict(self) -> dict:
        return {"kind": self.route, "tau": self.tau,
                "witness": {k: list(v) if isinstance(v, tuple) else v
                            for k, v in self.witness.items()}}


def backdoor_estimate(moments: GaussianMoments, x, y, t=()) -> float:
    """``beta_yx.t``.  Equals the total effect only if ``t`` is back-door
    admissible; callers must check that."""
    return float(regression_coeffs(moments, [y], [x], list(t))[0, 0])


def iv_estimate(moments: GaussianMoments, x, y, z, t=()) -> float:
    """Instrumental-variable ratio ``sigma_yz.t / sigma_xz.t``."""
    t = list(t)
    s_xz = float(partial_cov(moments, [x], [z], t)[0, 0])
    if abs(s_xz) < 1e-12:
        raise ZeroInstrumentCovariance(f"{z!r} is uncorrelated with {x!r} given {t}")
    return float(partial_cov(moments, [y], [z], t)[0, 0]) / s_xz


def _subsets(pool, max_size):
    for k in range(min(max_size, len(pool)) + 1):
        yield from combinations(pool, k)


def identify(G: PathDiagram, observed, moments: Optional[GaussianMoments], x, y, *,
             max_adjustment_size: int = 4, model: Optional[LinearSEM] = None
             ) -> IdentificationResult:
    """Find an estimator of the total effect of ``x`` on ``y``.

    With ``model`` given, the effect is read off the coefficients.  Otherwise
    observed subsets are searched by increasing size (ties in declaration
    order) for a back-door set, then for a conditional instrument.
    """
    for v in (x, y):
        G.index(v)
    if model is not None:
        return IdentificationResult("structural", total_effect_by_paths(model.diagram, x, y), {})
    observed = G.sort(observed)
    if x not in observed or y not in observed:
        raise UnknownVertex("treatment and response must be observed")
    if moments is None:
        raise ModelError("observed moments are required without a structural model")
    if y not in descendants(G, x):
        return IdentificationResult("structural", 0.0, {"reason": "no directed path"})
    pool = [v for v in observed if v not in (x, y)]

    for t in _subsets(pool, max_adjustment_size):
        if backdoor_admissible(G, x, y, t):
            return IdentificationResult("backdoor", backdoor_estimate(moments, x, y, t), {"t": t})

    for t in _subsets(pool, max_adjustment_size):
        for z in pool:
            if z in t or not conditional_iv(G, x, y, z, t):
                continue
            try:
                tau = iv_estimate(moments, x, y, z, t)
            except ZeroInstrumentCovariance:
                continue
            return IdentificationResult("conditional_iv", tau, {"z": z, "t": t})
    return IdentificationResult("unidentified")
