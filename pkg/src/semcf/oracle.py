"""Monte Carlo twin-world oracle.

Draw disturbances, keep the draws consistent with the evidence, then replay
the structural equations with the treatment set by the plan while reusing
the same disturbances.  This shares no code with the closed-form engine:
point evidence is imposed by conditioning the disturbance vector directly
and box evidence by rejection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError, RejectionBudgetExceeded, SingularEvidenceCovariance
from .graph import descendants


@dataclass(frozen=True)
class SimConfig:
    n_draws: int = 1_000_000
    seed: int = 0
    max_rejection_ratio: float = 1e4
    batch_size: int = 1 << 18

    def __post_init__(self):
        if self.n_draws < 1:
            raise ModelError("n_draws must be positive")
        if self.max_rejection_ratio <= 0:
            raise ModelError("max_rejection_ratio must be positive")


@dataclass(frozen=True)
class MCResult:
    """Empirical moments of the counterfactual response.

    ``cross_cov[k]`` estimates ``Cov(Y*, W_k*)`` with standard error
    ``se_cross_cov[k]``; ``corr`` is the matching correlation.
    """

    y_mean: float
    y_var: float
    se_mean: float
    se_var: float
    cross_cov: np.ndarray
    se_cross_cov: np.ndarray
    corr: np.ndarray
    acceptance_rate: float
    se_acceptance: float
    n_accepted: int
    n_proposed: int


def _sqrt_psd(S):
    w, V = np.linalg.eigh((S + S.T) / 2)
    return V * np.sqrt(np.clip(w, 0.0, None))


def _propagate(model, eps, order, override=None):
    """Solve the structural equations row-wise; ``override`` maps a vertex to
    a function of the partially filled sample matrix."""
    G = model.diagram
    A = model.coefficient_matrix
    V = np.zeros_like(eps)
    for v in order:
        i = G.index(v)
        if override and v in override:
            V[:, i] = override[v](V)
            continue
        col = eps[:, i].copy()
        for p in G.parents(v):
            j = G.index(p)
            col += A[i, j] * V[:, j]
        V[:, i] = col
    return V


def simulate_joint(model, cfg: SimConfig = SimConfig()) -> np.ndarray:
    """``n_draws x |V|`` samples of the actual world, columns in vertex order."""
    rng = np.random.default_rng(cfg.seed)
    eps = model.disturbance_mean + rng.standard_normal((cfg.n_draws, len(model.vertices))) @ _sqrt_psd(
        model.disturbance_cov).T
    return _propagate(model, eps, model.diagram.topological_order)


def _disturbance_law(model, point):
    """Mean and square root of the disturbance covariance given ``R = r``."""
    mu = np.asarray(model.disturbance_mean, float)
    S = np.asarray(model.disturbance_cov, float)
    if not point:
        return mu, _sqrt_psd(S)
    G = model.diagram
    # V = M eps with M = (I - A)^{-1}; solve instead of substituting.
    M = np.linalg.inv(np.eye(len(G)) - model.coefficient_matrix)
    rows = M[[G.index(v) for v in point]]
    r = np.array(list(point.values()), float)
    S_rr = rows @ S @ rows.T
    P = np.linalg.pinv(S_rr, rcond=1e-10, hermitian=True)
    resid = r - rows @ mu
    if np.linalg.norm(S_rr @ P @ resid - resid) > 1e-8 * max(1.0, np.max(np.abs(r))):
        raise SingularEvidenceCovariance("point evidence lies off the support of the model")
    K = S @ rows.T @ P
    return mu + K @ resid, _sqrt_psd(S - K @ rows @ S)


def _plan_order(G, x, w):
    """Topological order for the counterfactual world where X depends on W."""
    parents = {v: set(G.parents(v)) for v in G.vertices}
    parents[x] = set(w)
    order, done = [], set()
    pending = list(G.vertices)
    while pending:
        for v in pending:
            if parents[v] <= done:
                order.append(v)
                done.add(v)
                pending.remove(v)
                break
        else:
            raise ModelError("plan covariates create a cycle")
    return order


def mc_counterfactual(model, evidence, plan, y, cfg: SimConfig = SimConfig()) -> MCResult:
    """Empirical counterfactual moments of ``y`` under ``plan``.

    ``evidence`` may be ``None`` or an object with ``point`` and ``box``
    mappings (see :class:`semcf.conditioning.Evidence`).
    """
    G = model.diagram
    x, w, a = plan.x, list(plan.w), np.asarray(plan.a, float)
    desc = descendants(G, x) | {x}
    if set(w) & desc:
        raise ModelError("plan covariates must be nondescendants of the treatment")
    point = dict(getattr(evidence, "point", {}) or {})
    box = {}
    for k, (lo, hi) in dict(getattr(evidence, "box", {}) or {}).items():
        if lo == hi:
            point[k] = lo
        else:
            box[k] = (lo, hi)

    mu, root = _disturbance_law(model, point)
    n_vars = len(G)
    rng = np.random.default_rng(cfg.seed)
    box_idx = np.array([G.index(v) for v in box], dtype=int)
    lo = np.array([b[0] for b in box.values()])
    hi = np.array([b[1] for b in box.values()])
    topo = G.topological_order

    kept, n_kept, n_prop = [], 0, 0
    pilot = max(cfg.batch_size, 65536)
    while n_kept < cfg.n_draws:
        size = cfg.n_draws - n_kept if not box else max(pilot, cfg.batch_size)
        eps = mu + rng.standard_normal((size, n_vars)) @ root.T
        n_prop += size
        if box:
            V = _propagate(model, eps, topo)
            ok = np.all((V[:, box_idx] >= lo) & (V[:, box_idx] <= hi), axis=1)
            eps = eps[ok]
            n_acc = n_kept + len(eps)
            if n_acc < n_prop / cfg.max_rejection_ratio or n_prop > cfg.n_draws * cfg.max_rejection_ratio:
                raise RejectionBudgetExceeded(
                    f"acceptance rate {n_acc / n_prop:.3g} is below 1/{cfg.max_rejection_ratio:g}"
                )
        kept.append(eps)
        n_kept += len(eps)
    eps = np.concatenate(kept)[: cfg.n_draws]
    n_acc_total = n_kept

    w_idx = [G.index(v) for v in w]
    override = {x: lambda V: plan.x0 + V[:, w_idx] @ a if w_idx else np.full(len(V), plan.x0)}
    V_star = _propagate(model, eps, _plan_order(G, x, w), override)

    n = len(eps)
    ys = V_star[:, G.index(y)]
    y_mean = ys.mean()
    yc = ys - y_mean
    m2 = np.mean(yc ** 2)
    m4 = np.mean(yc ** 4)
    y_var = m2 * n / (n - 1) if n > 1 else 0.0
    se_mean = np.sqrt(m2 / n)
    se_var = np.sqrt(max(m4 - m2 ** 2, 0.0) / n)

    if w_idx:
        Wc = V_star[:, w_idx] - V_star[:, w_idx].mean(0)
        prod = yc[:, None] * Wc
        cross = prod.mean(0)
        se_cross = prod.std(0) / np.sqrt(n)
        sd_w = Wc.std(0)
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = cross / (np.sqrt(m2) * sd_w)
    else:
        cross = se_cross = corr = np.zeros(0)

    rate = n_acc_total / n_prop
    return MCResult(
        y_mean=float(y_mean), y_var=float(y_var), se_mean=float(se_mean), se_var=float(se_var),
        cross_cov=cross, se_cross_cov=se_cross, corr=corr,
        acceptance_rate=float(rate), se_acceptance=float(np.sqrt(rate * (1 - rate) / n_prop)),
        n_accepted=int(n_acc_total), n_proposed=int(n_prop),
    )
