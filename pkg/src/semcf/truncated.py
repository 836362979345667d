"""Moments of a multivariate normal restricted to an axis-aligned box.

Method ladder by the number of constrained coordinates:

* 1: closed form,
* 2-3: adaptive quadrature over the sequential (Cholesky) factorisation,
  with the innermost coordinate integrated in closed form and the outer
  ones clipped to +-12 standard deviations,
* 4+: randomised quasi-Monte Carlo with separation of variables (Genz).

Coordinates with two infinite bounds are not integrated; they are carried
along by the regression law at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import NumericalTargetMissed, SingularEvidenceCovariance, ZeroMassBox

ZERO_MASS = 1e-12
CUT = 12.0
_SQRT2PI = np.sqrt(2.0 * np.pi)


def _pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT2PI


def _xpdf(x):
    # x * phi(x), zero at +-inf
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        out = x * _pdf(x)
    return np.where(np.isfinite(x), out, 0.0)


def _interval_prob(lo, hi):
    # Phi(hi) - Phi(lo) without losing the upper tail
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    upper = lo > 0
    return np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


def _std_moments(lo, hi):
    """Integrals of 1, x, x^2 against the standard normal density on [lo, hi]."""
    p = _interval_prob(lo, hi)
    m1 = _pdf(lo) - _pdf(hi)
    m2 = p + _xpdf(lo) - _xpdf(hi)
    return p, m1, m2


@dataclass(frozen=True)
class BoxMoments:
    """Moments of a Gaussian restricted to a box.

    ``mean_error`` and ``cov_error`` are absolute error bounds for quadrature
    and standard errors for Monte Carlo (``method == "qmc"``).
    """

    variables: tuple
    mean: np.ndarray
    cov: np.ndarray
    mass: float
    mean_error: np.ndarray
    cov_error: np.ndarray
    method: str

    @property
    def error_estimate(self) -> float:
        errs = [0.0]
        if self.mean_error.size:
            errs.append(float(np.max(self.mean_error)))
        if self.cov_error.size:
            errs.append(float(np.max(self.cov_error)))
        return max(errs)


def truncated_normal_1d(mu, var, lo, hi):
    """Mass, mean and variance of ``N(mu, var)`` restricted to ``[lo, hi]``.

    >>> mass, m, v = truncated_normal_1d(0.0, 1.0, 0.0, np.inf)
    >>> round(mass, 6), round(m, 6), round(v, 6)
    (0.5, 0.797885, 0.36338)
    """
    sd = np.sqrt(var)
    a, b = (lo - mu) / sd, (hi - mu) / sd
    p, m1, m2 = _std_moments(a, b)
    p = float(p)
    if p < ZERO_MASS:
        raise ZeroMassBox(f"box [{lo}, {hi}] has probability {p:.3g}")
    e1 = float(m1) / p
    e2 = float(m2) / p
    return p, float(mu + sd * e1), float(var * max(e2 - e1 * e1, 0.0))


def _clip(a, b):
    """Clip an interval to [-CUT, CUT]; beyond that the weight is below 1e-32."""
    return max(a, -CUT), min(b, CUT)


def _moment_vector(xi, p, m1, m2):
    """Pack mass, E[xi p], E[xi xi' p] for outer coordinates ``xi`` and a
    closed-form last coordinate with integrals (p, m1, m2)."""
    k = len(xi)
    d = k + 1
    first = np.empty(d)
    first[:k] = xi * p
    first[k] = m1
    second = np.empty((d, d))
    second[:k, :k] = np.outer(xi, xi) * p
    second[:k, k] = second[k, :k] = xi * m1
    second[k, k] = m2
    iu = np.triu_indices(d)
    return np.concatenate(([p], first, second[iu]))


def _quadrature_moments(L, lo, hi, tol, limit):
    """Integrals of 1, xi, xi xi' over {lo <= L xi <= hi}, xi standard normal.

    Returns the packed vector and an absolute error estimate.
    """
    d = L.shape[0]
    inner_err = [0.0]

    def bounds(k, xi):
        shift = L[k, :k] @ xi
        return (lo[k] - shift) / L[k, k], (hi[k] - shift) / L[k, k]

    def integrand(k, xi):
        a, b = bounds(k, xi)
        if k == d - 1:
            p, m1, m2 = _std_moments(a, b)
            return _moment_vector(xi, float(p), float(m1), float(m2))
        a, b = _clip(a, b)
        if b <= a:
            return np.zeros(1 + d + d * (d + 1) // 2)

        def f(x):
            return _pdf(x) * integrand(k + 1, np.append(xi, x))

        val, err = integrate.quad_vec(
            f, a, b, epsabs=tol / 10, epsrel=1e-12, norm="max", limit=limit
        )
        inner_err[0] = max(inner_err[0], err)
        return val

    a, b = _clip(lo[0] / L[0, 0], hi[0] / L[0, 0])
    if b <= a:
        return np.zeros(1 + d + d * (d + 1) // 2), 0.0

    def outer(x):
        return _pdf(x) * integrand(1, np.array([x]))

    val, err, info = integrate.quad_vec(
        outer, a, b, epsabs=tol / 10, epsrel=1e-12, norm="max", limit=limit,
        full_output=True,
    )
    if not info.success:
        raise NumericalTargetMissed(
            f"quadrature did not converge within {limit} subintervals (error {err:.3g})"
        )
    # Inner errors are per unit of outer weight, which integrates to at most 1.
    return val, err + inner_err[0]


def _unpack(vec, d):
    p = vec[0]
    first = vec[1:1 + d]
    second = np.zeros((d, d))
    second[np.triu_indices(d)] = vec[1 + d:]
    second = second + np.triu(second, 1).T
    return p, first, second


def _qmc_moments(L, lo, hi, n_points, seed, replicates=8):
    """Randomised QMC by separation of variables.

    Returns the packed vector (mean over replicates of the normalised
    moments, mass first) and its per-entry standard error.
    """
    d = L.shape[0]
    m = max(int(round(np.log2(max(n_points // replicates, 2)))), 1)
    ss = np.random.SeedSequence(seed)
    estimates = []
    for child in ss.spawn(replicates):
        u = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(child)).random_base2(m)
        n = u.shape[0]
        xi = np.zeros((n, d))
        w = np.ones(n)
        for k in range(d):
            shift = xi[:, :k] @ L[k, :k]
            a = (lo[k] - shift) / L[k, k]
            b = (hi[k] - shift) / L[k, k]
            pa, pb = ndtr(a), ndtr(b)
            w = w * np.maximum(pb - pa, 0.0)
            q = np.clip(pa + u[:, k] * (pb - pa), 1e-300, 1 - 1e-16)
            xi[:, k] = np.clip(ndtri(q), a, b)
        mass = w.mean()
        if mass <= 0:
            estimates.append(np.zeros(1 + d + d * (d + 1) // 2))
            continue
        first = (xi * w[:, None]).mean(0) / mass
        second = np.einsum("ni,nj,n->ij", xi, xi, w) / n / mass
        estimates.append(np.concatenate(([mass], first, second[np.triu_indices(d)])))
    est = np.array(estimates)
    return est.mean(0), est.std(0, ddof=1) / np.sqrt(replicates)


def box_moments_std(mu, cov, lo, hi, *, tol=1e-8, n_mc=200_000, seed=0, limit=2000):
    """Truncated moments for box coordinates that all have a finite bound.

    Returns ``(mass, mean, cov, mean_err, cov_err, method)``.
    """
    mu = np.asarray(mu, float)
    cov = np.asarray(cov, float)
    lo = np.asarray(lo, float) - mu
    hi = np.asarray(hi, float) - mu
    d = len(mu)
    if d == 1:
        p, m, v = truncated_normal_1d(0.0, cov[0, 0], lo[0], hi[0])
        return (p, mu + m, np.array([[v]]), np.zeros(1), np.zeros((1, 1)), "closed_form")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularEvidenceCovariance("box variables have a singular covariance matrix") from None
    if np.min(np.diag(L)) <= 1e-10 * np.sqrt(np.max(np.diag(cov))):
        raise SingularEvidenceCovariance("box variables have a singular covariance matrix")

    if d <= 3:
        vec, err = _quadrature_moments(L, lo, hi, tol, limit)
        p, first, second = _unpack(vec, d)
        if p < ZERO_MASS:
            raise ZeroMassBox(f"box has probability {p:.3g}")
        e1 = first / p
        c = second / p - np.outer(e1, e1)
        # Ratio error: |d(I/p)| <= (err + |I/p| err) / p
        mean_xi_err = err * (1 + np.abs(e1)) / p
        cov_xi_err = (err * (1 + np.abs(second / p)) / p
                      + np.add.outer(np.abs(e1), np.abs(e1)) * np.max(mean_xi_err))
        method = "quadrature"
    else:
        vec, se = _qmc_moments(L, lo, hi, n_mc, seed)
        p = vec[0]
        if p < ZERO_MASS:
            raise ZeroMassBox(f"box has probability {p:.3g}")
        _, e1, second = _unpack(vec, d)
        c = second - np.outer(e1, e1)
        _, mean_xi_err, second_err = _unpack(se, d)
        cov_xi_err = second_err + np.add.outer(np.abs(e1), np.abs(e1)) * np.max(mean_xi_err)
        err = se[0]
        method = "qmc"

    mean = mu + L @ e1
    out_cov = L @ c @ L.T
    out_cov = (out_cov + out_cov.T) / 2
    absL = np.abs(L)
    return (float(p), mean, out_cov, absL @ mean_xi_err,
            absL @ cov_xi_err @ absL.T, method)
