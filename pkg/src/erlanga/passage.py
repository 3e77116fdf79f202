"""First passage of the queue length to an upper level.

For a start state ``n`` and a level ``n_star > m`` the transforms
``E[exp(-theta tau)]`` of the hitting time ``tau`` are built from the same
special functions as the transient law.  Mean hitting times come from a
closed double sum, an equivalent form in ``H_n(0)``, and a direct linear
solve of the mean-value equations.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ParameterError
from .model import ModelParams, death_rates
from .scalar import ComplexScalar, cpow, log_gamma
from .special import F, H_zero, wronskian_W
from .transient import TransformHandle

__all__ = [
    "FptSpec", "qhat", "qhat_mm_inf", "qhat_mmm", "mean_fpt", "mean_fpt_recurrence",
    "substitution_R",
]


@dataclass(frozen=True)
class FptSpec:
    """Start state and target level of a first-passage problem."""

    start: int
    target: int

    def validate(self, m: int) -> None:
        if int(self.target) != self.target or self.target <= m:
            raise ParameterError(f"target level must be an integer above m = {m}, got {self.target}")
        if int(self.start) != self.start or not 0 <= self.start <= self.target:
            raise ParameterError(f"start state must lie in 0..{self.target}, got {self.start}")


def _cross(params: ModelParams, theta: complex, j: int, k: int) -> ComplexScalar:
    """H_j I_k - I_j H_k.

    Both products agree to O(theta) near zero, so the difference is stepped
    along the three-term recurrence in ``k`` from the closed-form value at
    ``k = j + 1`` instead.  The combination is dominated by ``I_k`` upwards
    and by ``H_k`` downwards, so the recursion is stable in either direction.
    """
    if j == k:
        return ComplexScalar.zero()
    if j > k:
        return -_cross(params, theta, k, j)
    rho, m, eta = params.rho, params.m, params.eta_n
    prev, cur = ComplexScalar.zero(), wronskian_W(j, theta, params)
    for i in range(j + 1, k):
        up, dg = m + (i - m + 1) * eta, rho + theta + m + (i - m) * eta
        prev, cur = cur, (dg * cur - rho * prev) / up
    return cur


def _upper_combo(params: ModelParams, theta: complex, n: int, Fm, Fm1) -> ComplexScalar:
    """(m+eta)(H_n I_{m+1} - I_n H_{m+1}) F_m + (m+1)(H_m I_n - H_n I_m) F_{m+1}."""
    m, eta = params.m, params.eta_n
    return ((m + eta) * _cross(params, theta, n, m + 1) * Fm
            + (m + 1) * _cross(params, theta, m, n) * Fm1)


def _qhat_value(params: ModelParams, n: int, n_star: int, theta: complex) -> complex:
    if n == n_star:
        return 1.0 + 0j
    rho, m, eta = params.rho, params.m, params.eta_n
    Fm, Fm1 = F(m, theta, rho), F(m + 1, theta, rho)
    den = _upper_combo(params, theta, n_star, Fm, Fm1)
    if n <= m:
        pref = ComplexScalar.from_log(
            (n_star - n) * math.log(rho) + math.lgamma(n + 1) - math.lgamma(m + 1)
            + (m - n_star + 1) * math.log(eta) + (m + theta) / eta * math.log(rho / eta)
            + rho / eta - log_gamma(theta / eta) - math.lgamma(n_star - m + 1 + m / eta))
        return (pref * F(n, theta, rho) / den).value
    pref = ComplexScalar.from_log(
        (n_star - n) * math.log(rho) + (n - n_star) * math.log(eta)
        + math.lgamma(n - m + 1 + m / eta) - math.lgamma(n_star - m + 1 + m / eta))
    return (pref * _upper_combo(params, theta, n, Fm, Fm1) / den).value


def qhat(params: ModelParams, spec: FptSpec) -> TransformHandle:
    """Laplace-Stieltjes transform of the time to reach ``spec.target``.

    Uses the F-form below the server count and the H/I-form at or above it.
    Requires ``eta > 0``; see :func:`qhat_mmm` for ``eta = 0``.
    """
    spec.validate(params.m)
    if params.eta_n <= 0:
        raise ParameterError("qhat requires eta > 0; use qhat_mmm for the M/M/m model")
    n, n_star = int(spec.start), int(spec.target)

    def ev(theta):
        return _qhat_value(params, n, n_star, theta)

    return TransformHandle(ev, 0.0, "fpt", params.mu, density=False,
                           meta={"start": n, "target": n_star})


def qhat_mm_inf(rho: float, n: int, n_star: int, mu: float = 1.0) -> TransformHandle:
    """Hitting-time transform for M/M/inf: (n!/n_star!) rho^(n_star-n) F_n / F_n_star."""
    if not 0 <= n <= n_star:
        raise ParameterError("need 0 <= n <= n_star")

    def ev(theta):
        if n == n_star:
            return 1.0 + 0j
        pref = ComplexScalar.from_log(math.lgamma(n + 1) - math.lgamma(n_star + 1)
                                      + (n_star - n) * math.log(rho))
        return (pref * F(n, theta, rho) / F(n_star, theta, rho)).value

    return TransformHandle(ev, 0.0, "fpt_mm_inf", mu, density=False,
                           meta={"start": n, "target": n_star})


def _mmm_roots_z(rho: float, m: int, theta: complex):
    """Z_(+/-) = [rho+theta+m +/- S] / (2 rho) with S = sqrt((rho+theta+m)^2 - 4 rho m).

    The transform is symmetric under swapping the roots, so the branch of S
    does not matter.
    """
    S = cmath.sqrt(complex((rho + theta + m) ** 2 - 4 * rho * m))
    return (rho + theta + m + S) / (2 * rho), (rho + theta + m - S) / (2 * rho), S


def _mmm_combo(rho, m, Fm, Fm1, Zp, Zm, k) -> ComplexScalar:
    """rho F_m (Z+ Z-^k - Z- Z+^k) + (m+1) F_{m+1} (Z+^k - Z-^k)."""
    pk, mk = cpow(Zp, k), cpow(Zm, k)
    return rho * Fm * (Zp * mk - Zm * pk) + (m + 1) * Fm1 * (pk - mk)


def qhat_mmm(params: ModelParams, spec: FptSpec) -> TransformHandle:
    """Hitting-time transform for the M/M/m model (no abandonment)."""
    spec.validate(params.m)
    rho, m = params.rho, params.m
    n, n_star = int(spec.start), int(spec.target)

    def ev(theta):
        if n == n_star:
            return 1.0 + 0j
        Zp, Zm, S = _mmm_roots_z(rho, m, theta)
        Fm, Fm1 = F(m, theta, rho), F(m + 1, theta, rho)
        den = _mmm_combo(rho, m, Fm, Fm1, Zp, Zm, n_star - m)
        if n <= m:
            pref = ComplexScalar.from_log((m - n) * math.log(rho) + math.lgamma(n + 1)
                                          - math.lgamma(m + 1))
            return (pref * S * F(n, theta, rho) / den).value
        return (_mmm_combo(rho, m, Fm, Fm1, Zp, Zm, n - m) / den).value

    return TransformHandle(ev, 0.0, "fpt_mmm", params.mu, density=False,
                           meta={"start": n, "target": n_star})


def _log_sum_m(rho: float, m: int) -> float:
    """log sum_{l=0}^m m!/l! rho^(l-m)."""
    ell = np.arange(m + 1)
    return float(logsumexp(gammaln(m + 1) - gammaln(ell + 1) + (ell - m) * math.log(rho)))


def _closed_increments(params: ModelParams, n_star: int) -> np.ndarray:
    """q_J - q_{J+1} for J = 0..n_star-1 from the closed double sums."""
    rho, m, eta = params.rho, params.m, params.eta_n
    d = np.empty(n_star)
    for j in range(m):
        ell = np.arange(j + 1)
        d[j] = math.exp(math.lgamma(j + 1) - j * math.log(rho)
                        + logsumexp((ell - 1) * math.log(rho) - gammaln(ell + 1)))
    lr, k = math.log(rho / eta), m / eta
    lsm = _log_sum_m(rho, m)
    for J in range(m, n_star):
        first = (m - J) * lr + math.lgamma(J - m + 1 + k) - math.lgamma(1 + k) + lsm
        ell = np.arange(m + 1, J + 1)
        rest = (ell - J) * lr + math.lgamma(J - m + 1 + k) - gammaln(ell - m + 1 + k)
        d[J] = math.exp(logsumexp(np.append(rest, first))) / rho
    return d


def mean_fpt(params: ModelParams, spec: FptSpec | int, form: str = "closed") -> np.ndarray:
    """Mean time to reach level ``n_star`` from every start 0..n_star.

    Parameters
    ----------
    params : ModelParams
        Requires ``eta > 0``.
    spec : FptSpec or int
        Only the target level is used.
    form : str
        ``"closed"`` evaluates the gamma-function double sums (the value at
        ``m`` first, stacked sums below it, a separate sum above it);
        ``"h"`` uses ratios of ``H_n(0)``.

    Returns
    -------
    ndarray
        ``q[n]`` for ``n = 0..n_star`` in physical time, ``q[n_star] = 0``.
    """
    n_star = spec.target if isinstance(spec, FptSpec) else int(spec)
    FptSpec(0, n_star).validate(params.m)
    if params.eta_n <= 0:
        raise ParameterError("closed-form mean needs eta > 0; use mean_fpt_recurrence")
    rho, m, eta = params.rho, params.m, params.eta_n
    q = np.zeros(n_star + 1)
    if form == "closed":
        d = _closed_increments(params, n_star)
        q[m] = d[m:].sum()
        # separate sum for n > m with (rho/eta)^m (eta/rho)^J Gamma(.) / Gamma(1 + m/eta)
        lr, k = math.log(rho / eta), m / eta
        lsm = _log_sum_m(rho, m)
        for n in range(m + 1, n_star):
            J = np.arange(n, n_star)
            tail = np.exp((m - J) * lr + gammaln(J - m + 1 + k) - math.lgamma(1 + k) + lsm).sum()
            inner = 0.0
            for Jv in J:
                ell = np.arange(m + 1, Jv + 1)
                inner += np.exp((ell - Jv) * lr + math.lgamma(Jv - m + 1 + k)
                                - gammaln(ell - m + 1 + k)).sum()
            q[n] = (inner + tail) / rho
    elif form == "h":
        h0 = np.array([H_zero(j, params).log_abs for j in range(m, n_star)])
        S = math.exp(_log_sum_m(rho, m))
        d = np.zeros(n_star)
        for J in range(m, n_star):
            ratios = np.exp(h0[1:J - m + 1] - h0[J - m]).sum()
            d[J] = (ratios + math.exp(h0[0] - h0[J - m]) * S) / rho
        for n in range(m, n_star):
            q[n] = d[n:].sum()
        d[:m] = _closed_increments(params, m + 1)[:m]
    else:
        raise ParameterError(f"unknown form {form!r}")
    for n in range(m - 1, -1, -1):
        q[n] = q[n + 1] + d[n]
    return q / params.mu


def mean_fpt_recurrence(params: ModelParams, spec: FptSpec | int) -> np.ndarray:
    """Mean hitting times from the mean-value equations, solved directly.

    ``rho (q_{n+1} - q_n) + mu_n (q_{n-1} - q_n) = -1`` for ``0 <= n < n_star``
    with ``q_{n_star} = 0``; works for any ``eta >= 0``.  The tridiagonal
    system is solved through the increments ``d_n = q_n - q_{n+1}``, which obey
    ``rho d_n = 1 + mu_n d_{n-1}``.  All terms are positive, so there is no
    cancellation even when the means are large.
    """
    n_star = spec.target if isinstance(spec, FptSpec) else int(spec)
    FptSpec(0, n_star).validate(params.m)
    rho = params.rho
    mu = death_rates(params, n_star)
    d = np.empty(n_star)
    prev = 0.0
    for n in range(n_star):
        prev = (1.0 + mu[n] * prev) / rho
        d[n] = prev
    q = np.append(np.cumsum(d[::-1])[::-1], 0.0)
    return q / params.mu


def substitution_R(params: ModelParams, n_star: int, theta: complex) -> list[ComplexScalar]:
    """R_n obtained from the hitting-time transforms by removing the rate weights.

    ``R_n = rho^n m!/n! Q_n`` for ``n <= m`` and
    ``R_n = rho^n eta^(m-n) Gamma(1+m/eta)/Gamma(n-m+1+m/eta) Q_n`` above,
    which turns the backward equations into the homogeneous lower and upper
    recurrences.
    """
    rho, m, eta = params.rho, params.m, params.eta_n
    out = []
    for n in range(n_star + 1):
        Q = _qhat_value(params, n, n_star, theta)
        if n <= m:
            w = n * math.log(rho) + math.lgamma(m + 1) - math.lgamma(n + 1)
        else:
            w = (n * math.log(rho) + (m - n) * math.log(eta)
                 + math.lgamma(1 + m / eta) - math.lgamma(n - m + 1 + m / eta))
        out.append(ComplexScalar.from_log(w) * Q)
    return out
