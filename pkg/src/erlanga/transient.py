"""Laplace transforms of the transient queue-length distribution.

All formulas work in normalized units (``mu = 1``).  A
:class:`TransformHandle` wraps a normalized evaluator and applies the time
rescaling ``t -> mu t`` at the boundary, so callers use physical units.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import BranchAmbiguityError, ParameterError
from .model import ModelParams
from .scalar import ComplexScalar, log_gamma
from .special import F, G_scaled, H, I

__all__ = [
    "TransformHandle", "phat", "phat_mm_inf", "p_mm_inf_closed", "p_mm_inf_spectral",
    "phat_mmm", "mmm_roots", "phat_loss", "blocking_transform", "jagerman_blocking",
    "busy_transform",
]


@dataclass(frozen=True)
class TransformHandle:
    """A Laplace transform as a callable of complex ``theta``.

    Parameters
    ----------
    evaluator : callable
        Maps a normalized ``theta`` (time unit ``1/mu``) to a complex value or
        an array of values (one per target state).
    abscissa : float
        All singularities lie in ``Re theta <= abscissa``.
    label : str
        Which formula produced the transform.
    mu : float
        Service rate used to convert to physical time.
    density : bool
        True for transforms of functions of time (scaled by ``1/mu``), False
        for Laplace-Stieltjes transforms of distributions (unscaled).
    """

    evaluator: Callable[[complex], complex | np.ndarray]
    abscissa: float = 0.0
    label: str = ""
    mu: float = 1.0
    density: bool = True
    meta: dict = field(default_factory=dict)

    def __call__(self, theta: complex):
        v = self.evaluator(complex(theta) / self.mu)
        return v / self.mu if self.density else v


def _log_fact(n: int) -> float:
    return math.lgamma(n + 1)


def _check_states(*ns):
    for n in ns:
        if int(n) != n or n < 0:
            raise ParameterError(f"states must be non-negative integers, got {n}")


class _Shared:
    """Per-theta quantities common to every target state (cached)."""

    def __init__(self, params: ModelParams):
        self.p = params
        self.at = lru_cache(maxsize=4096)(self._compute)

    def _compute(self, theta: complex):
        p, rho, m = self.p, self.p.rho, self.p.m
        Fm, Fm1 = F(m, theta, rho), F(m - 1, theta, rho)
        Hm, Hm1 = H(m, theta, p), H(m - 1, theta, p)
        D = Fm * Hm1 - Hm * Fm1
        return {"Fm": Fm, "Fm1": Fm1, "Hm": Hm, "Hm1": Hm1, "D": D}

    def lower_ratio(self, theta):
        """(H_m G_{m-1} - G_m H_{m-1}) / D with scaled G (see G_scaled)."""
        s = self.at(theta)
        if "R" not in s:
            rho, m = self.p.rho, self.p.m
            s["R"] = (s["Hm"] * G_scaled(m - 1, theta, rho) - G_scaled(m, theta, rho) * s["Hm1"]) / s["D"]
        return s["R"]

    def upper_ratio(self, theta):
        """(I_m F_{m-1} - I_{m-1} F_m) / D, the H-to-I mixing coefficient."""
        s = self.at(theta)
        if "r" not in s:
            p, m = self.p, self.p.m
            s["r"] = (I(m, theta, p) * s["Fm1"] - I(m - 1, theta, p) * s["Fm"]) / s["D"]
        return s["r"]


def _lower_prefactor(rho: float, n0: int) -> ComplexScalar:
    """n0! rho^-n0; the remaining Gamma(theta) e^-rho rho^-theta lives in G_scaled."""
    return ComplexScalar.from_log(_log_fact(n0) - n0 * math.log(rho))


def _upper_prefactor(params: ModelParams, n0: int, theta: complex) -> ComplexScalar:
    """(1/rho) e^-(rho/eta) (eta/rho)^(n0-m-1+(theta+m)/eta) Gamma(theta/eta) Gamma(n0-m+1+m/eta)."""
    rho, m, eta = params.rho, params.m, params.eta_n
    return ComplexScalar.from_log(
        -math.log(rho) - rho / eta + (n0 - m - 1 + (theta + m) / eta) * math.log(eta / rho)
        + log_gamma(theta / eta) + math.lgamma(n0 - m + 1 + m / eta))


def _phat_values(params: ModelParams, shared: _Shared, n0: int, ns: Sequence[int],
                 theta: complex) -> np.ndarray:
    rho, m = params.rho, params.m
    s = shared.at(theta)
    D = s["D"]
    out = np.empty(len(ns), dtype=complex)
    if n0 == m:
        for i, n in enumerate(ns):
            v = s["Fm"] * H(n, theta, params) if n >= m else s["Hm"] * F(n, theta, rho)
            out[i] = (v / (D * rho)).value
        return out
    if n0 < m:
        F0 = F(n0, theta, rho)
        pre_hi = ComplexScalar.from_log(_log_fact(n0) - _log_fact(m) + (m - n0 - 1) * math.log(rho))
        pre_lo = _lower_prefactor(rho, n0)
        for i, n in enumerate(ns):
            if n >= m:
                v = pre_hi * F0 * H(n, theta, params) / D
            else:
                R = shared.lower_ratio(theta)
                if n >= n0:
                    v = pre_lo * F0 * (G_scaled(n, theta, rho) + R * F(n, theta, rho))
                else:
                    v = pre_lo * F(n, theta, rho) * (G_scaled(n0, theta, rho) + R * F0)
            out[i] = v.value
        return out
    eta = params.eta_n
    H0 = H(n0, theta, params)
    pre = _upper_prefactor(params, n0, theta)
    pre_lo = ComplexScalar.from_log(
        -math.log(rho) + (m - n0) * math.log(rho / eta)
        + math.lgamma(n0 - m + 1 + m / eta) - math.lgamma(1 + m / eta))
    for i, n in enumerate(ns):
        if n <= m:
            v = pre_lo * H0 * F(n, theta, rho) / D
        else:
            r = shared.upper_ratio(theta)
            if n >= n0:
                v = pre * (I(n0, theta, params) + r * H0) * H(n, theta, params)
            else:
                v = pre * (I(n, theta, params) + r * H(n, theta, params)) * H0
        out[i] = v.value
    return out


def phat(params: ModelParams, n0: int, n) -> TransformHandle:
    """Transform of p_n(t) = P[N(t) = n | N(0) = n0] for the M/M/m+M queue.

    ``n`` may be a single state or a sequence of states; the handle then
    returns an array.  Requires ``eta > 0``; ``eta = 0`` is routed to
    :func:`phat_mmm`.
    """
    if params.eta_n == 0:
        return phat_mmm(params, n0, n)
    scalar = np.ndim(n) == 0
    ns = [int(n)] if scalar else [int(k) for k in n]
    _check_states(n0, *ns)
    shared = _Shared(params)
    if n0 == params.m:
        label = "all-servers-busy start"
    else:
        label = "start below m" if n0 < params.m else "start above m"

    def ev(theta):
        v = _phat_values(params, shared, n0, ns, theta)
        return v[0] if scalar else v
    return TransformHandle(ev, 0.0, label, params.mu, True, {"n0": n0, "n": n})


# ---------------------------------------------------------------------------
# M/M/infinity (unit abandonment rate)
# ---------------------------------------------------------------------------

def phat_mm_inf(rho: float, n0: int, n, mu: float = 1.0) -> TransformHandle:
    """Transform when waiting customers leave at the service rate (M/M/inf)."""
    scalar = np.ndim(n) == 0
    ns = [int(n)] if scalar else [int(k) for k in n]
    _check_states(n0, *ns)

    def ev(theta):
        pre = _lower_prefactor(rho, n0)
        F0, G0 = F(n0, theta, rho), G_scaled(n0, theta, rho)
        v = np.array([(pre * (F0 * G_scaled(k, theta, rho) if k >= n0 else G0 * F(k, theta, rho))).value
                      for k in ns])
        return v[0] if scalar else v
    return TransformHandle(ev, 0.0, "M/M/inf", mu, True, {"n0": n0, "n": n})


def p_mm_inf_closed(rho: float, n0: int, n: int, t: float) -> float:
    """p_n(t) for the M/M/inf queue as a finite binomial sum (normalized time)."""
    _check_states(n0, n)
    if t < 0:
        raise ParameterError("t must be >= 0")
    if t == 0:
        return float(n == n0)
    q = -math.expm1(-t)
    lq = math.log(q)
    logs = [math.lgamma(n0 + 1) - math.lgamma(j + 1) - math.lgamma(n0 - j + 1)
            + (n - j) * math.log(rho) - j * t + (n + n0 - 2 * j) * lq - math.lgamma(n - j + 1)
            for j in range(min(n, n0) + 1)]
    return math.fsum(math.exp(x - rho * q) for x in logs)


def _F_neg(n: int, k: int, rho: float) -> float:
    """F_n(-k) = sum_j C(k, j) (-1)^j rho^(n-j) / (n-j)!."""
    return math.fsum((-1) ** j * math.comb(k, j) * rho ** (n - j) / math.factorial(n - j)
                     for j in range(min(k, n) + 1))


def p_mm_inf_spectral(rho: float, n0: int, n: int, t: float, tol: float = 1e-16) -> float:
    """p_n(t) for the M/M/inf queue from its eigenfunction expansion."""
    _check_states(n0, n)
    if t < 0:
        raise ParameterError("t must be >= 0")
    scale = math.factorial(n0) * math.exp(-rho) / rho ** n0
    terms, k, peak = [], 0, 0.0
    while True:
        w = math.exp(k * math.log(rho) - math.lgamma(k + 1) - k * t) if k else 1.0
        term = scale * w * _F_neg(n0, k, rho) * _F_neg(n, k, rho)
        terms.append(term)
        peak = max(peak, abs(term))
        # past the peak of rho^k/k! and below tolerance for several terms
        if k > rho + n + n0 + 5 and all(abs(x) < tol * max(peak, 1e-300) for x in terms[-3:]):
            break
        if abs(term) < tol and k > rho + n + n0 + 40:
            break
        k += 1
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# M/M/m (no abandonment)
# ---------------------------------------------------------------------------

def mmm_roots(rho: float, m: int, theta: complex):
    """A, B and S = sqrt((m+rho+theta)^2 - 4 m rho) with |A| <= |B|."""
    disc = (m + rho + theta) ** 2 - 4 * m * rho
    disc = complex(disc)
    if disc.imag == 0 and disc.real < 0:
        raise BranchAmbiguityError(
            f"(m+rho+theta)^2 - 4 m rho = {disc.real} is a negative real at theta={theta}")
    S = cmath.sqrt(disc)
    A = (m + rho + theta - S) / (2 * m)
    B = (m + rho + theta + S) / (2 * m)
    return A, B, S


def _mmm_values(params: ModelParams, n0: int, ns, theta: complex) -> np.ndarray:
    rho, m = params.rho, params.m
    A, B, S = mmm_roots(rho, m, theta)
    Fm, Fm1p = F(m, theta, rho), F(m + 1, theta, rho)
    den_A = (m + 1) * Fm1p - A * m * Fm
    out = np.empty(len(ns), dtype=complex)
    logA, logB = cmath.log(A), cmath.log(B)
    if n0 <= m:
        F0 = F(n0, theta, rho)
        pre_lo = _lower_prefactor(rho, n0)
        ratio = None
        for i, n in enumerate(ns):
            if n >= m:
                v = (ComplexScalar.from_log(_log_fact(n0) - _log_fact(m) + (m - n0) * math.log(rho)
                                            + (n - m) * logA) * F0 / den_A)
            else:
                if ratio is None:
                    ratio = (m * A * G_scaled(m, theta, rho) - (m + 1) * G_scaled(m + 1, theta, rho)) / den_A
                if n >= n0:
                    v = pre_lo * (G_scaled(n, theta, rho) + ratio * F(n, theta, rho)) * F0
                else:
                    v = pre_lo * (G_scaled(n0, theta, rho) + ratio * F0) * F(n, theta, rho)
            out[i] = v.value
        return out
    mix = ((m + 1) * Fm1p - B * m * Fm) / (A * m * Fm - (m + 1) * Fm1p)
    for i, n in enumerate(ns):
        if n <= m:
            v = ComplexScalar.from_log((m - n0) * logB) * F(n, theta, rho) / den_A
        elif n <= n0:
            v = (ComplexScalar.from_log((n - n0) * logB)
                 + ComplexScalar.from_log((n - m) * logA + (m - n0) * logB) * mix) / S
        else:
            v = (ComplexScalar.from_log((n - n0) * logA)
                 + ComplexScalar.from_log((m - n0) * logB + (n - m) * logA) * mix) / S
        out[i] = v.value
    return out


def phat_mmm(params: ModelParams, n0: int, n) -> TransformHandle:
    """Transform of p_n(t) for the M/M/m queue (``eta = 0``)."""
    if params.eta_n != 0:
        raise ParameterError("phat_mmm requires eta = 0")
    scalar = np.ndim(n) == 0
    ns = [int(n)] if scalar else [int(k) for k in n]
    _check_states(n0, *ns)

    def ev(theta):
        v = _mmm_values(params, n0, ns, theta)
        return v[0] if scalar else v
    return TransformHandle(ev, 0.0, "M/M/m", params.mu, True, {"n0": n0, "n": n})


# ---------------------------------------------------------------------------
# Erlang loss limit (eta -> infinity)
# ---------------------------------------------------------------------------

def phat_loss(rho: float, m: int, n0: int, n, mu: float = 1.0) -> TransformHandle:
    """Transform of p_n(t) for the M/M/m/m loss system (limit of large eta)."""
    scalar = np.ndim(n) == 0
    ns = [int(n)] if scalar else [int(k) for k in n]
    _check_states(n0, *ns)
    if n0 > m or any(k > m for k in ns):
        raise ParameterError("loss system states are limited to 0..m")

    def ev(theta):
        pre = _lower_prefactor(rho, n0)
        Fm, Fm1p = F(m, theta, rho), F(m + 1, theta, rho)
        omega = ((m + 1) * G_scaled(m + 1, theta, rho) - rho * G_scaled(m, theta, rho)) / (rho * Fm - (m + 1) * Fm1p)
        F0, G0 = F(n0, theta, rho), G_scaled(n0, theta, rho)
        v = np.array([(pre * (F0 * (G_scaled(k, theta, rho) + omega * F(k, theta, rho)) if k >= n0
                              else F(k, theta, rho) * (G0 + omega * F0))).value for k in ns])
        return v[0] if scalar else v
    return TransformHandle(ev, 0.0, "M/M/m/m", mu, True, {"n0": n0, "n": n})


def blocking_transform(rho: float, m: int, n0: int, theta: complex, form: str = "gamma_sum") -> complex:
    """Transform of the blocking probability p_m(t) in the loss system.

    ``form`` selects ``"f_ratio"`` (F-function ratio), ``"shifted"`` (shifted
    argument ``theta F_m(theta+1)`` denominator) or ``"gamma_sum"`` (ratio of
    finite gamma sums).  All three are algebraically equal.
    """
    _check_states(n0)
    if n0 > m:
        raise ParameterError("n0 must be <= m in the loss system")
    pre = ComplexScalar.from_log(_log_fact(n0) - _log_fact(m) + (m - n0) * math.log(rho))
    if form == "f_ratio":
        den = (m + 1) * F(m + 1, theta, rho) - rho * F(m, theta, rho)
        return (pre * F(n0, theta, rho) / den).value
    if form == "shifted":
        return (pre * F(n0, theta, rho) / (theta * F(m, theta + 1, rho))).value
    if form == "gamma_sum":
        def gsum(k, shift):
            ell = np.arange(k + 1)
            logs = (gammaln(k + 1) - gammaln(ell + 1) - gammaln(k - ell + 1)
                    - ell * math.log(rho))
            return sum((ComplexScalar.from_log(x + log_gamma(theta + j + shift))
                        for j, x in enumerate(logs)), ComplexScalar.zero())
        return (gsum(n0, 0) / gsum(m, 1)).value
    raise ParameterError(f"unknown form {form!r}")


def jagerman_blocking(rho: float, m: int, theta: float) -> float:
    """Empty-start blocking transform Gamma(theta) / int_0^inf e^-x x^theta (1 + x/rho)^m dx."""
    if not theta > 0:
        raise ParameterError("the integral form is implemented for real theta > 0")
    # scale out the integrand's peak to keep quad well conditioned
    f = lambda x: math.exp(-x + theta * math.log(x) + m * math.log1p(x / rho) - ref) if x > 0 else 0.0
    xs = np.linspace(1e-6, 10 * (theta + m + 10), 2000)
    ref = max(-x + theta * math.log(x) + m * math.log1p(x / rho) for x in xs)
    peak = xs[np.argmax([-x + theta * math.log(x) + m * math.log1p(x / rho) for x in xs])]
    val = (integrate.quad(f, 0, peak, epsabs=0, epsrel=1e-13, limit=200)[0]
           + integrate.quad(f, peak, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0])
    return math.exp(math.lgamma(theta) - ref - math.log(val))


# ---------------------------------------------------------------------------
# all servers busy
# ---------------------------------------------------------------------------

def busy_transform(params: ModelParams, n0: int, formula: str | None = None) -> TransformHandle:
    """Transform of P[N(t) >= m | N(0) = n0] (needs ``eta > 0``).

    Two formulas exist, one for ``n0 <= m`` and one for ``n0 >= m``;
    ``formula="below"`` or ``"above"`` forces one of them, which is only
    valid at ``n0 = m`` for the other side.
    """
    if params.eta_n <= 0:
        raise ParameterError("busy_transform requires eta > 0")
    _check_states(n0)
    rho, m, eta = params.rho, params.m, params.eta_n
    shared = _Shared(params)

    def below(theta):
        s = shared.at(theta)
        pre = ComplexScalar.from_log(_log_fact(n0) - _log_fact(m) + (m - n0 - 1) * math.log(rho))
        return (pre * F(n0, theta, rho) * H(m - 1, theta + eta, params) / s["D"]).value

    def above(theta):
        th2 = theta + eta
        H0 = H(n0, theta, params)
        r = shared.upper_ratio(theta)
        inner = (H0 * (I(n0 - 1, th2, params) - I(m - 1, th2, params))
                 + I(n0, theta, params) * H(n0 - 1, th2, params)
                 + r * H0 * H(m - 1, th2, params))
        return (_upper_prefactor(params, n0, theta) * inner).value

    if formula is None:
        formula = "below" if n0 <= m else "above"
    if formula not in ("below", "above"):
        raise ParameterError(f"formula must be 'below' or 'above', got {formula!r}")
    if (formula == "below") != (n0 <= m) and n0 != m:
        raise ParameterError(f"the {formula} formula does not apply to n0={n0}, m={m}")
    ev = below if formula == "below" else above
    return TransformHandle(ev, 0.0, "all servers busy", params.mu, True, {"n0": n0})
