"""Quick self-checks of the identities the library relies on.

Each check compares two independent routes to the same quantity and reports
the worst discrepancy against a tolerance.  :func:`run_checks` is what the
``validate`` command runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma

from .diffusion import HwScaling, hw_fpt_erlang_a, pcf_D, pcf_D_prime
from .inversion import InversionConfig, invert, invert_mean
from .model import ModelParams, death_rates, steady_state
from .oracle import OracleConfig, fpt_oracle, transform_oracle, transient_grid
from .passage import FptSpec, mean_fpt, mean_fpt_recurrence, qhat, qhat_mm_inf
from .scalar import cs_sum
from .special import F, G, H, I, wronskian_W, wronskian_Wtilde
from .transient import (blocking_transform, busy_transform, jagerman_blocking, p_mm_inf_closed,
                        p_mm_inf_spectral, phat, phat_loss, phat_mm_inf, phat_mmm)

__all__ = ["CheckResult", "CHECKS", "run_checks"]


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


def _rel(a, b) -> float:
    return float(abs(a - b) / max(abs(b), 1e-300))


_DRAWS = [(3, 0.4 + 1.0j, 1.3, 2.0, 2), (0, 2.0 - 3.0j, 5.0, 0.6, 3),
          (12, 1.1 + 0.2j, 0.7, 1.7, 1), (25, 4.0 + 4.0j, 8.0, 3.5, 6)]


def _wronskians() -> float:
    worst = 0.0
    for n, th, rho, eta, m in _DRAWS:
        p = ModelParams.normalized(rho, m, eta)
        w = H(n, th, p) * I(n + 1, th, p) - H(n + 1, th, p) * I(n, th, p)
        worst = max(worst, _rel(w.value, wronskian_W(n, th, p).value))
        wt = G(n, th, rho) * F(n + 1, th, rho) - G(n + 1, th, rho) * F(n, th, rho)
        worst = max(worst, _rel(wt.value, wronskian_Wtilde(n, th, rho).value))
    return worst


def _recurrences() -> float:
    worst = 0.0
    for n, th, rho, eta, m in _DRAWS:
        n = max(n, 1)
        p = ModelParams.normalized(rho, m, eta)
        for X in (lambda k: F(k, th, rho), lambda k: G(k, th, rho)):
            lo, mid, hi = (X(k).value for k in (n - 1, n, n + 1))
            terms = ((n + 1) * hi, rho * lo, (rho + th + n) * mid)
            worst = max(worst, abs(terms[0] + terms[1] - terms[2]) / max(map(abs, terms)))
        up, dg = m + (n - m + 1) * eta, rho + th + m + (n - m) * eta
        for X in (lambda k: H(k, th, p), lambda k: I(k, th, p)):
            lo, mid, hi = (X(k).value for k in (n - 1, n, n + 1))
            terms = (up * hi, rho * lo, dg * mid)
            worst = max(worst, abs(terms[0] + terms[1] - terms[2]) / max(map(abs, terms)))
    return worst


def _resolvent() -> float:
    worst = 0.0
    for rho, m, eta, n0 in ((0.8, 2, 0.5, 0), (3.0, 2, 1.7, 2), (1.5, 3, 0.4, 7)):
        p = ModelParams.normalized(rho, m, eta)
        theta = 0.7 + 1.1j
        ns = list(range(12))
        ref = transform_oracle(p, n0, theta)[ns]
        worst = max(worst, float(np.max(np.abs(phat(p, n0, ns)(theta) - ref)) / np.abs(ref).max()))
    p = ModelParams.normalized(1.5, 2, 0.0)
    ref = transform_oracle(p, 1, 0.5 + 0.5j, n_max=300)[:10]
    worst = max(worst, float(np.max(np.abs(phat_mmm(p, 1, list(range(10)))(0.5 + 0.5j) - ref))))
    return worst


def _mm_inf_round_trip() -> float:
    worst = 0.0
    ts = [0.1, 1.0, 5.0]
    for rho, n0 in ((0.5, 0), (4.0, 3)):
        res = invert(phat_mm_inf(rho, n0, list(range(16))), ts)
        ref = [[p_mm_inf_closed(rho, n0, n, t) for n in range(16)] for t in ts]
        worst = max(worst, float(np.max(np.abs(res.values - ref))))
    return worst


def _mm_inf_spectral() -> float:
    return max(abs(p_mm_inf_spectral(rho, 2, n, t) - p_mm_inf_closed(rho, 2, n, t))
               for rho in (0.5, 4.0) for n in range(12) for t in (0.1, 1.0, 5.0))


def _transient_oracle() -> float:
    p = ModelParams.normalized(2.4, 2, 2.0)
    ts = [0.5, 1.0, 2.0]
    ref, _ = transient_grid(p, 6, ts)
    res = invert(phat(p, 6, list(range(ref.shape[1]))), ts)
    return float(np.max(np.abs(res.values - ref)))


def _stationary_limit() -> float:
    p = ModelParams.normalized(1.6, 2, 0.5)
    ss = steady_state(p, 20).values
    theta = 1e-6
    got = theta * phat(p, 0, list(range(21)))(theta).real
    return float(np.max(np.abs(got - ss)) / ss.max())


def _detailed_balance() -> float:
    p = ModelParams.normalized(3.3, 3, 0.7)
    v = steady_state(p).values
    lhs, rhs = p.rho * v[:-1], death_rates(p, len(v) - 1)[1:] * v[1:]
    keep = lhs > 1e-280
    return float(np.max(np.abs(lhs - rhs)[keep] / lhs[keep]))


def _blocking() -> float:
    worst = 0.0
    for rho, m, theta in ((0.5, 2, 0.3), (2.0, 5, 1.0), (8.0, 10, 3.0)):
        ref = blocking_transform(rho, m, 0, theta)
        for v in (blocking_transform(rho, m, 0, theta, "f_ratio"),
                  blocking_transform(rho, m, 0, theta, "shifted"),
                  phat_loss(rho, m, 0, m)(theta), jagerman_blocking(rho, m, theta)):
            worst = max(worst, _rel(v, ref))
    return worst


def _busy() -> float:
    p = ModelParams.normalized(1.3, 3, 0.7)
    theta = 0.6 + 0.8j
    a = busy_transform(p, 3, "below")(theta)
    b = busy_transform(p, 3, "above")(theta)
    return _rel(a, b)


def _sum_identities() -> float:
    worst = 0.0
    rho, m, eta, n0 = 1.3, 3, 0.7, 7
    p = ModelParams.normalized(rho, m, eta)
    for theta in (0.5, 1.2 + 0.8j):
        th2 = theta + eta
        tail = cs_sum(H(n, theta, p) for n in range(m, m + 200))
        worst = max(worst, _rel(tail.value, H(m - 1, th2, p).value))
        s_i = cs_sum(I(n, theta, p) for n in range(m, n0))
        worst = max(worst, _rel(s_i.value, (I(n0 - 1, th2, p) - I(m - 1, th2, p)).value))
        s_h = cs_sum(H(n, theta, p) for n in range(m, n0))
        worst = max(worst, _rel(s_h.value, (H(m - 1, th2, p) - H(n0 - 1, th2, p)).value))
    return worst


def _boundary_identity() -> float:
    worst = 0.0
    for rho, theta in ((0.5, 0.3), (2.0, 1.0 + 2j)):
        lhs = G(1, theta, rho) - (rho + theta) * G(0, theta, rho)
        ref = -np.exp(rho + theta * math.log(rho)) / gamma(theta)
        worst = max(worst, _rel(lhs.value, ref))
    return worst


def _fpt() -> float:
    p = ModelParams.normalized(1.0, 2, 1.5)
    ts = [0.5, 1.0, 2.0, 4.0]
    res = invert(qhat(p, FptSpec(0, 6)), ts)
    _, dens = fpt_oracle(p, 0, 6, ts)
    return float(np.max(np.abs(res.values - dens)))


def _mean_fpt() -> float:
    p = ModelParams.normalized(1.0, 2, 0.5)
    a, b, c = mean_fpt(p, 6), mean_fpt(p, 6, form="h"), mean_fpt_recurrence(p, 6)
    return float(max(np.max(np.abs(a[:-1] - c[:-1]) / c[:-1]),
                     np.max(np.abs(b[:-1] - c[:-1]) / c[:-1])))


def _mean_derivative() -> float:
    p = ModelParams.normalized(1.0, 2, 0.5)
    q = mean_fpt(p, 6)
    return max(_rel(invert_mean(qhat(p, FptSpec(n, 6))), q[n]) for n in (0, 3, 5))


def _mm_inf_fpt() -> float:
    theta = 0.4 + 0.9j
    a = qhat_mm_inf(1.7, 1, 5)(theta)
    b = qhat(ModelParams.normalized(1.7, 2, 1.0), FptSpec(1, 5))(theta)
    return _rel(b, a)


def _pcf_wronskian() -> float:
    worst = 0.0
    for beta, eta, theta in ((0.5, 0.5, 1.0), (-1.0, 2.0, 0.3 + 1j)):
        nu, y = -theta / eta, beta / math.sqrt(eta)
        w = -(pcf_D(nu, y) * pcf_D_prime(nu, -y) + pcf_D(nu, -y) * pcf_D_prime(nu, y)).value
        worst = max(worst, _rel(w, math.sqrt(2 * math.pi) / gamma(theta / eta)))
    return worst


def _interface() -> float:
    s = HwScaling(0.8, 0.0, 1.2)
    lo = hw_fpt_erlang_a(s, 0.4, 0.7 + 0.6j, "lower").value
    hi = hw_fpt_erlang_a(s, 0.4, 0.7 + 0.6j, "upper").value
    return _rel(lo, hi)


def _euler_vs_gaver() -> float:
    f = phat_mm_inf(1.5, 0, list(range(8)))
    e = invert(f, [0.5, 1.0, 2.0])
    g = invert(f, [0.5, 1.0, 2.0], InversionConfig(method="gaver", strict=False))
    bound = 10 * np.maximum(e.errors, g.errors) + 1e-12
    return float(np.max(np.abs(e.values - g.values) / bound))


def _uniformization_vs_rk() -> float:
    p = ModelParams.normalized(2.2, 3, 0.6)
    u, _ = transient_grid(p, 2, [0.3, 1.5])
    r, _ = transient_grid(p, 2, [0.3, 1.5], OracleConfig(method="rk"))
    return float(np.max(np.abs(u - r)))


CHECKS: list[tuple[str, Callable[[], float], float]] = [
    ("wronskians", _wronskians, 1e-9),
    ("recurrences", _recurrences, 1e-9),
    ("transform_vs_resolvent", _resolvent, 1e-9),
    ("mm_inf_round_trip", _mm_inf_round_trip, 1e-8),
    ("mm_inf_spectral", _mm_inf_spectral, 1e-10),
    ("transient_vs_uniformization", _transient_oracle, 1e-6),
    ("stationary_limit", _stationary_limit, 1e-5),
    ("detailed_balance", _detailed_balance, 1e-12),
    ("blocking_forms", _blocking, 1e-10),
    ("busy_formulas_at_m", _busy, 1e-9),
    ("shift_sum_identities", _sum_identities, 1e-8),
    ("boundary_identity", _boundary_identity, 1e-9),
    ("fpt_density_vs_oracle", _fpt, 1e-6),
    ("mean_fpt_forms", _mean_fpt, 1e-12),
    ("mean_fpt_derivative", _mean_derivative, 1e-5),
    ("mm_inf_fpt_reduction", _mm_inf_fpt, 1e-9),
    ("pcf_wronskian", _pcf_wronskian, 1e-9),
    ("diffusion_interface", _interface, 1e-10),
    ("euler_vs_gaver", _euler_vs_gaver, 1.0),
    ("uniformization_vs_rk", _uniformization_vs_rk, 1e-8),
]


def run_checks(names=None) -> list[CheckResult]:
    """Run the named checks (all by default); a check that raises reports an infinite error."""
    out = []
    for name, fn, tol in CHECKS:
        if names and name not in names:
            continue
        try:
            err = float(fn())
        except Exception:  # a failing route is a failed check, not a crash
            err = math.inf
        out.append(CheckResult(name, err, tol))
    return out
