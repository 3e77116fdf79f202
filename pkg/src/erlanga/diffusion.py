"""Heavy-traffic (square-root staffing) limits of the hitting-time transforms.

With ``rho = m - beta sqrt(m)``, ``n = m + x sqrt(m)`` and
``n_star = m + b sqrt(m)``, the hitting-time transforms converge as
``m -> inf`` to expressions in parabolic cylinder functions ``D_p(z)``.
``D_p`` is evaluated here by quadrature of its vertical-line integral

    D_p(z) = sqrt(2 pi) e^{z^2/4} / (2 pi i) * int xi^p exp(-z xi + xi^2/2) d xi,

taken along ``Re xi = c > 0`` through the real part of the saddle point.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ParameterError
from .scalar import ComplexScalar, rgamma

__all__ = ["HwScaling", "pcf_D", "pcf_D_prime", "hw_fpt_mmm", "hw_fpt_erlang_a"]

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class HwScaling:
    """Scaled coordinates of the square-root staffing regime.

    Parameters
    ----------
    beta : float
        Slack, ``rho = m - beta sqrt(m)``.
    x : float
        Scaled start state ``(n - m) / sqrt(m)``.
    b : float
        Scaled target level ``(n_star - m) / sqrt(m)``, positive.
    """

    beta: float
    x: float
    b: float

    def __post_init__(self):
        if not (0 < self.b < math.inf):
            raise ParameterError("scaled target b must be positive and finite")
        if self.x > self.b:
            raise ParameterError("scaled start x must not exceed b")

    def integers(self, m: int) -> tuple[float, int, int]:
        """(rho, n, n_star) for ``m`` servers, states rounded to the nearest integer."""
        r = math.sqrt(m)
        return m - self.beta * r, int(round(m + self.x * r)), int(round(m + self.b * r))

    @classmethod
    def from_integers(cls, m: int, rho: float, n: int, n_star: int) -> HwScaling:
        r = math.sqrt(m)
        return cls((m - rho) / r, (n - m) / r, (n_star - m) / r)


def _saddle_abscissa(p: complex, z: float) -> float:
    disc = cmath.sqrt(z * z - 4 * p)
    c = max(((z + disc) / 2).real, ((z - disc) / 2).real)
    return max(c, 1e-3)


def pcf_D(p: complex, z: float, tol: float = 1e-13, max_nodes: int = 1 << 15) -> ComplexScalar:
    """Parabolic cylinder function ``D_p(z)`` for complex index and real argument.

    The vertical line is mapped by ``xi = c + i s sinh(u)`` and integrated
    with the trapezoid rule, doubling the node count until successive sums
    agree to ``tol`` relative to the sum of absolute values.
    """
    p, z = complex(p), float(z)
    if not (math.isfinite(z) and cmath.isfinite(p)):
        raise ParameterError("pcf_D needs finite index and argument")
    c = _saddle_abscissa(p, z)
    curv = abs(1 - p / (c * c))
    s = min(1.0, 1.0 / math.sqrt(curv))
    phi_c = p * cmath.log(c) - z * c + c * c / 2

    def logf(u):
        xi = c + 1j * s * np.sinh(u)
        return p * np.log(xi) - z * xi + xi * xi / 2 - phi_c + np.log(s * np.cosh(u))

    # |integrand| falls like exp(-y^2/2) |y|^Re p far out
    y_max = math.sqrt(c * c + 2 * (40 + max(p.real, 0) * math.log(10 + abs(p)) + abs(z) * c)) + 10
    U = math.asinh(y_max / s)
    N = 64
    prev = None
    while True:
        u = np.linspace(-U, U, 2 * N + 1)
        vals = np.exp(logf(u))
        h = u[1] - u[0]
        total = vals.sum() * h
        scale = np.abs(vals).sum() * h
        if prev is not None and abs(total - prev) <= tol * scale:
            break
        if 2 * N > max_nodes:
            raise AccuracyError(f"pcf_D({p}, {z}) quadrature did not converge",
                                best=total, estimate=abs(total - prev) / scale)
        prev = total
        N *= 2
    return ComplexScalar(total / (2 * math.pi)) * ComplexScalar.from_log(
        phi_c + z * z / 4 + _LOG_SQRT_2PI)


def pcf_D_prime(p: complex, z: float) -> ComplexScalar:
    """Derivative in ``z``: ``D'_p(z) = (z/2) D_p(z) - D_{p+1}(z)``."""
    return (z / 2) * pcf_D(p, z) - pcf_D(p + 1, z)


def _lam6(theta, x, beta, Dm, Dp1) -> ComplexScalar:
    """sqrt(beta^2+4 theta) cosh(x S/2) D_{-theta}(-beta) + sinh(x S/2)(2 D_{1-theta}(-beta) + beta D_{-theta}(-beta))."""
    S = cmath.sqrt(beta * beta + 4 * theta)
    return S * cmath.cosh(x * S / 2) * Dm + cmath.sinh(x * S / 2) * (2 * Dp1 + beta * Dm)


def _pick(piece, x):
    if piece is None:
        return "lower" if x <= 0 else "upper"
    if piece not in ("lower", "upper"):
        raise ParameterError(f"piece must be 'lower' or 'upper', got {piece!r}")
    return piece


def hw_fpt_mmm(scaling: HwScaling, theta: complex, piece: str | None = None) -> ComplexScalar:
    """Limit of the M/M/m hitting-time transform in scaled coordinates.

    Below the server count (``x <= 0``) the transform follows
    ``D_{-theta}(-beta-x)``; above it, a combination of exponentials in
    ``x``.  Both pieces carry the factor ``exp(beta (x - b) / 2)``.
    ``piece`` forces one branch formula (for checking smoothness at ``x = 0``).
    """
    beta, x, b = scaling.beta, scaling.x, scaling.b
    theta = complex(theta)
    piece = _pick(piece, x)
    if x == b and piece == "upper":
        return ComplexScalar(1.0)
    Dm, Dp1 = pcf_D(-theta, -beta), pcf_D(1 - theta, -beta)
    den = _lam6(theta, b, beta, Dm, Dp1)
    drift = ComplexScalar.from_log(beta * (x - b) / 2)
    if piece == "lower":
        S = cmath.sqrt(beta * beta + 4 * theta)
        return (ComplexScalar.from_log(x * x / 4) * drift * S
                * pcf_D(-theta, -beta - x) / den)
    return drift * _lam6(theta, x, beta, Dm, Dp1) / den


def _erlang_a_parts(beta, eta, theta):
    """Coefficients Lambda_1, Lambda_2 from matching value and slope at x = 0."""
    nu, r = -theta / eta, math.sqrt(eta)
    y0 = beta / r
    D0, D0p = pcf_D(-theta, -beta), pcf_D_prime(-theta, -beta)
    lam1 = -r * pcf_D_prime(nu, -y0) * D0 + pcf_D(nu, -y0) * D0p
    lam2 = -r * pcf_D_prime(nu, y0) * D0 - pcf_D(nu, y0) * D0p
    return lam1, lam2


def hw_fpt_erlang_a(scaling: HwScaling, eta: float, theta: complex,
                    piece: str | None = None) -> ComplexScalar:
    """Limit of the hitting-time transform with abandonment rate ``eta > 0``.

    Below the server count the solution is a multiple of
    ``exp(x^2/4 + beta x/2) D_{-theta}(-beta-x)``; above it, of
    ``exp(eta x^2/4 + beta x/2)`` times index ``-theta/eta`` functions of
    ``(beta + eta x)/sqrt(eta)``.  Value and slope match at ``x = 0``;
    ``piece`` forces one branch formula as in :func:`hw_fpt_mmm`.
    """
    if eta <= 0:
        raise ParameterError("eta must be positive")
    beta, x, b = scaling.beta, scaling.x, scaling.b
    theta = complex(theta)
    piece = _pick(piece, x)
    if x == b and piece == "upper":
        return ComplexScalar(1.0)
    nu, r = -theta / eta, math.sqrt(eta)
    lam1, lam2 = _erlang_a_parts(beta, eta, theta)
    yb = (beta + eta * b) / r
    den = pcf_D(nu, yb) * lam1 + pcf_D(nu, -yb) * lam2
    if piece == "lower":
        pref = ComplexScalar.from_log(beta * (x - b) / 2 + (x * x - eta * b * b) / 4
                                      + _LOG_SQRT_2PI + 0.5 * math.log(eta))
        return pref * pcf_D(-theta, -beta - x) * rgamma(theta / eta) / den
    y = (beta + eta * x) / r
    pref = ComplexScalar.from_log(beta * (x - b) / 2 + eta * (x * x - b * b) / 4)
    return pref * (pcf_D(nu, y) * lam1 + pcf_D(nu, -y) * lam2) / den
