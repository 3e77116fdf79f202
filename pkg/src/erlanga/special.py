"""The four solutions F, G, H, I of the Erlang A difference equations.

All four are contour integrals of the form

    (1/2 pi i) * integral of exp(lam z) z**(-c) (z - 1)**(-a) dz

with ``lam = rho/eta``, ``c = n + 1 - m + m/eta`` and ``a = theta/eta``
(``eta = 1``, ``m`` arbitrary for F and G).  ``G`` and ``H`` use a Hankel
loop around the cut ``(-inf, 1]``; ``I`` uses a loop around ``(-inf, 0]``
with ``(1 - z)**(-a)`` cut along ``[1, inf)``.  ``F`` is a finite sum.

``G`` and ``H`` are evaluated by default from their convergent Kummer series
(obtained by expanding ``(1 - 1/z)**(-a)`` for ``|z| > 1``), with contour
quadrature available as an independent route.  ``I`` has no such series and
is always computed by quadrature.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import AccuracyError, ParameterError, PoleError
from .model import ModelParams
from .scalar import ComplexScalar, cpow, is_pole, log_gamma, rgamma

__all__ = [
    "ContourConfig", "F", "G", "G_scaled", "H", "I", "H_zero", "H_asymptotic", "I_asymptotic",
    "wronskian_W", "wronskian_Wtilde", "hankel_quad",
]


@dataclass(frozen=True)
class ContourConfig:
    """Quadrature settings for the Hankel-type contour integrals.

    Parameters
    ----------
    node_count : int
        Initial number of trapezoidal intervals.
    max_nodes : int
        Doubling stops here; non-agreement raises :class:`AccuracyError`.
    tol : float
        Relative agreement required between two successive node counts.
    decay : float
        Leftward scale of the contour in units of ``1/lam``; larger values make
        the integrand smaller at the truncated ends.
    mode : str
        ``"talbot"`` (smooth open contour through the saddle point) or
        ``"hug"`` (circle around the branch point plus two rays along the cut;
        only for I).
    """

    node_count: int = 400
    max_nodes: int = 12800
    tol: float = 1e-11
    decay: float = 2.0
    mode: str = "talbot"


DEFAULT_CONTOUR = ContourConfig()


def _check_theta(theta):
    theta = complex(theta)
    if not (math.isfinite(theta.real) and math.isfinite(theta.imag)):
        raise ParameterError(f"theta must be finite, got {theta}")
    return theta


# ---------------------------------------------------------------------------
# F: finite sum
# ---------------------------------------------------------------------------

def _log_poch_array(a: complex, k: np.ndarray) -> np.ndarray:
    """log (a)_k for k = 0..K by cumulative sums of log(a + j); exact zeros become -inf.

    Summing the factors avoids differencing two large log-gamma values, which
    would cost about |log Gamma(a)| ulps of relative accuracy.
    """
    f = a + np.arange(int(k[-1]), dtype=complex) if len(k) > 1 else np.zeros(0, dtype=complex)
    with np.errstate(divide="ignore"):
        logs = np.log(f)
    return np.concatenate([[0j], np.cumsum(logs)])[np.asarray(k, dtype=int)]


# sums losing more than this many e-folds to cancellation switch to quadrature
_CANCEL_LIMIT = 8.0


def _logsum(logs: np.ndarray) -> tuple[ComplexScalar, float]:
    """Sum exp(logs); also return the cancellation loss log(sum|t| / |sum t|)."""
    finite = np.isfinite(logs.real)
    if not finite.any():
        return ComplexScalar.zero(), 0.0
    logs = logs[finite]
    mx = logs.real.max()
    terms = np.exp(logs - mx)
    total = np.sum(terms)
    if total == 0:
        return ComplexScalar.zero(), math.inf
    loss = math.log(np.sum(np.abs(terms)) / abs(total))
    return ComplexScalar(total, mx), loss


def F(n: int, theta: complex, rho: float) -> ComplexScalar:
    """F_n(theta) = sum_l rho^(n-l)/(n-l)! (theta)_l / l!  (F_{-1} = 0)."""
    if n < -1:
        raise ParameterError("F_n requires n >= -1")
    if n == -1:
        return ComplexScalar.zero()
    theta = _check_theta(theta)
    ell = np.arange(n + 1)
    logs = ((n - ell) * math.log(rho) - special.gammaln(n - ell + 1)
            + _log_poch_array(theta, ell) - special.gammaln(ell + 1))
    val, loss = _logsum(logs)
    if loss > _CANCEL_LIMIT and not is_pole(theta):
        # F_n is the C2 integral with unit abandonment rate
        return hankel_quad(rho, n + 1, theta, "C2")
    return val


# ---------------------------------------------------------------------------
# Kummer series for the C1 integrals (G and H)
# ---------------------------------------------------------------------------

def _kmax(lam: float) -> int:
    return int(abs(lam) + 12 * math.sqrt(abs(lam) + 1) + 40)


def _c1_bracket(lam: float, c: complex, a: complex):
    """S = sum_k (a)_k / ((c+a)_k k!) lam^k and its cancellation loss.

    Then the C1 integral equals lam^(c+a-1) S / Gamma(c+a).  Returns None
    when ``c + a`` is a pole of the gamma function (the ratio form breaks).
    """
    if is_pole(c + a):
        return None
    kmax = _kmax(lam)
    while True:
        k = np.arange(kmax + 1)
        logs = (_log_poch_array(a, k) - _log_poch_array(c + a, k)
                - special.gammaln(k + 1) + k * math.log(lam))
        fin = logs.real[np.isfinite(logs.real)]
        tail = logs.real[-5:]
        if fin.size == 0 or (np.all(tail < fin.max() - 40) and np.all(np.diff(tail) < 0)):
            return _logsum(logs)
        kmax *= 2
        if kmax > 10**6:
            raise AccuracyError("Kummer series did not converge")


def _c1_series(lam: float, c: complex, a: complex) -> ComplexScalar:
    """sum_k (a)_k/k! lam^(c+a+k-1) / Gamma(c+a+k), or quadrature under cancellation."""
    if a == 0:
        return cpow(lam, c - 1) * rgamma(c)
    br = _c1_bracket(lam, c, a)
    if br is not None:
        val, loss = br
        if loss > _CANCEL_LIMIT:
            return hankel_quad(lam, c, a, "C1")
        return val * cpow(lam, c + a - 1) * rgamma(c + a)
    # c + a a non-positive integer: the leading 1/Gamma factors vanish termwise
    kmax = _kmax(lam)
    while True:
        k = np.arange(kmax + 1)
        arg = c + a + k
        poles = (arg.imag == 0) & (arg.real <= 0) & (arg.real == np.floor(arg.real))
        lg = np.where(poles, 0, special.loggamma(np.where(poles, 1.0, arg)))
        logs = (_log_poch_array(a, k) - special.gammaln(k + 1)
                + (arg - 1) * math.log(lam) - lg)
        logs = np.where(poles, complex(-math.inf, 0), logs)
        fin = logs.real[np.isfinite(logs.real)]
        if fin.size == 0:
            return ComplexScalar.zero()
        tail = logs.real[-5:]
        if np.all(tail < fin.max() - 40) and np.all(np.diff(tail) < 0):
            val, loss = _logsum(logs)
            if loss > _CANCEL_LIMIT:
                return hankel_quad(lam, c, a, "C1")
            return val
        kmax *= 2
        if kmax > 10**6:
            raise AccuracyError("Kummer series did not converge")


# ---------------------------------------------------------------------------
# Hankel contour quadrature
# ---------------------------------------------------------------------------

def _saddle_roots(lam, c, a):
    """Roots of lam z^2 - (lam + c + a) z + c = 0 (stationary points)."""
    b = lam + c + a
    d = cmath.sqrt(b * b - 4 * lam * c)
    return (b + d) / (2 * lam), (b - d) / (2 * lam)


def _talbot_nodes(x0, s, nu, N, odd_only=False):
    """Nodes phi_k = -pi + 2 pi k / N of the trapezoidal rule in the parameter."""
    k = np.arange(1, N, 2) if odd_only else np.arange(1, N)
    phi = -math.pi + 2 * math.pi * k / N
    centre = phi == 0
    phi = np.where(centre, 1.0, phi)
    sn = np.sin(phi)
    cot = np.cos(phi) / sn
    # phi cot(phi) -> 1 and cot(phi) - phi/sin^2(phi) -> 0 at phi = 0
    u = x0 + s * (np.where(centre, 1.0, phi * cot) - 1.0) + 1j * nu * s * np.where(centre, 0.0, phi)
    du = s * np.where(centre, 0.0, cot - phi / sn**2) + 1j * nu * s
    return u, du


# at the rounding floor: largest accepted floor-to-result ratio, and largest
# accepted change between successive estimates relative to the result
_FLOOR_ACCEPT = math.log(1e-4)
_FLOOR_STEP = math.log(1e-7)

# largest rotation of the C2 loop; the loop legs must keep Re z < 0
_MAX_TILT = 0.5 * math.pi - 0.05


class _HankelIntegrand:
    """Log of the integrand along a (possibly rotated) Talbot-type contour."""

    def __init__(self, lam, c, a, kind):
        self.lam, self.c, self.a, self.kind = lam, complex(c), complex(a), kind
        roots = _saddle_roots(lam, self.c, self.a)
        self.psi = 0.0
        if kind == "C2":
            good = [r for r in roots if abs(r) < 1 and abs(cmath.phase(r)) < 0.5 * math.pi]
            # keep a resolvable gap to the branch point at z = 1
            cap = 1.0 - min(0.05, 1.2 / math.sqrt(lam))
            if good:
                z = min(good, key=abs)
                # a steeply tilted saddle (large |Im a|) turns the loop towards
                # +-i infinity, where (1 - z)^-a supplies the decay
                tilt = min(max(cmath.phase(z), -_MAX_TILT), _MAX_TILT)
                self.x0, self.psi = min(abs(z), cap), -tilt
            elif (lam - self.c.real / 0.5 + self.a.real / 0.5) < 0:
                # no saddle on (0, 1) and the integrand still falls at z = 1/2:
                # cross as close to the branch point as allowed
                self.x0 = cap
            else:
                self.x0 = 0.5
        else:
            # z = x0 phi (cot phi + i), rotated through the outer saddle; |z| >= x0 > 1
            # along the loop, so both z = 0 and z = 1 are enclosed
            good = [r for r in roots if abs(r) > 1 and abs(cmath.phase(r)) < 0.5 * math.pi]
            if good:
                z = max(good, key=abs)
                tilt = min(max(cmath.phase(z), -_MAX_TILT), _MAX_TILT)
                self.x0, self.psi = abs(z), -tilt
            else:
                self.x0 = 1.0
            self.x0 = max(self.x0, 1.0 + min(0.5, 2.0 / lam))
            self.s, self.nu = self.x0, 1.0
            return
        # the loop must reach far enough left for exp(lam z) |z|^-(c+a) to decay;
        # with a large exponent the power alone suffices
        p = max((self.c + self.a).real, 1.0)
        self.s = max(self.x0, min(2.0 / lam, self.x0 * math.exp(30.0 / p)))
        self.nu = math.sqrt(2 * self.x0 / (3 * self.s))

    def logf(self, u, du):
        rot = cmath.exp(-1j * self.psi)
        z = rot * u
        logz = -1j * self.psi + np.log(u)
        if self.kind == "C2":
            lcut = np.log(1 - z)
        else:
            # log(z - 1) continued along the loop; |1/z| < 1 there
            lcut = logz + np.log(1 - 1 / z)
        return self.lam * z - self.c * logz - self.a * lcut + np.log(rot * du)

    def partial(self, N, odd_only=False):
        u, du = _talbot_nodes(self.x0, self.s, self.nu, N, odd_only)
        lf = self.logf(u, du)
        mx = lf.real.max()
        t = np.exp(lf - mx)
        return np.sum(t), np.sum(np.abs(t)), mx, float(np.abs(lf).max())


def hankel_quad(lam: float, c: complex, a: complex, kind: str,
                cfg: ContourConfig = DEFAULT_CONTOUR) -> ComplexScalar:
    """Trapezoidal quadrature of the C1 (``kind="C1"``) or C2 integral.

    The node count is doubled (reusing previous nodes) until two successive
    estimates agree to ``cfg.tol``.
    """
    ig = _HankelIntegrand(lam, c, a, kind)
    N = cfg.node_count
    acc, mag, scale, expo = ig.partial(N)
    eps = np.finfo(float).eps
    prev = None
    while True:
        # h / (2 pi i) with h = 2 pi / N
        est = ComplexScalar(acc / (1j * N), scale)
        if prev is not None:
            # relative agreement, or agreement at the rounding level of the
            # integrand when the result itself is tiny
            step = (est - prev).log_abs
            floor = math.log(64 * eps * mag / N) + scale
            # each node carries a relative error of about eps times the size
            # of its exponent, which bounds the attainable agreement
            tol = max(cfg.tol, 16 * eps * expo)
            if step <= math.log(tol) + est.log_abs:
                return est
            # converged to rounding level: accept only if that level is still
            # small against the result (otherwise cancellation ate the digits)
            if (step <= floor and floor - est.log_abs <= _FLOOR_ACCEPT
                    and step - est.log_abs <= _FLOOR_STEP):
                return est
        if 2 * N > cfg.max_nodes:
            diff = math.exp(step - est.log_abs) if prev is not None and est.mantissa != 0 else math.inf
            raise AccuracyError(
                f"contour quadrature did not reach tol={cfg.tol} with {N} nodes",
                best=est, estimate=diff)
        add, add_mag, add_scale, add_expo = ig.partial(2 * N, odd_only=True)
        expo = max(expo, add_expo)
        s = max(scale, add_scale)
        acc = acc * math.exp(scale - s) + add * math.exp(add_scale - s)
        mag = mag * math.exp(scale - s) + add_mag * math.exp(add_scale - s)
        scale = s
        prev = est
        N *= 2


def _hug_c2(lam, c, a, order=200) -> ComplexScalar:
    """C2 integral as circle |z| = delta plus both sides of the cut z < -delta."""
    # radius through the inner stationary point, where the circle integrand peaks least
    small = min(_saddle_roots(lam, c, a), key=abs)
    delta = min(0.95, max(0.05, abs(small)))
    # Gauss-Legendre on [-pi, 0] and [0, pi] clusters nodes next to z = delta
    x, w = np.polynomial.legendre.leggauss(order)
    phi = np.concatenate([math.pi / 2 * (x - 1), math.pi / 2 * (x + 1)])
    w = np.concatenate([w, w]) * math.pi / 2
    z = delta * np.exp(1j * phi)
    lf = lam * z - c * (math.log(delta) + 1j * phi) - a * np.log(1 - z) + np.log(1j * z)
    mx = lf.real.max()
    circle = ComplexScalar(np.sum(w * np.exp(lf - mx)), mx)

    ref = (-lam * delta - c * math.log(delta) - a * math.log1p(delta)).real

    def ray(y):
        xx = delta + y
        return cmath.exp(-lam * xx - c * math.log(xx) - a * math.log1p(xx) - ref)

    re = integrate.quad(lambda y: ray(y).real, 0, np.inf, epsabs=0, epsrel=1e-13, limit=400)[0]
    im = integrate.quad(lambda y: ray(y).imag, 0, np.inf, epsabs=0, epsrel=1e-13, limit=400)[0]
    rays = ComplexScalar(complex(re, im), ref) * (2j * cmath.sin(math.pi * c))
    return (circle + rays) / (2j * math.pi)


# ---------------------------------------------------------------------------
# G, H, I
# ---------------------------------------------------------------------------

def G(n: int, theta: complex, rho: float, cfg: ContourConfig | None = None,
      method: str = "series") -> ComplexScalar:
    """Second solution of the lower recurrence, Hankel integral around z = 1.

    ``method="series"`` sums the Kummer series
    ``sum_k (theta)_k/k! rho^(n+theta+k)/Gamma(n+1+theta+k)``;
    ``method="quad"`` integrates along the contour.
    """
    if n < -1:
        raise ParameterError("G_n requires n >= -1")
    theta = _check_theta(theta)
    if method == "series":
        return _c1_series(rho, n + 1, theta)
    if method == "quad":
        return hankel_quad(rho, n + 1, theta, "C1", cfg or DEFAULT_CONTOUR)
    raise ParameterError(f"unknown method {method!r}")


def G_scaled(n: int, theta: complex, rho: float) -> ComplexScalar:
    """Gamma(theta) e^-rho rho^-theta G_n(theta) = e^-rho rho^n S / (theta)_{n+1}.

    The gamma functions cancel analytically, so large ``|theta|`` (as met on
    inversion contours) costs no accuracy.  Here S is the Kummer sum
    ``sum_k (theta)_k / ((n+1+theta)_k k!) rho^k``.
    """
    if n < -1:
        raise ParameterError("G_n requires n >= -1")
    theta = _check_theta(theta)
    if is_pole(theta):
        raise PoleError(f"Gamma(theta) has a pole at theta = {theta}")
    poch = complex(np.sum(_log_poch_array(theta, np.array([0, n + 1]))[1:]))
    br = _c1_bracket(rho, n + 1, theta)
    if br is None or br[1] > _CANCEL_LIMIT:
        return (ComplexScalar.from_log(log_gamma(theta) - rho - theta * math.log(rho))
                * G(n, theta, rho, method="quad"))
    return br[0] * ComplexScalar.from_log(-rho + n * math.log(rho) - poch)


def _abandon_args(n, theta, params: ModelParams):
    eta = params.eta_n
    if eta <= 0:
        raise ParameterError("H and I require eta > 0; use the M/M/m formulas for eta = 0")
    m = params.m
    return params.rho / eta, n + 1 - m + m / eta, _check_theta(theta) / eta


def H(n: int, theta: complex, params: ModelParams, cfg: ContourConfig | None = None,
      method: str = "series") -> ComplexScalar:
    """Recessive solution of the upper recurrence (decays like 1/n!)."""
    lam, c, a = _abandon_args(n, theta, params)
    if method == "series":
        return _c1_series(lam, c, a)
    if method == "quad":
        return hankel_quad(lam, c, a, "C1", cfg or DEFAULT_CONTOUR)
    raise ParameterError(f"unknown method {method!r}")


def I(n: int, theta: complex, params: ModelParams,  # noqa: E743
      cfg: ContourConfig | None = None) -> ComplexScalar:
    """Dominant solution of the upper recurrence (grows like n^(theta/eta - 1))."""
    lam, c, a = _abandon_args(n, theta, params)
    if is_pole(c):
        # z^-c is then a polynomial and the loop encloses no singularity
        return ComplexScalar.zero()
    cfg = cfg or DEFAULT_CONTOUR
    if cfg.mode == "hug":
        return _hug_c2(lam, c, a)
    return hankel_quad(lam, c, a, "C2", cfg)


def H_zero(n: int, params: ModelParams) -> ComplexScalar:
    """H_n(0) = I_n(0) = (rho/eta)^(n-m+m/eta) / Gamma(n-m+1+m/eta)."""
    lam, c, _ = _abandon_args(n, 0.0, params)
    return cpow(lam, c - 1) * rgamma(c)


def H_asymptotic(n: int, theta: complex, params: ModelParams) -> ComplexScalar:
    """Leading large-n form (rho/eta)^(n-m+(theta+m)/eta) / Gamma(n+1+(m+theta)/eta-m)."""
    lam, c, a = _abandon_args(n, theta, params)
    return cpow(lam, c + a - 1) * rgamma(c + a)


def I_asymptotic(n: int, theta: complex, params: ModelParams) -> ComplexScalar:
    """Leading large-n form n^(theta/eta - 1) e^(rho/eta) / Gamma(theta/eta)."""
    lam, _, a = _abandon_args(n, theta, params)
    return cpow(n, a - 1) * ComplexScalar.from_log(lam) * rgamma(a)


# ---------------------------------------------------------------------------
# Wronskians
# ---------------------------------------------------------------------------

def wronskian_W(n: int, theta: complex, params: ModelParams) -> ComplexScalar:
    """H_n I_{n+1} - H_{n+1} I_n in closed form."""
    lam, _, a = _abandon_args(n, theta, params)
    m, eta = params.m, params.eta_n
    return (ComplexScalar.from_log(lam) * rgamma(a)
            * cpow(lam, n - m + (theta + m) / eta) * rgamma(n - m + 2 + m / eta))


def wronskian_Wtilde(n: int, theta: complex, rho: float) -> ComplexScalar:
    """G_n F_{n+1} - G_{n+1} F_n = e^rho rho^(n+theta) / (Gamma(theta) (n+1)!)."""
    theta = _check_theta(theta)
    return (ComplexScalar.from_log(rho) * rgamma(theta) * cpow(rho, n + theta)
            * ComplexScalar.from_log(-math.lgamma(n + 2)))
