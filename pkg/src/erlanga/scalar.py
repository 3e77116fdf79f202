"""Overflow-safe complex scalars and complex gamma helpers.

A :class:`ComplexScalar` stores ``mantissa * exp(log_scale)``.  Products of
powers such as ``rho**(n + theta)``, ``exp(rho/eta)`` and gamma ratios are
accumulated in log space and only collapsed to a plain ``complex`` at the end.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy import special

from .errors import PoleError

_LO, _HI = 1e-2, 1e2


class ComplexScalar:
    """Complex number ``mantissa * exp(log_scale)`` with a separate exponent."""

    __slots__ = ("mantissa", "log_scale")

    def __init__(self, mantissa: complex, log_scale: float = 0.0):
        self.mantissa = complex(mantissa)
        self.log_scale = float(log_scale)
        self._renormalize()

    def _renormalize(self):
        a = abs(self.mantissa)
        if a == 0.0 or not math.isfinite(a):
            if a == 0.0:
                self.mantissa, self.log_scale = 0j, -math.inf
            return
        if a < _LO or a > _HI:
            la = math.log(a)
            self.mantissa /= a
            self.log_scale += la

    @classmethod
    def from_log(cls, logz: complex) -> ComplexScalar:
        logz = complex(logz)
        if logz.real == -math.inf:
            return cls(0j, -math.inf)
        return cls(cmath.exp(1j * logz.imag), logz.real)

    @classmethod
    def zero(cls) -> ComplexScalar:
        return cls(0j, -math.inf)

    @property
    def value(self) -> complex:
        if self.mantissa == 0:
            return 0j
        if self.log_scale > 705.0:
            return complex(math.copysign(math.inf, self.mantissa.real),
                           math.copysign(math.inf, self.mantissa.imag))
        return self.mantissa * math.exp(self.log_scale)

    def log(self) -> complex:
        """Principal-ish log; the imaginary part is ``arg(mantissa)``."""
        if self.mantissa == 0:
            return complex(-math.inf, 0.0)
        return cmath.log(self.mantissa) + self.log_scale

    @property
    def log_abs(self) -> float:
        if self.mantissa == 0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.log_scale

    def __complex__(self):
        return self.value

    def _coerce(self, other) -> ComplexScalar:
        if isinstance(other, ComplexScalar):
            return other
        return ComplexScalar(complex(other))

    def __mul__(self, other):
        o = self._coerce(other)
        return ComplexScalar(self.mantissa * o.mantissa, self.log_scale + o.log_scale)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.mantissa == 0:
            raise ZeroDivisionError("ComplexScalar division by zero")
        return ComplexScalar(self.mantissa / o.mantissa, self.log_scale - o.log_scale)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __add__(self, other):
        o = self._coerce(other)
        if self.mantissa == 0:
            return ComplexScalar(o.mantissa, o.log_scale)
        if o.mantissa == 0:
            return ComplexScalar(self.mantissa, self.log_scale)
        s = max(self.log_scale, o.log_scale)
        m = (self.mantissa * math.exp(self.log_scale - s)
             + o.mantissa * math.exp(o.log_scale - s))
        return ComplexScalar(m, s)

    __radd__ = __add__

    def __neg__(self):
        return ComplexScalar(-self.mantissa, self.log_scale)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __pow__(self, k: int):
        return ComplexScalar.from_log(k * self.log())

    def __abs__(self):
        return abs(self.value)

    def __repr__(self):
        return f"ComplexScalar({self.mantissa!r}, log_scale={self.log_scale!r})"


def cs_sum(terms) -> ComplexScalar:
    """Sum an iterable of ComplexScalars with a single common scale."""
    terms = [t for t in terms if t.mantissa != 0]
    if not terms:
        return ComplexScalar.zero()
    s = max(t.log_scale for t in terms)
    return ComplexScalar(sum(t.mantissa * math.exp(t.log_scale - s) for t in terms), s)


def is_pole(z: complex) -> bool:
    z = complex(z)
    return z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real)


def log_gamma(z: complex) -> complex:
    """Principal branch of log Gamma(z) (scipy's ``loggamma``)."""
    if is_pole(z):
        raise PoleError(f"Gamma has a pole at z={z}")
    return complex(special.loggamma(complex(z)))


def complex_gamma(z: complex) -> ComplexScalar:
    """Gamma(z) as a ComplexScalar; raises :class:`PoleError` at 0, -1, -2, ..."""
    return ComplexScalar.from_log(log_gamma(z))


def rgamma(z: complex) -> ComplexScalar:
    """1/Gamma(z), entire; zero at the poles of Gamma."""
    if is_pole(z):
        return ComplexScalar.zero()
    return ComplexScalar.from_log(-log_gamma(z))


def cpow(base: complex, expo: complex) -> ComplexScalar:
    """``base**expo`` on the principal branch, log-scaled."""
    base = complex(base)
    if base == 0:
        return ComplexScalar.zero()
    return ComplexScalar.from_log(complex(expo) * cmath.log(base))


def log_poch(a: complex, k: int) -> complex:
    """log of the rising factorial (a)_k; poles of Gamma(a) handled by direct product."""
    if is_pole(a) or is_pole(a + k):
        prod = ComplexScalar(1.0)
        for j in range(k):
            prod = prod * (a + j)
        return prod.log()
    return log_gamma(a + k) - log_gamma(a)


def gammaln_real(x):
    """Vectorised real log-gamma for positive arguments."""
    return special.gammaln(np.asarray(x, dtype=float))
