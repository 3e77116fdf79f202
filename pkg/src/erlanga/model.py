"""Erlang A model parameters, birth-death rates and the stationary law.

Internally time is measured in units of ``1/mu``: the birth rate is ``rho``
and the death rate in state ``n`` is ``min(n, m) + max(n - m, 0) * eta/mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ParameterError, UnstableQueueError


@dataclass(frozen=True)
class ModelParams:
    """Rates of the M/M/m+M queue.

    Parameters
    ----------
    lam : float
        Arrival rate.
    mu : float
        Per-server service rate.
    m : int
        Number of servers.
    eta : float
        Abandonment rate of waiting customers (0 gives the M/M/m queue).
    """

    lam: float
    mu: float
    m: int
    eta: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError(f"arrival rate must be positive, got {self.lam}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ParameterError(f"service rate must be positive, got {self.mu}")
        if int(self.m) != self.m or self.m < 1:
            raise ParameterError(f"server count must be a positive integer, got {self.m}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ParameterError(f"abandonment rate must be >= 0, got {self.eta}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def normalized(cls, rho: float, m: int, eta: float) -> ModelParams:
        """Parameters in units where ``mu = 1``."""
        return cls(lam=rho, mu=1.0, m=m, eta=eta)

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    @property
    def eta_n(self) -> float:
        return self.eta / self.mu

    def with_eta(self, eta_n: float) -> ModelParams:
        """Copy with the normalized abandonment rate replaced."""
        return ModelParams(self.lam, self.mu, self.m, eta_n * self.mu)


@dataclass
class Pmf:
    """Probabilities over ``n = 0..N_max`` plus a bound on the truncated mass."""

    values: np.ndarray
    tail_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def check(self, tol: float = 1e-10) -> None:
        v = self.values
        if np.any(v < -tol) or np.any(v > 1 + tol):
            raise ValueError("pmf entries outside [0, 1]")
        total = float(v.sum()) + self.tail_mass
        if abs(total - 1.0) > tol:
            raise ValueError(f"pmf mass {total} differs from 1 by more than {tol}")


def birth_rate(params: ModelParams, n: int) -> float:
    """Arrival rate in state ``n`` (normalized units)."""
    if n < 0:
        raise ParameterError("state index must be >= 0")
    return params.rho


def death_rate(params: ModelParams, n: int) -> float:
    """Service plus abandonment rate in state ``n`` (normalized units)."""
    if n < 0:
        raise ParameterError("state index must be >= 0")
    m = params.m
    if n <= m:
        return float(n)
    return m + (n - m) * params.eta_n


def death_rates(params: ModelParams, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1, dtype=float)
    m = params.m
    return np.where(n <= m, n, m + (n - m) * params.eta_n)


def _log_unnormalized(params: ModelParams, n: np.ndarray) -> np.ndarray:
    """log of rho^n/n! (n <= m) continued by the abandonment product (n >= m)."""
    rho, m, eta = params.rho, params.m, params.eta_n
    n = np.asarray(n, dtype=float)
    low = n * math.log(rho) - gammaln(n + 1)
    base = m * math.log(rho) - gammaln(m + 1)
    if eta > 0:
        high = (base + (n - m) * math.log(rho / eta)
                + gammaln(1 + m / eta) - gammaln(n - m + 1 + m / eta))
    else:
        high = base + (n - m) * math.log(rho / m)
    return np.where(n <= m, low, high)


def _stationary_extent(params: ModelParams, tol: float) -> int:
    """Smallest N whose stationary tail mass (relative) is below ``tol``."""
    rho, m, eta = params.rho, params.m, params.eta_n
    if eta == 0 and rho >= m:
        raise UnstableQueueError(f"M/M/m with rho={rho} >= m={m} has no steady state")
    n = max(m, int(math.ceil(rho)))
    logp = _log_unnormalized(params, np.arange(n + 1))
    logz = logsumexp(logp)
    while True:
        n += 1
        lp = float(_log_unnormalized(params, np.array([n]))[0])
        r = rho / death_rate(params, n + 1)
        if r < 1 and lp - math.log1p(-r) - logz < math.log(tol):
            return n
        logz = np.logaddexp(logz, lp)
        if n > 10_000_000:
            raise UnstableQueueError("stationary tail does not decay")


def default_nmax(params: ModelParams, n0: int = 0, tol: float = 1e-12) -> int:
    """Truncation covering both the stationary tail and the spread around ``n0``."""
    n_stat = _stationary_extent(params, tol) if (params.eta_n > 0 or params.rho < params.m) else 0
    n_init = int(math.ceil(n0 + 10 * math.sqrt(n0 + 1)))
    return max(n_stat, n_init, params.m + 1)


def steady_state(params: ModelParams, n_max: int | None = None) -> Pmf:
    """Stationary distribution p_n(inf) for n = 0..n_max.

    For ``n <= m`` it is ``K rho^n/n!``; above ``m`` the ratio of successive
    terms is ``rho / (m + (n - m) eta)``.  ``K`` is computed from the full
    (untruncated) series; the mass above ``n_max`` is reported in ``tail_mass``.
    """
    rho, m, eta = params.rho, params.m, params.eta_n
    if eta == 0 and rho >= m:
        raise UnstableQueueError(f"M/M/m with rho={rho} >= m={m} has no steady state")
    n_full = _stationary_extent(params, 1e-18)
    if n_max is None:
        n_max = default_nmax(params)
    n_all = max(n_full, n_max)
    logp = _log_unnormalized(params, np.arange(n_all + 1))
    logk = -logsumexp(logp)
    p = np.exp(logp + logk)
    vals = p[: n_max + 1]
    tail = float(p[n_max + 1:].sum())
    return Pmf(vals, tail, {"log_K": float(logk)})


def normalizing_constant(params: ModelParams) -> float:
    """K of the stationary law (probability of the empty system)."""
    return float(np.exp(steady_state(params, params.m).meta["log_K"]))
