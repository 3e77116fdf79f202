"""Independent reference solvers working directly on the Markov chain.

These never touch the contour-integral machinery: the transient law comes from
uniformization (or a Runge-Kutta integration) of the truncated forward
equations, first-passage laws from the chain with the target level made
absorbing, and sample statistics from event-driven simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg, stats

from .errors import ParameterError, TruncationError
from .model import ModelParams, Pmf, death_rates, default_nmax

__all__ = [
    "OracleConfig", "transient_oracle", "transient_grid", "transform_oracle",
    "fpt_oracle", "mc_simulate", "McResult",
]


@dataclass(frozen=True)
class OracleConfig:
    """Settings shared by the oracle solvers.

    Parameters
    ----------
    n_max : int, optional
        State-space truncation; chosen from the stationary tail and the
        initial state when omitted.
    rate : float, optional
        Uniformization rate; defaults to the largest total outflow rate.
    tol : float
        Poisson right-tail mass discarded by uniformization.
    tail_tol : float
        Largest mass allowed to leak past ``n_max`` before
        :class:`TruncationError` is raised.
    seed : int
        Root seed for simulation.
    replications : int
        Number of simulated paths.
    method : str
        ``"uniformization"`` or ``"rk"``.
    """

    n_max: int | None = None
    rate: float | None = None
    tol: float = 1e-14
    tail_tol: float = 1e-12
    seed: int = 20240601
    replications: int = 10_000
    method: str = "uniformization"


def _truncation(params: ModelParams, n0: int, t_max: float, cfg: OracleConfig) -> int:
    if cfg.n_max is not None:
        return cfg.n_max
    rho = params.rho
    if params.eta_n == 0 and rho >= params.m:
        # no stationary law: cover the drift over the horizon instead
        spread = rho * t_max
        return int(math.ceil(n0 + spread + 12 * math.sqrt(spread + n0 + 1) + 30))
    return default_nmax(params, n0) + 10


class _Chain:
    """Birth-death generator on 0..N plus an absorbing overflow state N+1.

    Births out of ``N`` go to the overflow state, so its mass bounds the
    truncation error.  With ``absorb_at`` the chain is instead killed on
    reaching that level (first-passage use).
    """

    def __init__(self, params: ModelParams, n_max: int):
        self.N = n_max
        self.birth = np.full(n_max + 1, params.rho)
        self.death = death_rates(params, n_max)
        self.out = self.birth + self.death

    def apply(self, p: np.ndarray) -> tuple[np.ndarray, float]:
        """Return (p Q restricted to 0..N, rate of flow into the overflow state)."""
        dp = -self.out * p
        dp[1:] += self.birth[:-1] * p[:-1]
        dp[:-1] += self.death[1:] * p[1:]
        return dp, self.birth[-1] * p[-1]


def _uniformize(chain: _Chain, p0: np.ndarray, times: np.ndarray, rate: float, tol: float,
                block: int = 256):
    """Distribution at each time (rows) and the leaked mass per time."""
    lt = rate * times
    k_max = int(stats.poisson.isf(tol, lt.max())) + 2 if lt.max() > 0 else 1
    # powers of the uniformized transition operator applied to p0
    powers = np.empty((k_max + 1, len(p0)))
    p = p0.copy()
    for k in range(k_max + 1):
        powers[k] = p
        dp, _ = chain.apply(p)
        p = p + dp / rate
    out = np.empty((len(times), len(p0)))
    ks = np.arange(k_max + 1)
    for i in range(0, len(times), block):
        w = stats.poisson.pmf(ks[None, :], lt[i:i + block, None])
        out[i:i + block] = w @ powers
    leaked = np.maximum(0.0, 1.0 - out.sum(axis=1))
    return out, leaked


def _rk(chain: _Chain, p0: np.ndarray, times: np.ndarray):
    def rhs(_t, y):
        dp, _ = chain.apply(y)
        return dp
    sol = integrate.solve_ivp(rhs, (0.0, float(times.max())), p0, method="DOP853",
                              t_eval=np.sort(times), rtol=1e-12, atol=1e-15)
    order = np.argsort(np.argsort(times))
    out = sol.y.T[order]
    leaked = np.maximum(0.0, 1.0 - out.sum(axis=1))
    return out, leaked


def transient_grid(params: ModelParams, n0: int, times, cfg: OracleConfig = OracleConfig()):
    """Transient probabilities p_n(t) as an array of shape (len(times), N+1).

    Returns the array and the per-time mass that left the truncated space.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ParameterError("times must be >= 0")
    if n0 < 0:
        raise ParameterError("initial state must be >= 0")
    n_max = _truncation(params, n0, float(times.max()), cfg)
    if n0 > n_max:
        raise ParameterError(f"initial state {n0} beyond truncation {n_max}")
    chain = _Chain(params, n_max)
    p0 = np.zeros(n_max + 1)
    p0[n0] = 1.0
    if cfg.method == "rk":
        out, leaked = _rk(chain, p0, times)
    elif cfg.method == "uniformization":
        rate = cfg.rate if cfg.rate is not None else float(chain.out.max())
        if rate < chain.out.max():
            raise ParameterError("uniformization rate below the largest outflow rate")
        out, leaked = _uniformize(chain, p0, times, rate, cfg.tol)
    else:
        raise ParameterError(f"unknown oracle method {cfg.method!r}")
    if leaked.max() > cfg.tail_tol:
        raise TruncationError(
            f"mass {leaked.max():.3g} left states 0..{n_max}; enlarge n_max")
    return out, leaked


def transient_oracle(params: ModelParams, n0: int, t: float,
                     cfg: OracleConfig = OracleConfig()) -> Pmf:
    """p_n(t), n = 0..N_max, from the truncated forward equations."""
    out, leaked = transient_grid(params, n0, [t], cfg)
    return Pmf(out[0], float(leaked[0]), {"method": cfg.method})


def transform_oracle(params: ModelParams, n0: int, theta: complex, n_max: int | None = None):
    """Laplace transforms of p_n(t) by a direct banded solve of (theta - Q^T) x = e_{n0}.

    The truncated chain is reflected at ``n_max``; choose it well past the
    stationary bulk.
    """
    if n_max is None:
        n_max = default_nmax(params, n0, tol=1e-16) + 20
    rho = params.rho
    mu = death_rates(params, n_max)
    out = np.full(n_max + 1, rho)
    out[-1] = 0.0
    diag = theta + out + mu
    ab = np.zeros((3, n_max + 1), dtype=complex)
    ab[0, 1:] = -mu[1:]          # superdiagonal: inflow from n+1 by a death
    ab[1] = diag
    ab[2, :-1] = -rho            # subdiagonal: inflow from n-1 by a birth
    rhs = np.zeros(n_max + 1, dtype=complex)
    rhs[n0] = 1.0
    return linalg.solve_banded((1, 1), ab, rhs)


def fpt_oracle(params: ModelParams, start: int, n_star: int, t_grid,
               cfg: OracleConfig = OracleConfig()):
    """First-passage CDF and density to level ``n_star`` from ``start``.

    The chain on ``0..n_star-1`` is killed at rate ``rho`` from ``n_star-1``;
    the density is that killing flux and the CDF the absorbed mass.

    Returns
    -------
    cdf, density : ndarray
        Values on ``t_grid``.
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if not (0 <= start <= n_star):
        raise ParameterError("need 0 <= start <= n_star")
    if n_star <= params.m:
        raise ParameterError("target level must exceed the server count")
    if start == n_star:
        return np.ones_like(t_grid), np.zeros_like(t_grid)
    chain = _Chain(params, n_star - 1)
    p0 = np.zeros(n_star)
    p0[start] = 1.0
    if cfg.method == "rk":
        out, _ = _rk(chain, p0, t_grid)
    else:
        rate = cfg.rate if cfg.rate is not None else float(chain.out.max())
        out, _ = _uniformize(chain, p0, t_grid, rate, cfg.tol)
    survival = out.sum(axis=1)
    return 1.0 - survival, params.rho * out[:, -1]


@dataclass
class McResult:
    """Simulation estimates with standard errors."""

    mean: np.ndarray
    stderr: np.ndarray
    samples: int
    extra: dict


def _streams(seed: int, count: int):
    """One independent generator per replication, keyed by (seed, index)."""
    return [np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, i]))
            for i in range(count)]


def _simulate_path(params: ModelParams, rng, n: int, t_end: float, marks, n_star=None,
                   chunk: int = 256):
    rho, m, eta = params.rho, params.m, params.eta_n
    t = 0.0
    states = np.empty(len(marks), dtype=np.int64)
    j = 0
    # uniforms are drawn in blocks: one column for the clock, one for the jump
    draws, k = None, chunk
    while True:
        if n_star is not None and n >= n_star:
            return t, states
        if k == chunk:
            block = rng.random((chunk, 2))
            clocks = (-np.log1p(-block[:, 0])).tolist()
            draws, k = block[:, 1].tolist(), 0
        total = rho + (n if n <= m else m + (n - m) * eta)
        dt = clocks[k] / total
        while j < len(marks) and marks[j] < t + dt:
            states[j] = n
            j += 1
        t += dt
        if n_star is None and t >= t_end:
            return t, states
        n += 1 if draws[k] * total < rho else -1
        k += 1


def mc_simulate(params: ModelParams, n0: int, cfg: OracleConfig = OracleConfig(), *,
                times=None, n_star: int | None = None, n_max: int = 60) -> McResult:
    """Event-driven simulation of the queue-length process.

    With ``times`` given, estimates p_n(t) for n = 0..n_max at each time
    (``mean`` has shape (len(times), n_max+1)).  With ``n_star`` given,
    estimates the first-passage time to ``n_star`` (mean, standard error and
    quantiles in ``extra``).  Results are bit-identical for a fixed seed.
    """
    if cfg.replications < 100:
        raise ParameterError("at least 100 replications required")
    R = cfg.replications
    rngs = _streams(cfg.seed, R)
    if n_star is not None:
        if n_star <= params.m or n0 > n_star:
            raise ParameterError("need n0 <= n_star and n_star > m")
        taus = np.array([_simulate_path(params, g, n0, math.inf, [], n_star)[0] for g in rngs])
        se = taus.std(ddof=1) / math.sqrt(R)
        q = np.quantile(taus, [0.1, 0.5, 0.9])
        return McResult(np.array(taus.mean()), np.array(se), R,
                        {"quantiles": dict(zip(("q10", "q50", "q90"), q))})
    if times is None:
        raise ParameterError("give either times or n_star")
    marks = np.sort(np.atleast_1d(np.asarray(times, dtype=float)))
    counts = np.zeros((len(marks), n_max + 1))
    for g in rngs:
        _, states = _simulate_path(params, g, n0, marks[-1], marks)
        for i, s in enumerate(states):
            if s <= n_max:
                counts[i, s] += 1
    p = counts / R
    se = np.sqrt(p * (1 - p) / R)
    return McResult(p, se, R, {"times": marks})
