"""Numerical inversion of Laplace transforms.

Two methods are provided.  ``euler`` sums the Bromwich integral along a
vertical line ``Re theta = A/(2t)`` as a Fourier series and accelerates it
by binomial (Euler) averaging of partial sums.  ``gaver`` is the
Gaver-Stehfest formula, which only evaluates the transform at real positive
points.
"""

from __future__ import annotations

import math
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AccuracyError, ParameterError

__all__ = ["InversionConfig", "InversionResult", "invert", "invert_mean", "stehfest_weights"]


@dataclass(frozen=True)
class InversionConfig:
    """Settings for :func:`invert`.

    Parameters
    ----------
    method : str
        ``"euler"`` or ``"gaver"``.
    terms : int
        Euler: number of plain terms before averaging.  Gaver: even number of
        Stehfest terms.
    euler_m : int
        Number of binomially averaged partial sums (Euler only).
    max_terms : int
        Euler term count is doubled up to this value when the error estimate
        exceeds ``target``.
    target : float
        Absolute accuracy requested.
    abscissa : float
        The constant ``A`` placing the line at ``Re theta = A / (2t)``; the
        discretization error is about ``exp(-A)``.
    workers : int
        Threads used to evaluate the transform at the nodes.
    strict : bool
        Raise :class:`AccuracyError` when the target is missed.
    """

    method: str = "euler"
    terms: int = 24
    euler_m: int = 12
    max_terms: int = 192
    target: float = 1e-8
    abscissa: float = 24.0
    workers: int = 1
    strict: bool = True


@dataclass
class InversionResult:
    """Inverted values with a-posteriori error estimates (same shape)."""

    values: np.ndarray
    errors: np.ndarray
    method: str

    def __iter__(self):
        return iter((self.values, self.errors))


def _evaluate(f, nodes, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(f, nodes))
    else:
        vals = [f(z) for z in nodes]
    return np.array(vals)


def _euler_average(partial: np.ndarray, n: int, M: int) -> np.ndarray:
    """Binomially weighted mean of partial sums s_n .. s_{n+M}."""
    w = np.array([math.comb(M, k) for k in range(M + 1)], dtype=float) / 2.0**M
    return np.tensordot(w, partial[n:n + M + 1], axes=(0, 0))


def _euler_one(f, t, cfg: InversionConfig):
    A = cfg.abscissa
    n, M = cfg.terms, cfg.euler_m
    vals = None
    while True:
        K = n + M
        have = 0 if vals is None else len(vals)
        if K + 1 > have:
            k = np.arange(have, K + 1)
            new = _evaluate(f, (A + 2j * math.pi * k) / (2 * t), cfg.workers)
            vals = new if vals is None else np.concatenate([vals, new])
        terms = vals[:K + 1].real.copy()
        signs = (-1.0) ** np.arange(K + 1)
        terms = terms * signs.reshape((-1,) + (1,) * (terms.ndim - 1))
        terms[0] *= 0.5
        scale = math.exp(A / 2) / t
        partial = np.cumsum(terms, axis=0) * scale
        best = _euler_average(partial, n, M)
        coarse = _euler_average(partial, n // 2, M)
        err = np.abs(best - coarse)
        if np.max(err) <= cfg.target or 2 * n + M > cfg.max_terms:
            return best, err
        n *= 2


@lru_cache(maxsize=32)
def stehfest_weights(L: int) -> np.ndarray:
    """Stehfest coefficients V_1..V_L for even ``L`` (computed exactly)."""
    if L % 2 or L < 2:
        raise ParameterError("Stehfest term count must be even and >= 2")
    h = L // 2
    V = []
    for k in range(1, L + 1):
        s = Fraction(0)
        for j in range((k + 1) // 2, min(k, h) + 1):
            s += Fraction(j ** h * math.factorial(2 * j),
                          math.factorial(h - j) * math.factorial(j) * math.factorial(j - 1)
                          * math.factorial(k - j) * math.factorial(2 * j - k))
        V.append(float((-1) ** (k + h) * s))
    return np.array(V)


def _gaver_one(f, t, cfg: InversionConfig):
    L = cfg.terms if cfg.terms % 2 == 0 else cfg.terms + 1
    L = min(L, 18)          # double precision limit of the Stehfest weights
    ln2 = math.log(2.0)
    # every order uses the nodes k ln2 / t, k = 1..order, so one evaluation serves all
    vals = _evaluate(f, [k * ln2 / t for k in range(1, L + 1)], cfg.workers).real

    def order(q):
        return ln2 / t * np.tensordot(stehfest_weights(q), vals[:q], axes=(0, 0))

    best = order(L)
    # successive orders can agree by accident, so take the worst of several
    lower = [q for q in (L - 2, L - 4, L - 6) if q >= 2] or [max(2, L // 2 + L // 2 % 2)]
    err = np.max([np.abs(best - order(q)) for q in lower], axis=0)
    return best, err


def invert(f, t_grid, cfg: InversionConfig = InversionConfig()) -> InversionResult:
    """Invert the transform ``f`` at each ``t > 0`` of ``t_grid``.

    ``f`` may return scalars or arrays (one inversion per component).  Each
    value comes with the difference between two term counts as an error
    estimate; if any estimate exceeds ``cfg.target`` and ``cfg.strict`` is
    set, :class:`AccuracyError` is raised with the result attached as
    ``best``.
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(t_grid <= 0):
        raise ParameterError("inversion needs t > 0; the t = 0 value is the initial condition")
    if cfg.method == "euler":
        one = _euler_one
    elif cfg.method == "gaver":
        one = _gaver_one
    else:
        raise ParameterError(f"unknown inversion method {cfg.method!r}")
    vals, errs = zip(*(one(f, float(t), cfg) for t in t_grid))
    res = InversionResult(np.array(vals), np.array(errs), cfg.method)
    if cfg.strict and np.max(res.errors) > cfg.target:
        raise AccuracyError(
            f"{cfg.method} inversion error estimate {np.max(res.errors):.3g} exceeds {cfg.target:.3g}",
            best=res, estimate=float(np.max(res.errors)))
    return res


def _mean_scale(f, theta: float = 1e-4) -> float:
    """Rough first moment from 1 - f(theta) ~ theta * mean on the positive axis."""
    for _ in range(60):
        q = (1.0 - f(theta).real) / theta
        if q <= 0 or theta * q <= 0.05:
            return max(q, 0.0)
        theta = 0.01 / q
    return q


def invert_mean(f, steps=None, rtol: float = 2e-6, scales=(1, 3, 1 / 3, 10, 0.1, 30, 0.03)) -> float:
    """First moment -f'(0) of a Laplace-Stieltjes transform.

    Central differences at ``h1``, ``h2`` and ``h2**2/h1`` give two
    Richardson-extrapolated estimates.  By default ``h1 = 0.002 / q`` (at
    most ``1e-4``) and ``h2 = h1 / 2``, where ``q`` is a rough mean from the
    positive real axis, so the steps stay well inside the nearest
    singularity (at about ``-1/q``).  The steps are multiplied by each entry of ``scales`` in turn
    (larger steps suppress rounding noise in ``f``, smaller ones truncation
    error) until the two estimates agree to ``rtol`` (relative); otherwise
    :class:`AccuracyError` carries the most consistent estimate.
    """
    if steps is None:
        q = _mean_scale(f)
        h1 = 2e-3 / q if q > 20.0 else 1e-4
        steps = (h1, h1 / 2)
    best = None
    for k in scales:
        h1, h2 = steps[0] * k, steps[1] * k
        hs = (h1, h2, h2 * h2 / h1)
        d = [(f(h) - f(-h)).real / (2 * h) for h in hs]
        ext = [(d[i + 1] * hs[i] ** 2 - d[i] * hs[i + 1] ** 2) / (hs[i] ** 2 - hs[i + 1] ** 2)
               for i in range(2)]
        gap = abs(ext[1] - ext[0]) / max(abs(ext[0]), 1e-300)
        if best is None or gap < best[1]:
            best = (-ext[0], gap)
        if gap <= rtol:
            return -ext[0]
    raise AccuracyError(f"derivative extrapolation unstable (relative gap {best[1]:.3g})",
                        best=best[0], estimate=best[1])
