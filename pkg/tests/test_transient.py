import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from erlanga.errors import BranchAmbiguityError, ParameterError
from erlanga.inversion import invert
from erlanga.model import ModelParams, death_rates, steady_state
from erlanga.oracle import transform_oracle, transient_grid
from erlanga.scalar import cs_sum
from erlanga.special import G, H, I
from erlanga.transient import (blocking_transform, busy_transform, jagerman_blocking, mmm_roots,
                               p_mm_inf_closed, p_mm_inf_spectral, phat, phat_loss,
                               phat_mm_inf, phat_mmm)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# random Erlang A draws: (rho, m, eta, n0, complex theta)
erlang_a = st.tuples(st.floats(0.2, 8), st.integers(1, 6), st.floats(0.2, 4),
                     st.integers(0, 12), st.floats(0.1, 4), st.floats(-4, 4))


@settings(max_examples=25, deadline=None)
@given(erlang_a)
def test_matches_resolvent(d):
    rho, m, eta, n0, tr, ti = d
    p = ModelParams.normalized(rho, m, eta)
    theta = complex(tr, ti)
    ns = sorted({0, max(n0 - 1, 0), n0, n0 + 1, max(m - 1, 0), m, m + 1, n0 + 5})
    got = phat(p, n0, ns)(theta)
    ref = transform_oracle(p, n0, theta)[ns]
    scale = np.abs(ref).max()
    assert np.max(np.abs(got - ref)) < 1e-9 * scale


@pytest.mark.parametrize("rho,m,eta,n0", [(0.8, 2, 0.5, 0), (2.5, 3, 1.7, 3), (4.0, 2, 0.3, 7)])
def test_defining_equations(rho, m, eta, n0):
    # (rho + theta + d_n) P_n - rho P_{n-1} - d_{n+1} P_{n+1} = delta(n, n0)
    p = ModelParams.normalized(rho, m, eta)
    theta = 0.6 + 0.9j
    ns = sorted({k for k in (0, n0 - 1, n0, n0 + 1, m - 1, m, m + 1) if k >= 0})
    P = phat(p, n0, list(range(max(ns) + 2)))(theta)
    d = death_rates(p, len(P))
    for n in ns:
        lo = rho * P[n - 1] if n > 0 else 0.0
        r = (rho + theta + d[n]) * P[n] - lo - d[n + 1] * P[n + 1] - (n == n0)
        assert abs(r) < 1e-8 * max(abs((rho + theta + d[n]) * P[n]), 1.0)


def test_total_probability():
    p = ModelParams.normalized(0.8, 2, 0.5)
    v = phat(p, 0, list(range(60)))(1.0)
    assert rel(v.sum(), 1.0) < 1e-8


@pytest.mark.parametrize("rho,m,eta,n0", [(1.6, 2, 0.5, 0), (0.8, 1, 2.0, 5), (6.0, 5, 1.0, 5)])
def test_stationary_limit(rho, m, eta, n0):
    p = ModelParams.normalized(rho, m, eta)
    ss = steady_state(p, 15).values
    theta = 1e-6
    h = phat(p, n0, list(range(16)))
    got = theta * h(theta).real
    # theta P(theta) carries an O(theta) bias, so compare against the largest entry
    assert np.max(np.abs(got - ss)) < 1e-5 * ss.max()
    # removing that bias leaves entrywise agreement
    extrap = 2 * got - 2 * theta * h(2 * theta).real
    assert np.max(np.abs(extrap - ss) / ss) < 1e-5


def test_inversion_matches_uniformization():
    p = ModelParams.normalized(1.0, 2, 2.0)
    ts = [0.5, 1.0, 2.0]
    res = invert(phat(p, 4, 1), ts)
    ref, _ = transient_grid(p, 4, ts)
    assert np.max(np.abs(res.values - ref[:, 1])) < 1e-6


def test_inverted_probabilities_in_range():
    p = ModelParams.normalized(3.0, 2, 0.5)
    res = invert(phat(p, 0, list(range(20))), [0.1, 1.0, 4.0])
    assert res.values.min() >= -1e-7 and res.values.max() <= 1 + 1e-7


@pytest.mark.parametrize("n0", [0, 2, 5])
def test_initial_condition_recovery(n0):
    theta = 1e4
    ns = list(range(8))
    delta = np.array([float(n == n0) for n in ns])
    handles = [phat(ModelParams.normalized(1.5, 2, 0.7), n0, ns),
               phat_mmm(ModelParams.normalized(1.5, 3, 0.0), n0, ns),
               phat_mm_inf(1.5, n0, ns)]
    for h in handles:
        assert np.max(np.abs(theta * h(theta) - delta)) < 1e-3
    if n0 <= 3:
        h = phat_loss(1.5, 3, n0, list(range(4)))
        assert np.max(np.abs(theta * h(theta) - delta[:4])) < 1e-3


def test_physical_time_units():
    # doubling lam and mu doubles the speed of the process
    slow = ModelParams(lam=1.0, mu=1.0, m=2, eta=0.5)
    fast = ModelParams(lam=2.0, mu=2.0, m=2, eta=1.0)
    a = invert(phat(slow, 0, 2), [2.0]).values
    b = invert(phat(fast, 0, 2), [1.0]).values
    assert np.allclose(a, b, atol=1e-9)


# --- unit abandonment rate (M/M/inf) --------------------------------------

@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 8), st.integers(0, 10), st.integers(0, 10),
       st.floats(0.1, 4), st.floats(-4, 4), st.integers(1, 4))
def test_mm_inf_equals_general(rho, n0, n, tr, ti, m):
    theta = complex(tr, ti)
    a = phat_mm_inf(rho, n0, n)(theta)
    b = phat(ModelParams.normalized(rho, m, 1.0), n0, n)(theta)
    assert rel(b, a) < 1e-9


def test_mm_inf_closed_form_values():
    assert p_mm_inf_closed(1.0, 0, 0, 1.0) == pytest.approx(math.exp(-(1 - math.exp(-1))), rel=1e-14)
    assert p_mm_inf_closed(2.0, 3, 3, 0.0) == 1.0
    assert p_mm_inf_closed(2.0, 3, 1, 0.0) == 0.0
    assert p_mm_inf_closed(2.0, 3, 4, 60.0) == pytest.approx(math.exp(-2) * 16 / 24, rel=1e-12)


@pytest.mark.parametrize("rho", [0.5, 1.0, 4.0])
def test_mm_inf_spectral_agrees(rho):
    for n0 in (0, 3):
        for n in range(16):
            for t in (0.1, 0.5, 1.0, 2.0, 5.0):
                assert abs(p_mm_inf_spectral(rho, n0, n, t) - p_mm_inf_closed(rho, n0, n, t)) < 1e-10


def test_mm_inf_stationary_limit():
    theta = 1e-7
    v = theta * phat_mm_inf(2.0, 1, list(range(10)))(theta).real
    ref = [math.exp(-2) * 2**n / math.factorial(n) for n in range(10)]
    assert np.max(np.abs(v - ref)) < 1e-6


# --- M/M/m ------------------------------------------------------------------

def test_mmm_roots_vieta():
    rho, m, theta = 1.7, 3, 0.4 + 2j
    A, B, _ = mmm_roots(rho, m, theta)
    assert abs(A * B - rho / m) < 1e-14
    assert abs(A + B - (m + rho + theta) / m) < 1e-14


def test_mmm_branch_ambiguity():
    # (m + rho + theta)^2 = 4 m rho - 1 with theta real and negative
    rho, m = 1.0, 1
    theta = math.sqrt(3) - 2
    with pytest.raises(BranchAmbiguityError):
        mmm_roots(rho, m, theta)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 6), st.integers(1, 5), st.integers(0, 10), st.floats(0.1, 3), st.floats(-4, 4))
def test_mmm_matches_resolvent(rho, m, n0, tr, ti):
    p = ModelParams.normalized(rho, m, 0.0)
    theta = complex(tr, ti)
    ns = sorted({0, max(n0 - 1, 0), n0, n0 + 1, max(m - 1, 0), m, m + 1, m + 6})
    ref = transform_oracle(p, n0, theta, n_max=400)[ns]
    got = phat(p, n0, ns)(theta)
    assert np.max(np.abs(got - ref)) < 1e-9 * np.abs(ref).max()


def test_mmm_inversion_matches_uniformization():
    p = ModelParams.normalized(1.5, 2, 0.0)
    res = invert(phat_mmm(p, 0, 3), [1.0])
    ref, _ = transient_grid(p, 0, [1.0])
    assert abs(res.values[0] - ref[0, 3]) < 1e-6


def test_small_eta_approaches_mmm():
    theta = 0.8 + 0.5j
    ns = list(range(8))
    a = phat(ModelParams.normalized(1.5, 2, 1e-4), 1, ns)(theta)
    b = phat_mmm(ModelParams.normalized(1.5, 2, 0.0), 1, ns)(theta)
    assert np.max(np.abs(a - b)) < 1e-3


def test_mmm_rejects_abandonment():
    with pytest.raises(ParameterError):
        phat_mmm(ModelParams.normalized(1.0, 2, 0.5), 0, 0)


# --- loss system ----------------------------------------------------------

@pytest.mark.parametrize("rho,m,n0", [(0.7, 1, 0), (2.0, 3, 1), (6.0, 4, 4)])
def test_loss_matches_resolvent(rho, m, n0):
    theta = 0.4 + 1.3j
    p = ModelParams.normalized(rho, m, 1.0)
    ref = transform_oracle(p, n0, theta, n_max=m)
    got = phat_loss(rho, m, n0, list(range(m + 1)))(theta)
    assert np.max(np.abs(got - ref)) < 1e-12 * np.abs(ref).max()


def test_loss_erlang_b_limit():
    rho, m = 3.0, 4
    theta = 1e-8
    got = theta * phat_loss(rho, m, 0, m)(theta).real
    b = (rho**m / math.factorial(m)) / sum(rho**k / math.factorial(k) for k in range(m + 1))
    assert rel(got, b) < 1e-6


def test_large_eta_approaches_loss():
    rho, m, n0, theta = 2.0, 3, 1, 0.9 + 0.4j
    ns = list(range(m + 1))
    ref = phat_loss(rho, m, n0, ns)(theta)
    diffs = [np.max(np.abs(phat(ModelParams.normalized(rho, m, eta), n0, ns)(theta) - ref))
             for eta in (1e2, 1e3, 1e4)]
    assert diffs[0] > diffs[1] > diffs[2]
    for a, b in zip(diffs, diffs[1:]):
        assert 5 < a / b < 20


def test_loss_rejects_states_above_m():
    with pytest.raises(ParameterError):
        phat_loss(1.0, 2, 3, 0)
    with pytest.raises(ParameterError):
        phat_loss(1.0, 2, 0, [0, 3])


@pytest.mark.parametrize("rho", [0.5, 2.0, 8.0])
@pytest.mark.parametrize("m", [2, 5, 10])
def test_blocking_forms_agree(rho, m):
    for theta in (0.3, 1.0, 3.0):
        for n0 in (0, m // 2, m):
            ref = blocking_transform(rho, m, n0, theta, "gamma_sum")
            assert rel(blocking_transform(rho, m, n0, theta, "f_ratio"), ref) < 1e-10
            assert rel(blocking_transform(rho, m, n0, theta, "shifted"), ref) < 1e-10
        assert rel(phat_loss(rho, m, 0, m)(theta), blocking_transform(rho, m, 0, theta)) < 1e-10
        assert rel(jagerman_blocking(rho, m, theta), blocking_transform(rho, m, 0, theta)) < 1e-10


def test_blocking_bad_form():
    with pytest.raises(ParameterError):
        blocking_transform(1.0, 2, 0, 1.0, "other")
    with pytest.raises(ParameterError):
        jagerman_blocking(1.0, 2, -1.0)


# --- all servers busy -------------------------------------------------------

@pytest.mark.parametrize("rho,m,eta", [(1.3, 3, 0.7), (4.0, 2, 2.5)])
def test_busy_formulas_agree_at_m(rho, m, eta):
    p = ModelParams.normalized(rho, m, eta)
    for theta in (0.7 + 1j, 2.0):
        a = busy_transform(p, m, "below")(theta)
        b = busy_transform(p, m, "above")(theta)
        assert rel(a, b) < 1e-9


@pytest.mark.parametrize("n0", [0, 2, 3, 6])
def test_busy_equals_tail_sum(n0):
    p = ModelParams.normalized(1.3, 3, 0.7)
    theta = 0.5 + 0.5j
    tail = phat(p, n0, list(range(3, 80)))(theta).sum()
    assert abs(busy_transform(p, n0)(theta) - tail) < 1e-8


def test_busy_stationary_limit():
    p = ModelParams.normalized(2.5, 3, 0.6)
    theta = 1e-6
    ss = steady_state(p)
    ref = ss.values[3:].sum() + ss.tail_mass
    assert rel(theta * busy_transform(p, 1)(theta).real, ref) < 1e-5


def test_busy_bad_formula():
    p = ModelParams.normalized(1.3, 3, 0.7)
    with pytest.raises(ParameterError):
        busy_transform(p, 5, "below")
    with pytest.raises(ParameterError):
        busy_transform(p, 1, "sideways")
    with pytest.raises(ParameterError):
        busy_transform(ModelParams.normalized(1.3, 3, 0.0), 1)


# --- shift and sum identities ---------------------------------------------

@pytest.mark.parametrize("rho,m,eta,n0", [(1.3, 3, 0.7, 7), (4.0, 2, 2.5, 5), (0.6, 1, 0.4, 4)])
def test_shift_sum_identities(rho, m, eta, n0):
    p = ModelParams.normalized(rho, m, eta)
    for theta in (0.5, 1.2 + 0.8j):
        th2 = theta + eta
        tail = cs_sum(H(n, theta, p) for n in range(m, m + 200))
        assert rel(tail.value, H(m - 1, th2, p).value) < 1e-8
        s_i = cs_sum(I(n, theta, p) for n in range(m, n0))
        assert rel(s_i.value, (I(n0 - 1, th2, p) - I(m - 1, th2, p)).value) < 1e-8
        s_h = cs_sum(H(n, theta, p) for n in range(m, n0))
        assert rel(s_h.value, (H(m - 1, th2, p) - H(n0 - 1, th2, p)).value) < 1e-8


@pytest.mark.parametrize("rho,theta", [(0.5, 0.3), (2.0, 1.0 + 2j), (7.0, 4.0 - 1j)])
def test_boundary_identity(rho, theta):
    lhs = G(1, theta, rho) - (rho + theta) * G(0, theta, rho)
    ref = -cmath.exp(rho + theta * math.log(rho)) / gamma(theta)
    assert rel(lhs.value, ref) < 1e-9
