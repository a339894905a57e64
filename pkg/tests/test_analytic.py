import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedplan import analytic as an
from seedplan.analytic import Regime
from seedplan.errors import NegativeRadicandError, NotHomogeneousError, SetTooLargeError
from seedplan.model import StreamParams

R100 = StreamParams(100)
SMALL = StreamParams(100, 0.1, 1.7)
LARGE = StreamParams(100, 0.1, 25)


# ------------------------------------------------------------ overhead-free


def test_perfect_set_examples():
    assert an.eta_perfect_set(1, 500, 100) == 0
    assert an.eta_perfect_set(100, 5000, 100) == Fraction(99, 100)
    assert an.eta_perfect_set(10, 2000, 100) == Fraction(45, 100)


def test_fanout_single_examples():
    assert an.eta_fanout_single(100, 4, 100) == Fraction(3, 4)
    assert an.eta_fanout_single(300, 2, 100) == Fraction(1, 3)
    assert an.eta_fanout_single(77, 1, 100) == 0


@given(st.integers(1, 50), st.integers(1, 10**4))
def test_fanout_with_full_fanout_matches_perfect(n_l, u):
    # c = N_L and rc >= u
    if 100 * n_l >= u:
        assert an.eta_fanout_single(u, n_l, 100) == an.eta_perfect_set(n_l, u, 100)


def test_homogeneous_set():
    eta, bound = an.eta_fanout_homogeneous_set([(200, 2)], 3, 100)
    assert (eta, bound) == (Fraction(1, 2), 2)
    eta, bound = an.eta_fanout_homogeneous_set([(100, 4)] * 3, 9, 100)
    assert eta == Fraction(3, 4)
    with pytest.raises(SetTooLargeError):
        an.eta_fanout_homogeneous_set([(300, 2)], 5, 100)
    with pytest.raises(SetTooLargeError):
        an.eta_fanout_homogeneous_set([(200, 2)] * 3, 3, 100)
    with pytest.raises(NotHomogeneousError):
        an.eta_fanout_homogeneous_set([(200, 2), (100, 2)], 5, 100)


# ------------------------------------------------------------ linear overhead


def test_given_u_c_examples():
    assert an.eta_given_u_c(SMALL, 100, 8) == pytest.approx(0.756 / 1.1, abs=1e-12)
    assert an.eta_given_u_c(SMALL, 100, 1) == 0
    assert an.eta_given_u_c(R100, 300, 3) == pytest.approx(2 / 3)


def test_exact_examples():
    # frozen from brute_force_fanout, an independent enumeration over every c
    res = an.eta_overhead_exact(SMALL, 100, 10**6)
    assert (res.c_opt, res.regime) == (8, Regime.MEDIUM)
    assert res.eta == pytest.approx(0.6872727272727273, abs=1e-12)
    res = an.eta_overhead_exact(LARGE, 100, 10**6)
    assert res.c_opt == 2
    assert res.eta == pytest.approx(0.22727272727272727, abs=1e-12)
    assert an.eta_overhead_exact(SMALL, 2 * 1.7, 50).eta == 0
    assert an.eta_overhead_exact(SMALL, 2 * 1.7, 50).regime is Regime.ZERO
    over = an.eta_overhead_exact(SMALL, 2 * SMALL.R, 2)
    assert over.regime is Regime.OVERPROVISIONED
    assert over.eta == pytest.approx(100 / (2 * SMALL.R))


def test_exact_notes_leecher_cap():
    res = an.eta_overhead_exact(SMALL, 100, 5)
    assert res.c_opt == 5
    assert res.note


def test_high_regime():
    u = SMALL.R**2 / SMALL.b * 1.5
    res = an.eta_overhead_exact(SMALL, u, 10**6)
    assert res.regime is Regime.HIGH
    # integer fanout keeps the input just below the full stream
    assert 99 < res.input_rate <= 100
    assert res.eta == pytest.approx(an.eta_given_u_c(SMALL, u, res.c_opt))


def test_continuous_examples():
    assert an.eta_overhead_continuous(SMALL, 100) == pytest.approx((1 - math.sqrt(0.017)) ** 2 / 1.1)
    assert an.eta_overhead_continuous(SMALL, 100) == pytest.approx(0.68748, abs=1e-5)
    u = SMALL.R**2 / SMALL.b
    r, R, b = 100, SMALL.R, SMALL.b
    assert an.eta_overhead_continuous(SMALL, u) == pytest.approx(r / R - r * b / R**2, rel=1e-12)
    assert an.eta_overhead_continuous(SMALL, u * (1 + 1e-12)) == pytest.approx(r / R - r * b / R**2, rel=1e-9)
    tiny = StreamParams(100, 0.1, 1e-12)
    assert an.eta_overhead_continuous(tiny, 100) == pytest.approx(1 / 1.1, rel=1e-5)


def test_epsilon_examples():
    assert an.epsilon_bound(SMALL, 100) == pytest.approx(0.017**1.5 / 1.1, rel=1e-12)
    assert an.epsilon_bound(SMALL, 100) == pytest.approx(0.002015, abs=1e-6)
    assert an.epsilon_bound(R100, 100) == 0
    # at u = R^2/b the high-regime terms b/u and (b/R)^2 coincide
    u = SMALL.R**2 / SMALL.b
    assert SMALL.b / u == pytest.approx((SMALL.b / SMALL.R) ** 2, rel=1e-12)


def test_input_r_examples():
    assert an.eta_input_r(SMALL, 100) == 0
    assert an.eta_input_r(SMALL, 0) == 0
    # frozen: max of the two arms evaluated independently below
    u = 2 * SMALL.R
    arm1 = 100 * (2 - 1) / u
    arm2 = (1 - 1.7 / u * 2) / 1.1 - 100 / u
    assert an.eta_input_r(SMALL, u) == pytest.approx(max(arm1, arm2))
    assert an.eta_input_r(SMALL, u) == pytest.approx(0.4477, abs=1e-4)


def test_general_c_opt():
    assert an.c_opt_general(SMALL, 100) == pytest.approx(math.sqrt(100 / 1.7), rel=1e-12)
    assert an.c_opt_general(SMALL, 100) == pytest.approx(7.670, abs=1e-3)
    g = StreamParams(100, 0.1, 1.7, 0.1, 1.7)
    assert an.c_opt_general(g, 100) == pytest.approx(7.858, abs=1e-3)
    with pytest.raises(NegativeRadicandError):
        an.c_opt_general(StreamParams(100, 0.1, 1.7, 0.1, 50), 1)


def test_general_c_opt_maximises_general_efficiency():
    g = StreamParams(100, 0.1, 1.7, 0.1, 1.7)
    for u in (50.0, 100.0, 300.0):
        c = an.c_opt_general(g, u)
        best = an.eta_general_continuous(g, u, c)
        for dc in (-0.05, 0.05):
            assert an.eta_general_continuous(g, u, c + dc) <= best + 1e-12


# ------------------------------------------------------------ properties

us = st.floats(0.1, 5000, allow_nan=False)
settings_ = st.sampled_from([SMALL, LARGE])


@settings(max_examples=300, deadline=None)
@given(settings_, us, st.integers(1, 400))
def test_candidate_search_matches_brute_force(p, u, n_l):
    c1, e1 = an.argmax_fanout(p, u, n_l)
    c2, e2 = an.brute_force_fanout(p, u, n_l)
    assert e1 == pytest.approx(e2, abs=1e-12)
    assert c1 == c2


@settings(max_examples=300, deadline=None)
@given(settings_, us, st.integers(1, 400))
def test_exact_below_eta_max(p, u, n_l):
    assert an.eta_overhead_exact(p, u, n_l).eta <= p.eta_max + 1e-12


@settings(max_examples=300, deadline=None)
@given(settings_, us)
def test_epsilon_guarantee(p, u):
    n_l = 10**6
    if 2 * p.b < u < n_l * p.R:
        gap = abs(an.eta_overhead_exact(p, u, n_l).eta - an.eta_overhead_continuous(p, u))
        assert gap <= an.epsilon_bound(p, u) + 1e-12


@settings(max_examples=200, deadline=None)
@given(settings_, us, us)
def test_continuous_monotone(p, u1, u2):
    lo, hi = sorted((u1, u2))
    assert an.eta_overhead_continuous(p, lo) <= an.eta_overhead_continuous(p, hi) + 1e-12


@settings(max_examples=300, deadline=None)
@given(settings_, us)
def test_input_shaping_never_helps_less(p, u):
    assert an.eta_input_r(p, u) <= an.eta_overhead_exact(p, u, 10**6).eta + 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(1, 5000), st.integers(1, 500))
def test_overhead_free_reduces_to_fanout(u, n_l):
    assert an.eta_overhead_exact(R100, u, n_l).eta == pytest.approx(
        float(an.eta_fanout_single(u, n_l, 100)), abs=1e-12
    )
