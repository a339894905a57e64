import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedplan import analytic as an
from seedplan import dimensioning as dm
from seedplan.errors import NoSolutionError, SeedplanError
from seedplan.model import StreamParams

SMALL = StreamParams(100, 0.1, 1.7)
LARGE = StreamParams(100, 0.1, 25)


def grid_search(params, beta, step=0.01):
    """Independent scan: first u on a fine grid satisfying the scalability inequality."""
    i = 1
    while True:
        u = 2 * params.b + i * step
        _, eta = an.brute_force_fanout(params, u, 10**6)
        if beta * eta >= params.r / u - params.eta_max:
            return u
        i += 1


def test_conservation_examples():
    assert dm.conservation_check(1, 0, 0, 0).margin == 0
    assert dm.conservation_check(0.5, 0.5, 1, 0).margin == 0
    res = dm.conservation_check(0.8, 0, 0, 0, (SMALL.eta_max, 1, 1))
    assert res.margin == pytest.approx(-0.284, abs=1e-3)
    assert not res.solvable
    with pytest.raises(SeedplanError):
        dm.conservation_check(-1, 0, 0, 0)


unit = st.floats(0, 1)
nonneg = st.floats(0, 5)


@given(nonneg, nonneg, nonneg, nonneg, unit, unit, unit, st.floats(0, 1))
def test_conservation_monotone(al, as_, beta, nc, el, es, ec, bump):
    base = dm.conservation_check(al, as_, beta, nc, (el, es, ec)).margin
    assert dm.conservation_check(al + bump, as_, beta, nc, (el, es, ec)).margin >= base - 1e-12
    assert dm.conservation_check(al, as_ + bump, beta, nc, (el, es, ec)).margin >= base - 1e-12
    assert dm.conservation_check(al, as_, beta, nc, (min(1, el + bump), es, ec)).margin >= base - 1e-12


def test_beta_zero_is_R():
    assert dm.required_bandwidth(dm.ScalabilityQuery(SMALL, 0)) == SMALL.R
    assert dm.required_bandwidth(dm.ScalabilityQuery(SMALL, 0)) == pytest.approx(111.7)
    assert dm.required_bandwidth(dm.ScalabilityQuery(LARGE, 0)) == 135


@given(st.floats(0, 1), st.floats(0, 50))
def test_beta_zero_is_R_for_any_overhead(a, b):
    p = StreamParams(100, a, b)
    assert dm.required_bandwidth(dm.ScalabilityQuery(p, 0)) == p.R


def test_beta_one_matches_grid_search():
    u = dm.required_bandwidth(dm.ScalabilityQuery(SMALL, 1))
    assert abs(u - grid_search(SMALL, 1)) <= 0.1
    assert u == pytest.approx(65.1, abs=0.1)


@pytest.mark.parametrize("p", [SMALL, LARGE])
def test_required_bandwidth_non_increasing(p):
    us = [dm.required_bandwidth(dm.ScalabilityQuery(p, i * 0.05)) for i in range(81)]
    assert all(x >= y for x, y in zip(us, us[1:]))


def test_no_solution():
    with pytest.raises(NoSolutionError):
        dm.required_bandwidth(dm.ScalabilityQuery(SMALL, 0, eta_leecher=0))
    with pytest.raises(NoSolutionError):
        dm.required_bandwidth(dm.ScalabilityQuery(SMALL, 0.01, eta_leecher=0, cap=50))


def test_query_validation():
    with pytest.raises(SeedplanError):
        dm.ScalabilityQuery(SMALL, -1)
    with pytest.raises(SeedplanError):
        dm.ScalabilityQuery(SMALL, 1, eta_leecher=0.95)


# ------------------------------------------------------------ sweeps


def test_sweep_points():
    assert dm.sweep_points(0, 1, 0.25) == [0, 0.25, 0.5, 0.75, 1.0]
    assert dm.sweep_points(3.5, 3.0, 0.1) == []
    with pytest.raises(SeedplanError):
        dm.sweep_points(0, 1, 0)


def test_empty_sweep():
    header, rows = dm.sweep("eta_vs_u", SMALL, 10, 5, 1)
    assert rows == []
    assert dm.to_csv(header, rows) == "u,eta_exact,eta_continuous,epsilon_bound,c_opt\n"


@pytest.mark.parametrize("p", [SMALL, LARGE])
def test_eta_vs_u_within_epsilon(p):
    _, rows = dm.sweep("eta_vs_u", p, 2 * p.b + 0.1, 1000, 0.5)
    for u, exact, cont, eps, _ in rows:
        assert abs(exact - cont) <= eps + 1e-12


@pytest.mark.parametrize("gen", ["eta_rel_vs_u", "input_r_vs_u"])
def test_relative_series_in_unit_interval(gen):
    for p in (SMALL, LARGE):
        _, rows = dm.sweep(gen, p, 2 * p.b + 0.1, 2000, 5)
        assert all(0 <= v <= 1 + 1e-12 for row in rows for v in row[1:])


def test_bin_vs_opt_and_general():
    _, rows = dm.sweep("bin_vs_opt", SMALL, 5, 500, 5, n_leechers=50)
    assert all(row[2] <= row[1] + 1e-12 for row in rows)
    header, rows = dm.sweep("general_vs_sender", SMALL, 10, 200, 10)
    assert header[2] == "c_opt_general"
    # receiver costs reduce efficiency
    assert all(row[4] <= row[3] + 1e-12 for row in rows)


def test_u_vs_beta_anchor():
    _, rows = dm.sweep("u_vs_beta", SMALL, 0, 1, 0.5)
    assert rows[0][1] == SMALL.R
    assert rows[0][2] == 100


def test_sweep_deterministic_and_parallel_invariant(monkeypatch):
    one = dm.to_csv(*dm.sweep("eta_vs_u", LARGE, 50.1, 300, 0.7))
    assert one == dm.to_csv(*dm.sweep("eta_vs_u", LARGE, 50.1, 300, 0.7))
    monkeypatch.setenv("SEEDPLAN_THREADS", "3")
    assert one == dm.to_csv(*dm.sweep("eta_vs_u", LARGE, 50.1, 300, 0.7))


def test_unknown_generator():
    with pytest.raises(SeedplanError):
        dm.sweep("nope", SMALL, 0, 1, 1)
