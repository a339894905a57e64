import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedplan import analytic as an
from seedplan import builders as bd
from seedplan.errors import (
    GranularityError,
    NotHomogeneousError,
    PreconditionError,
    RootingError,
    SetTooLargeError,
)
from seedplan.model import Model, Population, SeederSpec, StreamParams, measure_efficiency, validate_scheme

R100 = StreamParams(100)
SMALL = StreamParams(100, 0.1, 1.7)
LARGE = StreamParams(100, 0.1, 25)


def check(params, pop, scheme, model):
    res = validate_scheme(params, pop, scheme, model)
    assert res.ok, res.violations[:3]
    return measure_efficiency(params, pop, scheme, model=model)


# ------------------------------------------------------------ perfect broadcast


def test_broadcast_half_stream_seeder():
    pop = Population(4, 4, [SeederSpec(200)])
    s = bd.build_perfect_broadcast(pop, R100, slot_count=8)
    rep = check(R100, pop, s, Model.PERFECT)
    # share u/N_L = r/2, i.e. 4 slots of r/8
    assert rep.seeder("S0").input_rate == Fraction(50)
    assert rep.seeder("S0").fanout == 4
    assert rep.set_efficiency == Fraction(3, 4)


def test_broadcast_without_seeders():
    pop = Population(3, 3)
    s = bd.build_perfect_broadcast(pop, R100)
    assert all(p == "server" for p, _ in s.edges)
    check(R100, pop, s, Model.PERFECT)


def test_broadcast_overprovisioned():
    pop = Population(5, 5, [SeederSpec(500), SeederSpec(500)])
    s = bd.build_perfect_broadcast(pop, R100, slot_count=2)
    assert check(R100, pop, s, Model.PERFECT).set_efficiency == Fraction(4, 5) / 2


def test_broadcast_granularity():
    with pytest.raises(GranularityError):
        bd.build_perfect_broadcast(Population(3, 3, [SeederSpec(100)]), R100, slot_count=4)


# ------------------------------------------------------------ homogeneous trees


def test_trees_c2():
    pop = Population(5, 5, [SeederSpec(100, 2)] * 8)
    s = bd.build_homogeneous_trees(pop, R100, slot_count=2)
    rep = check(R100, pop, s, Model.FANOUT)
    assert all(e.eta == Fraction(1, 2) for e in rep.per_seeder)
    with pytest.raises(SetTooLargeError):
        bd.build_homogeneous_trees(Population(5, 5, [SeederSpec(100, 2)] * 9), R100, slot_count=2)


def test_trees_single_full_fanout_is_broadcast():
    pop = Population(4, 4, [SeederSpec(400, 4)])
    s = bd.build_homogeneous_trees(pop, R100)
    rep = check(R100, pop, s, Model.FANOUT)
    assert rep.seeder("S0").fanout == 4
    assert rep.set_efficiency == Fraction(3, 4)


def test_trees_errors():
    with pytest.raises(NotHomogeneousError):
        bd.build_homogeneous_trees(Population(5, 5, [SeederSpec(100, 2), SeederSpec(100, 3)]), R100)
    with pytest.raises(GranularityError):
        bd.build_homogeneous_trees(Population(5, 5, [SeederSpec(100, 3)]), R100, slot_count=2)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.sampled_from([1, 2, 4, 5]), st.integers(1, 20))
def test_trees_match_formula(n_l, c, parts, n_x):
    c = min(c, n_l)
    e = Fraction(100, parts)
    bound = ((n_l - 1) // (c - 1)) * parts if c > 1 else n_x
    n_x = min(n_x, max(bound, 1))
    pop = Population(n_l, n_l, [SeederSpec(float(e * c), c)] * n_x)
    s = bd.build_homogeneous_trees(pop, R100, slot_count=parts * 2)
    rep = check(R100, pop, s, Model.FANOUT)
    eta, _ = an.eta_fanout_homogeneous_set([(e * c, c)] * n_x, n_l, 100)
    assert rep.set_efficiency == eta


# ------------------------------------------------------------ mono-rate


def test_monorate_example():
    pop = Population(50, 40, [SeederSpec(100)] * 6)
    plan, s = bd.build_monorate(pop, SMALL)
    assert plan.E == pytest.approx(math.sqrt(85))
    assert plan.e == pytest.approx(6.836, abs=1e-3)
    assert set(plan.fanouts.values()) == {10}
    rep = check(SMALL, pop, s, Model.OVERHEAD)
    eta = float(rep.set_efficiency)
    assert eta == pytest.approx(9 * float(plan.e_rounded) / 100)
    assert eta == pytest.approx(0.6152, abs=1e-3)
    lo, hi = plan.bracket
    assert (lo, hi) == (pytest.approx(0.60474, abs=1e-5), pytest.approx(0.68748, abs=1e-5))
    assert lo < eta <= hi


def test_monorate_preconditions():
    limit = 2 * SMALL.R**2 / SMALL.b
    bd.build_monorate(Population(400, 400, [SeederSpec(limit)]), SMALL)
    with pytest.raises(PreconditionError) as exc:
        bd.build_monorate(Population(400, 400, [SeederSpec(limit * 1.01)]), SMALL)
    assert exc.value.code == "PRECONDITION_UBAR"
    with pytest.raises(PreconditionError):
        bd.build_monorate(Population(4, 4, [SeederSpec(100)]), R100)
    with pytest.raises(PreconditionError):
        bd.build_monorate(Population(4, 4, [SeederSpec(100)]), StreamParams(100, 0.1, 1.7, 0.1, 1.7))


# ------------------------------------------------------------ dichotomic levels


def test_choose_level_example():
    k, eta = bd.choose_level(SMALL, 100, 5)
    assert k == 3
    assert eta == pytest.approx(0.65625)
    outs3, e3 = bd.level_descent(SMALL, 100, 3, 5)
    outs4, e4 = bd.level_descent(SMALL, 100, 4, 5)
    assert e3 == e4


def test_choose_level_unusable():
    assert bd.choose_level(SMALL, 2.0, 5) == (None, 0.0)


def test_choose_level_overhead_free():
    k, eta = bd.choose_level(R100, 200, 0, 2)
    assert (k, eta) == (0, 0.5)
    assert eta == pytest.approx(an.eta_overhead_exact(R100, 200, 2).eta)


def test_default_k_max():
    assert bd.default_k_max(SMALL) == 5
    assert bd.default_k_max(LARGE) == 2


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([SMALL, LARGE]), st.floats(0, 3000), st.integers(1, 200))
def test_bin_never_beats_optimum(p, u, n_l):
    _, eta = bd.choose_level(p, u, bd.default_k_max(p), n_l)
    assert eta <= an.eta_overhead_exact(p, u, n_l).eta + 1e-12


# ------------------------------------------------------------ dichotomic builder


def test_dichotomic_single_seeder():
    pop = Population(21, 20, [SeederSpec(100)])
    plan, s = bd.build_dichotomic(pop, SMALL)
    rep = check(SMALL, pop, s, Model.OVERHEAD)
    assert plan.waste == 0 and plan.dropped == 0
    assert float(rep.set_efficiency) == pytest.approx(bd.choose_level(SMALL, 100, 5, 20)[1])


def test_dichotomic_homogeneous_bracket():
    pop = Population(41, 40, [SeederSpec(150)] * 12)
    plan, s = bd.build_dichotomic(pop, SMALL)
    eta = float(check(SMALL, pop, s, Model.OVERHEAD).set_efficiency)
    assert plan.lower_bound - 1e-12 <= eta <= plan.mean_eta_bin + 1e-12


def test_dichotomic_preconditions():
    pop = Population(3, 2, [SeederSpec(300)])
    with pytest.raises(PreconditionError) as exc:
        bd.build_dichotomic(pop, SMALL)
    assert exc.value.code == "PRECONDITION_UX"
    with pytest.raises(GranularityError):
        bd.build_dichotomic(Population(5, 4, [SeederSpec(100)]), SMALL, k_max=3, slot_count=12)


def test_dichotomic_reports_rooting_failure():
    # a single server copy cannot root any level-3 tree and there is no parent tree
    pop = Population(1, 20, [SeederSpec(200)] * 5)
    with pytest.raises(RootingError) as exc:
        bd.build_dichotomic(pop, SMALL)
    assert exc.value.code == "ROOTING_FAILED"


def test_dichotomic_parent_leaf_rooting():
    # found by random search: the server is too tight for one level-2 root
    pop = Population(7, 12, [SeederSpec(u) for u in (236, 202, 74, 66, 345, 282)])
    plan, s = bd.build_dichotomic(pop, SMALL, k_max=2)
    assert plan.waste == 50
    assert any(t["root_feed_level"] < t["level"] for t in plan.to_dict()["trees"])
    eta = float(check(SMALL, pop, s, Model.OVERHEAD).set_efficiency)
    assert plan.lower_bound <= eta <= plan.mean_eta_bin
    assert plan.mean_eta_bin - eta <= 50 / sum((236, 202, 74, 66, 345, 282)) + 1e-12


def test_dichotomic_random_sets():
    rng = random.Random(7)
    built = 0
    for _ in range(60):
        p = rng.choice([SMALL, LARGE])
        n_l = rng.randint(3, 30)
        ups = [rng.uniform(2 * p.b, 500) for _ in range(rng.randint(1, 10))]
        scale = min(1.0, n_l * p.R / sum(ups))
        pop = Population(n_l + rng.choice([1, 32]), n_l, [SeederSpec(u * scale) for u in ups])
        try:
            plan, s = bd.build_dichotomic(pop, p)
        except RootingError:
            continue
        built += 1
        eta = float(check(p, pop, s, Model.OVERHEAD).set_efficiency)
        assert plan.lower_bound - 1e-12 <= eta <= plan.mean_eta_bin + 1e-12
        for row in plan.seeders:
            assert row["eta_bin"] <= an.eta_overhead_exact(p, row["upload"], n_l).eta + 1e-12
        # server hop, one logarithmic tree, one hop per rooting level
        assert plan.depth <= 2 + math.ceil(math.log2(n_l)) + plan.k_max
    assert built >= 30


def test_dichotomic_is_deterministic():
    pop = Population(33, 30, [SeederSpec(u) for u in (50, 120, 80, 300, 40)])
    assert bd.build_dichotomic(pop, SMALL) == bd.build_dichotomic(pop, SMALL)
