"""Constructive diffusion schemes: broadcast, substream trees, mono-rate, dichotomic."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from seedplan.analytic import eta_fanout_homogeneous_set
from seedplan.errors import (
    CapacityError,
    GranularityError,
    PreconditionError,
    RootingError,
    SeedplanError,
    SetTooLargeError,
)
from seedplan.model import (
    SERVER,
    DiffusionScheme,
    Model,
    Population,
    StreamParams,
    bandwidth_used,
    edge_cost,
    exact,
    node_budget,
    scheme_depth,
)


class _Edges:
    """Mutable edge accumulator used while a builder runs."""

    def __init__(self, slot_count: int):
        self.K = slot_count
        self.edges: dict[tuple[str, str], set[int]] = defaultdict(set)

    def add(self, p: str, q: str, slots: Iterable[int]) -> None:
        self.edges[(p, q)].update(slots)

    def received(self, q: str) -> set[int]:
        got: set[int] = set()
        for (_, dst), s in self.edges.items():
            if dst == q:
                got |= s
        return got

    def finish(self, params: StreamParams, pop: Population, model: Model) -> DiffusionScheme:
        """Let the server fill whatever each leecher still misses, then check its budget."""
        full = set(range(self.K))
        got: dict[str, set[int]] = defaultdict(set)
        for (_, dst), s in self.edges.items():
            got[dst] |= s
        for lid in pop.leecher_ids:
            missing = full - got[lid]
            if missing:
                self.add(SERVER, lid, missing)
        scheme = DiffusionScheme(self.K, {k: frozenset(v) for k, v in self.edges.items()})
        used = bandwidth_used(params, pop, scheme, model)[SERVER]
        budget = node_budget(params, pop, SERVER, model)
        if used > budget * (1 + 1e-9) + 1e-9:
            raise CapacityError(f"servers need {used:.6g} but have {budget:.6g}")
        return scheme


def _subset(pop: Population, subset: Iterable[str] | None) -> list[str]:
    ids = list(pop.seeder_ids if subset is None else subset)
    for sid in ids:
        pop.seeder(sid)
    return ids


def _slots(K: int, rate, r) -> int:
    """Number of slots for goodput ``rate``; raises if not a whole number."""
    n = exact(rate) * K / exact(r)
    if n.denominator != 1:
        raise GranularityError(f"rate {float(rate):.6g} is not a multiple of r/{K}")
    return int(n)


# ------------------------------------------------------------ perfect systems


def build_perfect_broadcast(
    pop: Population, params: StreamParams, subset: Iterable[str] | None = None, slot_count: int = 1
) -> DiffusionScheme:
    """Each seeder gets a distinct share from the servers and broadcasts it to every leecher."""
    ids = _subset(pop, subset)
    K, r, n = slot_count, exact(params.r), pop.n_leechers
    total = sum((exact(pop.seeder(s).upload) for s in ids), Fraction(0))
    acc = _Edges(K)
    nxt = 0
    for sid in ids:
        u = exact(pop.seeder(sid).upload)
        share = u / n if total <= n * r else u * r / total
        k = _slots(K, share, r)
        if k == 0:
            continue
        block = range(nxt, nxt + k)
        nxt += k
        acc.add(SERVER, sid, block)
        for lid in pop.leecher_ids:
            acc.add(sid, lid, block)
    return acc.finish(params, pop, Model.PERFECT)


# ------------------------------------------------------------ substream trees


@dataclass
class _Tree:
    index: int
    seeders: list[str] = field(default_factory=list)
    fanout: dict[str, int] = field(default_factory=dict)

    @property
    def leaves(self) -> int:
        if not self.seeders:
            return 0
        return sum(self.fanout.values()) - (len(self.seeders) - 1)

    def join(self, sid: str, c: int) -> None:
        self.seeders.append(sid)
        self.fanout[sid] = c

    def layout(self) -> tuple[dict[str, str], list[str]]:
        """Breadth-first placement: returns (parent of each non-root seeder, owner of each leaf)."""
        parent: dict[str, str] = {}
        open_slots: deque[str] = deque()
        for i, sid in enumerate(self.seeders):
            if i:
                parent[sid] = open_slots.popleft()
            open_slots.extend([sid] * self.fanout[sid])
        return parent, list(open_slots)


def _pack(members: Sequence[tuple[str, int]], n_trees: int, n_leechers: int) -> list[_Tree]:
    trees = [_Tree(t) for t in range(n_trees)]
    t = 0
    for sid, c in members:
        while t < n_trees and trees[t].seeders and trees[t].leaves + c - 1 > n_leechers:
            t += 1
        if t == n_trees:
            raise SetTooLargeError("seeders do not fit in the available substream trees")
        trees[t].join(sid, c)
    return trees


def _emit_trees(acc: _Edges, trees: list[_Tree], width: int, pop: Population) -> None:
    leechers = pop.leecher_ids
    for tree in trees:
        if not tree.seeders:
            continue
        block = range(tree.index * width, (tree.index + 1) * width)
        parent, leaf_owners = tree.layout()
        acc.add(SERVER, tree.seeders[0], block)
        for child, par in parent.items():
            acc.add(par, child, block)
        start = (tree.index * width) % len(leechers)
        for i, owner in enumerate(leaf_owners):
            acc.add(owner, leechers[(start + i) % len(leechers)], block)


def build_homogeneous_trees(
    pop: Population, params: StreamParams, subset: Iterable[str] | None = None, slot_count: int = 1
) -> DiffusionScheme:
    """Substream trees for a proportionally homogeneous set under the limited-fanout model."""
    ids = _subset(pop, subset)
    acc = _Edges(slot_count)
    if not ids:
        return acc.finish(params, pop, Model.FANOUT)
    specs = [pop.seeder(s) for s in ids]
    if any(s.fanout_cap is None for s in specs):
        raise SeedplanError("every seeder needs a fanout cap in the limited-fanout model")
    eta_fanout_homogeneous_set([(s.upload, s.fanout_cap) for s in specs], pop.n_leechers, params.r)
    e = exact(specs[0].upload) / specs[0].fanout_cap
    width = _slots(slot_count, e, params.r)
    if width == 0:
        raise GranularityError("substream rate is below one slot")
    trees = _pack([(sid, s.fanout_cap) for sid, s in zip(ids, specs)], slot_count // width, pop.n_leechers)
    _emit_trees(acc, trees, width, pop)
    return acc.finish(params, pop, Model.FANOUT)


# ------------------------------------------------------------ mono-rate


@dataclass(frozen=True)
class MonoRatePlan:
    E: float
    e: float
    e_rounded: Fraction
    E_rounded: float
    width_slots: int
    fanouts: dict[str, int]
    trees: list[list[str]]
    set_size_bound: int | None
    bracket: tuple[float, float]
    bracket_rounded: tuple[float, float]
    predicted_eta: Fraction

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "e": self.e,
            "e_rounded": float(self.e_rounded),
            "E_rounded": self.E_rounded,
            "width_slots": self.width_slots,
            "seeders": [{"seeder": s, "fanout": c, "rate": float(self.e_rounded)} for s, c in self.fanouts.items()],
            "trees": self.trees,
            "set_size_bound": self.set_size_bound,
            "bracket": list(self.bracket),
            "bracket_rounded": list(self.bracket_rounded),
            "predicted_eta": float(self.predicted_eta),
        }


def _sender_only(params: StreamParams) -> None:
    if params.a_r or params.b_r:
        raise PreconditionError("overhead builders assume sender-side overhead only (a_r = b_r = 0)")


def build_monorate(
    pop: Population, params: StreamParams, subset: Iterable[str] | None = None, slot_count: int = 1024
) -> tuple[MonoRatePlan, DiffusionScheme]:
    """All seeders use one substream rate derived from the set's mean upload.

    The ideal rate is generally irrational, so it is rounded down to a whole
    number of slots; ``bracket_rounded`` is the efficiency bracket for the
    rounded rate.
    """
    _sender_only(params)
    ids = _subset(pop, subset)
    if not ids:
        raise SeedplanError("mono-rate needs a non-empty seeder set")
    a, b, r, R, K = params.a, params.b, params.r, params.R, slot_count
    if b <= 0:
        raise PreconditionError("mono-rate needs a positive additive cost")
    ups = {s: pop.seeder(s).upload for s in ids}
    u_bar = sum(ups.values()) / len(ids)
    if u_bar > 2 * R**2 / b * (1 + 1e-12):
        raise PreconditionError(f"mean upload {u_bar:.6g} exceeds 2R^2/b", code="PRECONDITION_UBAR")
    E = math.sqrt(b * u_bar / 2)
    e = (E - b) / (1 + a)
    if e <= 0:
        raise PreconditionError("mean upload too small for a positive common rate")
    width = min(K, math.floor(e * K / r))
    if width == 0:
        raise GranularityError(f"common rate {e:.6g} is below one slot r/{K}")
    e_q = Fraction(width * exact(r), K)
    E_q = (1 + a) * float(e_q) + b
    fanouts = {s: math.floor(u / E_q) for s, u in ups.items()}
    cmax = max(fanouts.values())
    n_trees = K // width
    bound = None if cmax <= 1 else ((pop.n_leechers - 1) // (cmax - 1)) * n_trees
    if bound is not None and len(ids) > bound:
        raise SetTooLargeError(f"{len(ids)} seeders exceed the mono-rate bound {bound}")
    active = [(s, c) for s, c in fanouts.items() if c >= 2]
    trees = _pack(active, n_trees, pop.n_leechers)
    acc = _Edges(K)
    _emit_trees(acc, trees, width, pop)
    scheme = acc.finish(params, pop, Model.OVERHEAD)

    total = sum((exact(u) for u in ups.values()), Fraction(0))
    predicted = sum((c - 1) * e_q for _, c in active) / total if active else Fraction(0)
    bracket = ((1 - math.sqrt(2 * b / u_bar)) ** 2 / (1 + a), (1 - math.sqrt(b / u_bar)) ** 2 / (1 + a))
    eq = float(e_q)
    bracket_q = (eq / E_q - 2 * eq / u_bar, eq / E_q - eq / u_bar)
    plan = MonoRatePlan(
        E, e, e_q, E_q, width, fanouts, [t.seeders for t in trees if t.seeders], bound, bracket, bracket_q, predicted
    )
    return plan, scheme


# ------------------------------------------------------------ dichotomic


def default_k_max(params: StreamParams) -> int:
    if params.b <= 0:
        raise SeedplanError("k_max must be given when b = 0")
    return max(0, math.floor(math.log2(params.r / params.b)))


def level_descent(
    params: StreamParams, u: float, k: int, k_max: int, n_leechers: int | None = None
) -> tuple[dict[int, int], Fraction]:
    """Outputs per level of a seeder operating at level ``k`` and its efficiency.

    Greedy: open as many outputs of the current level as the residual upload
    allows, then move one level deeper, while residual > b and level <= k_max.
    With ``n_leechers`` set, total output goodput is capped at ``n_leechers``
    times the input: no leecher can usefully take more than the whole input
    substream.
    """
    a, b, r = exact(params.a), exact(params.b), exact(params.r)
    residual = exact(u)
    outputs: dict[int, int] = {}
    goodput = Fraction(0)
    level = k
    while residual > b and level <= k_max:
        rate = r / 2**level
        cost = (1 + a) * rate + b
        n = int(residual // cost)
        if n_leechers is not None:
            n = min(n, int((n_leechers * r / 2**k - goodput) // rate))
        if n:
            outputs[level] = n
            residual -= n * cost
            goodput += n * rate
        level += 1
    eta = (goodput - r / 2**k) / exact(u) if u > 0 else Fraction(0)
    return outputs, eta


def choose_level(
    params: StreamParams, u: float, k_max: int, n_leechers: int | None = None
) -> tuple[int | None, float]:
    """Operating level maximising the seeder's own efficiency (ties go to the smaller level).

    Returns ``(None, 0.0)`` when no level gives a positive efficiency.
    """
    best_k, best = None, Fraction(0)
    if u <= 0:
        return None, 0.0
    for k in range(k_max + 1):
        _, eta = level_descent(params, u, k, k_max, n_leechers)
        if eta > best:
            best_k, best = k, eta
    return best_k, float(best)


@dataclass
class _LevelTree:
    level: int
    index: int
    seeders: list[str] = field(default_factory=list)
    fanout: dict[str, int] = field(default_factory=dict)
    root_source: str = ""
    root_feed: tuple[int, int] | None = None  # (level, index) of the substream fed to the root
    spare_leaves: list[str] = field(default_factory=list)  # owners of leaves not given to a leecher
    delivered: list[tuple[str, int]] = field(default_factory=list)  # (owner, leecher index)
    feeds: int = 0  # leaves spent rooting child trees

    @property
    def leaves(self) -> int:
        if not self.seeders:
            return 0
        return sum(self.fanout.values()) - (len(self.seeders) - 1)

    def layout(self) -> tuple[dict[str, str], list[str]]:
        parent: dict[str, str] = {}
        open_slots: deque[str] = deque()
        for i, sid in enumerate(self.seeders):
            if i:
                parent[sid] = open_slots.popleft()
            open_slots.extend([sid] * self.fanout[sid])
        return parent, list(open_slots)


@dataclass(frozen=True)
class DichotomicPlan:
    k_max: int
    slot_count: int
    seeders: list[dict]
    trees: list[dict]
    waste: float
    dropped: float
    mean_eta_bin: float
    lower_bound: float
    depth: int

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "slot_count": self.slot_count,
            "seeders": self.seeders,
            "trees": self.trees,
            "waste": self.waste,
            "dropped": self.dropped,
            "mean_eta_bin": self.mean_eta_bin,
            "lower_bound": self.lower_bound,
            "depth": self.depth,
        }


def _block(K: int, level: int, index: int) -> range:
    w = K >> level
    return range(index * w, (index + 1) * w)


def build_dichotomic(
    pop: Population,
    params: StreamParams,
    subset: Iterable[str] | None = None,
    k_max: int | None = None,
    slot_count: int | None = None,
) -> tuple[DichotomicPlan, DiffusionScheme]:
    """Dichotomic-rate scheme: substreams of rate r/2^k organised in per-level trees.

    Levels are handled shallow to deep.  At each level, seeders join the
    tree whose substream still has the most leecher room (fewest leaves on
    ties).  Each tree is then rooted by a deeper output of a shallower
    seeder, else by the server if its capacity still covers the roots plus
    everything the leechers currently miss, else by a leaf of the parent
    tree, which wastes half of that leaf.  The server check credits the
    tree's own leaves and the content deeper seeders will deliver later;
    if that credit proves optimistic the final capacity check raises
    :class:`CapacityError`.  Leaves go at once to the
    leechers missing the most content.  Deeper outputs left over are
    delivered the same way.  A tree that cannot be rooted raises
    :class:`RootingError`.
    """
    _sender_only(params)
    ids = _subset(pop, subset)
    if k_max is None:
        k_max = default_k_max(params)
    if k_max < 0:
        raise SeedplanError("k_max must be >= 0")
    K = slot_count if slot_count is not None else 2**k_max
    if K % 2**k_max:
        raise GranularityError(f"slot count {K} is not a multiple of 2^{k_max}")
    a, b, r, R = params.a, params.b, params.r, params.R
    n_l = pop.n_leechers
    ups = {s: pop.seeder(s).upload for s in ids}
    U = sum(ups.values())
    if U > n_l * R * (1 + 1e-12):
        raise PreconditionError(f"total upload {U:.6g} exceeds N_L*R", code="PRECONDITION_UX")

    order = sorted(ids, key=lambda s: (-ups[s], int(s[1:])))
    info: dict[str, dict] = {}
    by_level: dict[int, list[str]] = defaultdict(list)
    for sid in order:
        k, _ = choose_level(params, ups[sid], k_max, n_l)
        outs, eta = level_descent(params, ups[sid], k, k_max, n_l) if k is not None else ({}, Fraction(0))
        info[sid] = {"level": k, "outputs": outs, "eta_bin": eta, "tree": None}
        if k is not None:
            by_level[k].append(sid)

    leechers = pop.leecher_ids
    pieces: list[set[tuple[int, int]]] = [set() for _ in leechers]
    missing = [K] * n_l

    def eligible(i: int, lvl: int, j: int) -> bool:
        return not any((m, j >> (lvl - m)) in pieces[i] for m in range(lvl + 1))

    def neediest(cands: Iterable[int]) -> int | None:
        best = None
        for i in cands:
            if best is None or missing[i] > missing[best]:
                best = i
        return best

    acc = _Edges(K)

    def deliver(owner: str, i: int, lvl: int, j: int) -> None:
        pieces[i].add((lvl, j))
        missing[i] -= K >> lvl
        acc.add(owner, leechers[i], _block(K, lvl, j))

    def undeliver(owner: str, i: int, lvl: int, j: int) -> None:
        pieces[i].discard((lvl, j))
        missing[i] += K >> lvl
        acc.edges[(owner, leechers[i])] -= set(_block(K, lvl, j))

    trees: dict[tuple[int, int], _LevelTree] = {}
    flex: dict[int, list[list]] = defaultdict(list)  # level -> [seeder, its level, its tree, units left]
    capacity = pop.n_c * R
    root_cost = 0.0
    slot_rate = r / K

    net = {
        sid: sum((n * exact(r) / 2**k for k, n in d["outputs"].items()), Fraction(0)) - exact(r) / 2 ** d["level"]
        for sid, d in info.items()
        if d["level"] is not None
    }

    def pending(lvl: int) -> Fraction:
        # leecher content still to come from deeper seeders and deeper outputs
        later = sum((max(v, Fraction(0)) for sid, v in net.items() if info[sid]["level"] > lvl), Fraction(0))
        for deeper, units in flex.items():
            if deeper >= lvl:
                later += sum(u[3] for u in units) * exact(r) / 2**deeper
        return later

    def server_load(extra: float = 0.0) -> float:
        # roots so far plus the server completing every leecher as things stand
        fill = sum(edge_cost(params, m, slot_rate) for m in missing)
        return root_cost + fill + extra
    waste = Fraction(0)
    dropped = Fraction(0)

    for lvl in range(k_max + 1):
        rate = exact(r) / 2**lvl
        level_trees = [_LevelTree(lvl, j) for j in range(2**lvl)]
        avail = [sum(eligible(i, lvl, j) for i in range(n_l)) for j in range(2**lvl)]
        for sid in by_level[lvl]:
            t = max(level_trees, key=lambda t: (avail[t.index] - t.leaves, -t.leaves, -t.index))
            t.seeders.append(sid)
            t.fanout[sid] = info[sid]["outputs"][lvl]
            info[sid]["tree"] = t.index
            for deeper, n in sorted(info[sid]["outputs"].items()):
                if deeper > lvl:
                    flex[deeper].append([sid, lvl, t.index, n])
        live = [t for t in level_trees if t.seeders]

        for t in live:
            trees[(lvl, t.index)] = t
            parent, owners = t.layout()
            for unit in flex[lvl]:
                sid, k, j, n = unit
                if n and t.index >> (lvl - k) == j:
                    unit[3] -= 1
                    t.root_source, t.root_feed = sid, (lvl, t.index)
                    break
            else:
                cost = (1 + a) * r / 2**lvl + b
                # the tree's own leaves are delivered right away and relieve the server
                relief = (1 + a) * float(rate) * min(len(owners), sum(eligible(i, lvl, t.index) for i in range(n_l)))
                later = (1 + a) * float(pending(lvl))
                if server_load(cost - relief - later) <= capacity * (1 + 1e-12):
                    root_cost += cost
                    t.root_source, t.root_feed = SERVER, (lvl, t.index)
                else:
                    up = trees.get((lvl - 1, t.index // 2))
                    if up is None:
                        raise RootingError(f"no input available for level-{lvl} tree {t.index}")
                    if up.spare_leaves:
                        owner = up.spare_leaves.pop(0)
                    elif up.delivered:
                        owner, i = up.delivered.pop()
                        undeliver(owner, i, lvl - 1, up.index)
                    else:
                        raise RootingError(f"parent tree of level-{lvl} tree {t.index} has no leaf left")
                    up.feeds += 1
                    t.root_source, t.root_feed = owner, (lvl - 1, up.index)
                    waste += rate
            acc.add(t.root_source, t.seeders[0], _block(K, *t.root_feed))
            for child, par in parent.items():
                acc.add(par, child, _block(K, lvl, t.index))
            for owner in owners:
                i = neediest(i for i in range(n_l) if eligible(i, lvl, t.index))
                if i is None:
                    t.spare_leaves.append(owner)
                else:
                    deliver(owner, i, lvl, t.index)
                    t.delivered.append((owner, i))
        for sid, k, j, n in flex[lvl]:
            span = range(j << (lvl - k), (j + 1) << (lvl - k))
            for _ in range(n):
                i = neediest(i for i in range(n_l) if any(eligible(i, lvl, jj) for jj in span))
                if i is None:
                    dropped += rate
                    continue
                deliver(sid, i, lvl, next(jj for jj in span if eligible(i, lvl, jj)))

    for t in trees.values():
        dropped += len(t.spare_leaves) * exact(r) / 2**t.level

    scheme = acc.finish(params, pop, Model.OVERHEAD)
    total = sum((exact(u) for u in ups.values()), Fraction(0))
    mean = sum((info[s]["eta_bin"] * exact(ups[s]) for s in ids), Fraction(0)) / total if total else Fraction(0)
    lower = mean - exact(r) * k_max / total if total else Fraction(0)
    live_trees = sorted(trees.values(), key=lambda t: (t.level, t.index))
    plan = DichotomicPlan(
        k_max=k_max,
        slot_count=K,
        seeders=[
            {
                "seeder": s,
                "upload": ups[s],
                "level": info[s]["level"],
                "tree": info[s]["tree"],
                "outputs": {str(k): v for k, v in sorted(info[s]["outputs"].items())},
                "fanout": sum(info[s]["outputs"].values()),
                "input_rate": None if info[s]["level"] is None else r / 2 ** info[s]["level"],
                "eta_bin": float(info[s]["eta_bin"]),
            }
            for s in order
        ],
        trees=[
            {
                "level": t.level,
                "index": t.index,
                "seeders": t.seeders,
                "root_source": t.root_source,
                "root_feed_level": t.root_feed[0],
                "leaves": t.leaves,
                "delivered": len(t.delivered),
                "feeds": t.feeds,
            }
            for t in live_trees
        ],
        waste=float(waste),
        dropped=float(dropped),
        mean_eta_bin=float(mean),
        lower_bound=float(lower),
        depth=scheme_depth(scheme),
    )
    return plan, scheme
