"""Exhaustive search for optimal diffusion schemes on toy populations.

Each slot travels along its own arborescence rooted at the server, so a
scheme is a multiset of K per-slot trees.  The search enumerates the
admissible tree shapes once, then runs a dynamic program over slots whose
state records what the budgets need: per-node slot counts and the set of
edges already opened.  The objective is additive over slots, which lets
equal states be merged while keeping only the best value.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from seedplan.errors import SeedplanError, TooLargeError, ZeroUploadError
from seedplan.model import (
    SERVER,
    DiffusionScheme,
    Model,
    Population,
    SeederSpec,
    StreamParams,
    _over,
    exact,
    node_budget,
)

MAX_NODES = 7
MAX_SLOTS = 12


@dataclass(frozen=True)
class OracleResult:
    best_efficiency: Fraction
    witness_scheme: DiffusionScheme
    search_space_size: int
    slot_count: int

    def to_dict(self) -> dict:
        return {
            "best_efficiency": str(self.best_efficiency),
            "best_efficiency_float": float(self.best_efficiency),
            "search_space_size": self.search_space_size,
            "slot_count": self.slot_count,
            "witness_scheme": self.witness_scheme.to_dict(),
        }


@dataclass(frozen=True)
class _Shape:
    edges: tuple[tuple[str, str], ...]
    value: int  # transfers leaving the set minus transfers entering it


def _shapes(pop: Population, members: set[str]) -> list[_Shape]:
    """Every arborescence from the server covering all leechers.

    Seeders appear only as relays: a seeder that keeps a slot without
    forwarding it wastes bandwidth and is never part of an optimum.
    Leechers relay only when they have upload.
    """
    leechers = pop.leecher_ids
    relaying_leechers = [q for q in leechers if pop.upload(q) > 0]
    shapes = []
    seeders = pop.seeder_ids
    for size in range(len(seeders) + 1):
        for chosen in itertools.combinations(seeders, size):
            inner = list(leechers) + list(chosen)
            senders = [SERVER] + relaying_leechers + list(chosen)
            choices = [[p for p in senders if p != q] for q in inner]
            for parents in itertools.product(*choices):
                par = dict(zip(inner, parents))
                if not _rooted(par):
                    continue
                if any(s not in parents for s in chosen):
                    continue
                edges = tuple(sorted((p, q) for q, p in par.items()))
                value = sum((p in members) - (q in members) for p, q in edges)
                shapes.append(_Shape(edges, value))
    return shapes


def _rooted(par: dict[str, str]) -> bool:
    for start in par:
        seen = set()
        node = start
        while node != SERVER:
            if node in seen:
                return False
            seen.add(node)
            node = par[node]
    return True


def oracle_optimal(
    pop: Population,
    params: StreamParams,
    subset: Iterable[str] | None = None,
    model: Model | str = Model.FANOUT,
    slot_count: int = 6,
) -> OracleResult:
    """Best achievable set efficiency over all K-slot schemes, as an exact rational."""
    model = Model(model)
    K = slot_count
    n_nodes = 1 + pop.n_leechers + len(pop.seeders)
    if n_nodes > MAX_NODES:
        raise TooLargeError(f"{n_nodes} nodes exceed the oracle limit of {MAX_NODES}")
    if not 1 <= K <= MAX_SLOTS:
        raise TooLargeError(f"slot count {K} outside 1..{MAX_SLOTS}")
    members = set(pop.seeder_ids if subset is None else subset)
    unknown = members - set(pop.seeder_ids)
    if unknown:
        raise SeedplanError(f"unknown seeders {sorted(unknown)}")
    total = sum((exact(pop.upload(s)) for s in members), Fraction(0))
    if not members or total == 0:
        raise ZeroUploadError("the seeder set has no upload")

    shapes = _shapes(pop, members)
    nodes = pop.nodes
    edge_index: dict[tuple[str, str], int] = {}
    for sh in shapes:
        for e in sh.edges:
            edge_index.setdefault(e, len(edge_index))
    edge_list = sorted(edge_index, key=edge_index.get)
    pos = {n: i for i, n in enumerate(nodes)}
    slot_rate = params.r / K
    budgets = [node_budget(params, pop, n, model) for n in nodes]
    fan_caps = [
        pop.seeder(n).fanout_cap if model is Model.FANOUT and n.startswith("S") else None for n in nodes
    ]
    receivers = model is Model.OVERHEAD and (params.a_r or params.b_r)

    def spend(i: int, out_slots: int, in_slots: int, out_edges: int, in_edges: int) -> float:
        if model is not Model.OVERHEAD:
            return out_slots * slot_rate
        cost = (1 + params.a) * out_slots * slot_rate + params.b * out_edges
        if receivers and nodes[i].startswith("S"):
            cost += params.a_r * in_slots * slot_rate + params.b_r * in_edges
        return cost

    # Per-node counters are packed into one integer so a transition is a
    # single addition; every field is wide enough for K slots per edge.
    n = len(nodes)
    width = (K * n).bit_length() + 1
    field_mask = (1 << width) - 1

    def unpack(packed: int) -> list[int]:
        return [(packed >> (width * i)) & field_mask for i in range(2 * n)]

    # Only counters and edges that can make a budget bind are tracked;
    # dropping the rest merges states that are equivalent for the search.
    counted = [_over(spend(i, K * (n - 1), K, n - 1, n - 1), budgets[i]) for i in range(n)]
    tracked_edge = {
        e: fan_caps[pos[e[0]]] is not None
        or (model is Model.OVERHEAD and counted[pos[e[0]]])
        or (receivers and counted[pos[e[1]]])
        for e in edge_list
    }

    moves = []
    for sh in shapes:
        packed = 0
        mask = 0
        for p, q in sh.edges:
            if counted[pos[p]]:
                packed += 1 << (width * pos[p])
            if receivers and counted[pos[q]]:
                packed += 1 << (width * (n + pos[q]))
            if tracked_edge[(p, q)]:
                mask |= 1 << edge_index[(p, q)]
        moves.append((packed, mask, sh.value))

    edge_ends = [(k, pos[p], pos[q]) for k, (p, q) in enumerate(edge_list)]
    rejected: set = set()

    def fits(packed: int, mask: int) -> bool:
        if (packed, mask) in rejected:
            return False
        counts = unpack(packed)
        n_out = [0] * n
        n_in = [0] * n
        for k, p, q in edge_ends:
            if mask >> k & 1:
                n_out[p] += 1
                n_in[q] += 1
        for i in range(n):
            if (fan_caps[i] is not None and n_out[i] > fan_caps[i]) or (
                counted[i] and _over(spend(i, counts[i], counts[n + i], n_out[i], n_in[i]), budgets[i])
            ):
                rejected.add((packed, mask))
                return False
        return True

    start = (0, 0)
    # state -> (value, previous state, shape index)
    layer: dict = {start: (0, None, None)}
    history = []
    visited = 1
    for _ in range(K):
        nxt: dict = {}
        for state, (val, _, _) in layer.items():
            packed, mask = state
            for m, (d_packed, d_mask, d_val) in enumerate(moves):
                new = (packed + d_packed, mask | d_mask)
                cand = val + d_val
                old = nxt.get(new)
                if old is not None:
                    if cand > old[0]:
                        nxt[new] = (cand, state, m)
                    continue
                if fits(*new):
                    nxt[new] = (cand, state, m)
        history.append(nxt)
        visited += len(nxt)
        layer = nxt
    if not layer:
        raise SeedplanError("no feasible scheme: the server cannot serve every leecher")

    best_state = max(layer, key=lambda s: (layer[s][0], _order_key(s)))
    best_val = layer[best_state][0]
    picked = []
    state = best_state
    for depth in range(K - 1, -1, -1):
        _, prev, m = history[depth][state]
        picked.append(m)
        state = prev
    edges: dict[tuple[str, str], set[int]] = {}
    for slot, m in enumerate(sorted(picked)):
        for e in shapes[m].edges:
            edges.setdefault(e, set()).add(slot)
    witness = DiffusionScheme(K, edges)
    eff = Fraction(best_val) * exact(params.r) / K / total
    return OracleResult(eff, witness, visited, K)


def _order_key(state) -> tuple:
    # deterministic tie-break among equally good final states
    packed, mask = state
    return (-mask, -packed)


def oracle_single_fanout(u: float, c: int, r: float, n_leechers: int, slot_count: int) -> Fraction:
    """Optimal efficiency of one fanout-limited seeder, found by enumeration."""
    if c < 1:
        raise SeedplanError("fanout must be >= 1")
    pop = Population(n_leechers, n_leechers, [SeederSpec(u, min(c, n_leechers))])
    return oracle_optimal(pop, StreamParams(r), None, Model.FANOUT, slot_count).best_efficiency
