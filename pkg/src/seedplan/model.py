"""System model: stream parameters, populations, slot-based diffusion schemes.

A scheme splits the stream into ``slot_count`` equal slots of goodput ``r / K``
and assigns a set of slot indices to each directed edge.  Validation and
efficiency measurement work on integer slot counts, so efficiencies come out
as exact fractions.
"""

from __future__ import annotations

import enum
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from seedplan.errors import SeedplanError, ZeroUploadError

SERVER = "server"
REL_TOL = 1e-9


class Model(str, enum.Enum):
    PERFECT = "perfect"
    FANOUT = "fanout"
    OVERHEAD = "overhead"


def leecher_id(i: int) -> str:
    return f"L{i}"


def seeder_id(i: int) -> str:
    return f"S{i}"


def exact(x) -> Fraction:
    """Exact rational value of an int, float or Fraction."""
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class StreamParams:
    """Streamrate ``r`` and linear overhead coefficients.

    Sending goodput ``e`` over one connection costs ``(1+a)e + b`` to the
    sender; the receiver pays ``a_r e + b_r`` (zero by default).
    """

    r: float
    a: float = 0.0
    b: float = 0.0
    a_r: float = 0.0
    b_r: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise SeedplanError(f"streamrate must be positive, got {self.r}")
        for name in ("a", "b", "a_r", "b_r"):
            if getattr(self, name) < 0:
                raise SeedplanError(f"{name} must be >= 0")

    @property
    def R(self) -> float:
        """Bandwidth used to send one full copy of the stream."""
        return (1 + self.a) * self.r + self.b

    @property
    def eta_max(self) -> float:
        return self.r / self.R

    def overhead_free(self) -> "StreamParams":
        return StreamParams(self.r)

    def to_dict(self) -> dict:
        return {"r": self.r, "a": self.a, "b": self.b, "a_r": self.a_r, "b_r": self.b_r}


@dataclass(frozen=True)
class SeederSpec:
    upload: float
    fanout_cap: int | None = None

    def __post_init__(self):
        if self.upload < 0:
            raise SeedplanError("seeder upload must be >= 0")
        if self.fanout_cap is not None and self.fanout_cap < 1:
            raise SeedplanError("fanout cap must be >= 1")


@dataclass(frozen=True)
class Population:
    """Servers (capacity in stream copies), leechers and seeders.

    Leechers are indexed ``L0..`` and seeders ``S0..`` in list order.
    ``leecher_upload`` is the per-leecher upload budget; it defaults to 0,
    i.e. leechers only consume.
    """

    n_c: float
    n_leechers: int
    seeders: tuple[SeederSpec, ...] = ()
    leecher_upload: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "seeders", tuple(self.seeders))
        if self.n_leechers < 1:
            raise SeedplanError("need at least one leecher")
        if self.n_c < 1:
            raise SeedplanError("server capacity must be at least one stream copy")
        for s in self.seeders:
            if s.fanout_cap is not None and s.fanout_cap > self.n_leechers:
                raise SeedplanError("fanout cap cannot exceed the number of leechers")

    @property
    def leecher_ids(self) -> list[str]:
        return [leecher_id(i) for i in range(self.n_leechers)]

    @property
    def seeder_ids(self) -> list[str]:
        return [seeder_id(i) for i in range(len(self.seeders))]

    @property
    def nodes(self) -> list[str]:
        return [SERVER] + self.leecher_ids + self.seeder_ids

    def seeder(self, sid: str) -> SeederSpec:
        try:
            idx = int(sid[1:]) if sid.startswith("S") else -1
        except ValueError:
            idx = -1
        if not 0 <= idx < len(self.seeders):
            raise SeedplanError(f"unknown seeder {sid!r}")
        return self.seeders[idx]

    def upload(self, node: str) -> float:
        if node.startswith("S"):
            return self.seeder(node).upload
        return self.leecher_upload

    def total_upload(self, subset: Iterable[str]) -> float:
        return sum(self.seeder(s).upload for s in subset)


@dataclass(frozen=True)
class DiffusionScheme:
    """Static assignment of slot sets to directed edges. Empty edges are dropped."""

    slot_count: int
    edges: Mapping[tuple[str, str], frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.slot_count < 1:
            raise SeedplanError("slot_count must be positive")
        clean = {}
        for (p, q), slots in sorted(self.edges.items()):
            slots = frozenset(slots)
            if slots:
                clean[(p, q)] = slots
        object.__setattr__(self, "edges", clean)

    @property
    def all_slots(self) -> frozenset[int]:
        return frozenset(range(self.slot_count))

    def out_edges(self, p: str) -> dict[str, frozenset[int]]:
        return {q: s for (src, q), s in self.edges.items() if src == p}

    def in_edges(self, q: str) -> dict[str, frozenset[int]]:
        return {p: s for (p, dst), s in self.edges.items() if dst == q}

    def received(self, q: str) -> frozenset[int]:
        out: set[int] = set()
        for s in self.in_edges(q).values():
            out |= s
        return frozenset(out)

    def nodes(self) -> set[str]:
        return {n for edge in self.edges for n in edge}

    def to_dict(self) -> dict:
        return {
            "slot_count": self.slot_count,
            "edges": [
                {"from": p, "to": q, "slots": sorted(s)} for (p, q), s in self.edges.items()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiffusionScheme":
        edges: dict[tuple[str, str], set[int]] = defaultdict(set)
        for e in data.get("edges", []):
            edges[(str(e["from"]), str(e["to"]))].update(int(i) for i in e["slots"])
        return cls(int(data["slot_count"]), {k: frozenset(v) for k, v in edges.items()})


def edge_cost(params: StreamParams, slots_on_edge: int, slot_rate: float) -> float:
    """Sender-side bandwidth of one edge: 0 if empty, else ``(1+a)e + b``."""
    if slots_on_edge < 0:
        raise SeedplanError("negative slot count")
    if slots_on_edge == 0:
        return 0.0
    return (1 + params.a) * (slots_on_edge * slot_rate) + params.b


def receiver_cost(params: StreamParams, slots_on_edge: int, slot_rate: float) -> float:
    if slots_on_edge == 0:
        return 0.0
    return params.a_r * (slots_on_edge * slot_rate) + params.b_r


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    kind: str  # POSSESSION | OVERLAP | INCOMPLETE_LEECHER | BUDGET | FANOUT
    node: str
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "node": self.node, "detail": self.detail}


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    @property
    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def _check_structure(pop: Population, scheme: DiffusionScheme) -> None:
    known = set(pop.nodes)
    for (p, q), slots in scheme.edges.items():
        if p not in known or q not in known:
            raise SeedplanError(f"edge {p}->{q} references an unknown node")
        if p == q:
            raise SeedplanError(f"self-loop on {p}")
        if q == SERVER:
            raise SeedplanError("edges into the server are not allowed")
        if min(slots) < 0 or max(slots) >= scheme.slot_count:
            raise SeedplanError(f"edge {p}->{q} carries a slot outside [0, {scheme.slot_count})")


def possessed_slots(scheme: DiffusionScheme) -> dict[str, set[int]]:
    """Slots each node actually holds: reachable from the server along edges carrying them."""
    out_by_node: dict[str, list[tuple[str, frozenset[int]]]] = defaultdict(list)
    for (p, q), slots in scheme.edges.items():
        out_by_node[p].append((q, slots))
    have: dict[str, set[int]] = defaultdict(set)
    have[SERVER] = set(range(scheme.slot_count))
    queue = deque([(SERVER, frozenset(range(scheme.slot_count)))])
    while queue:
        p, new = queue.popleft()
        for q, slots in out_by_node[p]:
            gained = (slots & new) - have[q]
            if gained:
                have[q] |= gained
                queue.append((q, frozenset(gained)))
    return have


def node_budget(params: StreamParams, pop: Population, node: str, model: Model) -> float:
    if node == SERVER:
        copy_cost = params.R if model is Model.OVERHEAD else params.r
        return pop.n_c * copy_cost
    return pop.upload(node)


def bandwidth_used(
    params: StreamParams, pop: Population, scheme: DiffusionScheme, model: Model | str = Model.OVERHEAD
) -> dict[str, float]:
    """Upload bandwidth each node spends under the given connection model."""
    model = Model(model)
    slot_rate = params.r / scheme.slot_count
    used = {n: 0.0 for n in pop.nodes}
    for (p, q), slots in scheme.edges.items():
        if model is Model.OVERHEAD:
            used[p] += edge_cost(params, len(slots), slot_rate)
            if q.startswith("S"):
                # receiver-side signalling is charged to seeders only
                used[q] += receiver_cost(params, len(slots), slot_rate)
        else:
            used[p] += len(slots) * slot_rate
    return used


def _over(used: float, budget: float) -> bool:
    return used > budget * (1 + REL_TOL) + REL_TOL


def validate_scheme(
    params: StreamParams, pop: Population, scheme: DiffusionScheme, model: Model | str
) -> ValidationResult:
    """Check possession, disjoint inputs, leecher completeness and budgets.

    Structural problems (unknown nodes, out-of-range slots, edges into the
    server) raise; model violations are collected and returned.
    """
    model = Model(model)
    _check_structure(pop, scheme)
    found: list[Violation] = []

    have = possessed_slots(scheme)
    for (p, q), slots in scheme.edges.items():
        if p == SERVER:
            continue
        missing = slots - have[p]
        if missing:
            found.append(Violation("POSSESSION", p, f"sends slots {sorted(missing)} to {q} without holding them"))

    for q in pop.nodes[1:]:
        seen: dict[int, str] = {}
        for p, slots in scheme.in_edges(q).items():
            for i in sorted(slots):
                if i in seen:
                    found.append(Violation("OVERLAP", q, f"slot {i} received from {seen[i]} and {p}"))
                else:
                    seen[i] = p

    full = scheme.all_slots
    for lid in pop.leecher_ids:
        got = scheme.received(lid)
        if got != full:
            found.append(
                Violation("INCOMPLETE_LEECHER", lid, f"missing slots {sorted(full - got)[:12]}")
            )

    used = bandwidth_used(params, pop, scheme, model)
    for node in pop.nodes:
        budget = node_budget(params, pop, node, model)
        if _over(used[node], budget):
            found.append(Violation("BUDGET", node, f"uses {used[node]:.9g} of {budget:.9g}"))

    if model is Model.FANOUT:
        for sid in pop.seeder_ids:
            cap = pop.seeder(sid).fanout_cap
            fan = len(scheme.out_edges(sid))
            if cap is not None and fan > cap:
                found.append(Violation("FANOUT", sid, f"{fan} connections, cap {cap}"))

    return ValidationResult(tuple(found))


# ---------------------------------------------------------------- efficiency


@dataclass(frozen=True)
class SeederEfficiency:
    seeder: str
    input_rate: Fraction
    output_rate: Fraction
    fanout: int
    eta: Fraction | None  # None when the seeder has zero upload

    def to_dict(self) -> dict:
        return {
            "seeder": self.seeder,
            "input_rate": float(self.input_rate),
            "output_rate": float(self.output_rate),
            "fanout": self.fanout,
            "eta": None if self.eta is None else float(self.eta),
        }


@dataclass(frozen=True)
class EfficiencyReport:
    per_seeder: tuple[SeederEfficiency, ...]
    subset: tuple[str, ...]
    set_efficiency: Fraction | None
    total_upload: Fraction
    bandwidth_used: dict[str, float]
    zero_upload: tuple[str, ...] = ()

    def seeder(self, sid: str) -> SeederEfficiency:
        for s in self.per_seeder:
            if s.seeder == sid:
                return s
        raise KeyError(sid)

    def to_dict(self) -> dict:
        return {
            "per_seeder": [s.to_dict() for s in self.per_seeder],
            "subset": list(self.subset),
            "set_efficiency": None if self.set_efficiency is None else float(self.set_efficiency),
            "set_efficiency_exact": None if self.set_efficiency is None else str(self.set_efficiency),
            "total_upload": float(self.total_upload),
            "bandwidth_used": self.bandwidth_used,
            "errors": ["ZERO_UPLOAD"] if self.zero_upload else [],
            "zero_upload": list(self.zero_upload),
        }


def measure_efficiency(
    params: StreamParams,
    pop: Population,
    scheme: DiffusionScheme,
    subset: Iterable[str] | None = None,
    model: Model | str = Model.OVERHEAD,
) -> EfficiencyReport:
    """Per-seeder and set efficiencies, exact in slot arithmetic.

    The set value uses the boundary form: goodput leaving the subset minus
    goodput entering it, over the subset's total upload.
    """
    subset = tuple(pop.seeder_ids if subset is None else subset)
    members = set(subset)
    for sid in subset:
        pop.seeder(sid)
    slot_rate = exact(params.r) / scheme.slot_count

    per = []
    for sid in pop.seeder_ids:
        n_in = sum(len(s) for s in scheme.in_edges(sid).values())
        outs = scheme.out_edges(sid)
        n_out = sum(len(s) for s in outs.values())
        u = exact(pop.seeder(sid).upload)
        eta = (n_out - n_in) * slot_rate / u if u > 0 else None
        per.append(SeederEfficiency(sid, n_in * slot_rate, n_out * slot_rate, len(outs), eta))

    total = sum((exact(pop.seeder(s).upload) for s in subset), Fraction(0))
    zero = tuple(s for s in subset if pop.seeder(s).upload == 0)
    if not subset:
        set_eta = None
    elif total == 0:
        raise ZeroUploadError("subset has zero total upload")
    else:
        leaving = entering = 0
        for (p, q), slots in scheme.edges.items():
            if p in members and q not in members:
                leaving += len(slots)
            elif q in members and p not in members:
                entering += len(slots)
        set_eta = (leaving - entering) * slot_rate / total

    return EfficiencyReport(
        tuple(per), subset, set_eta, total, bandwidth_used(params, pop, scheme, model), zero
    )


def scheme_depth(scheme: DiffusionScheme) -> int:
    """Longest server-to-node hop count over all slots (a delay proxy)."""
    children: dict[int, dict[str, list[str]]] = defaultdict(lambda: defaultdict(list))
    for (p, q), slots in scheme.edges.items():
        for i in slots:
            children[i][p].append(q)
    depth = 0
    for tree in children.values():
        frontier, d, seen = [SERVER], 0, {SERVER}
        while frontier:
            nxt = [c for p in frontier for c in tree.get(p, ()) if c not in seen]
            seen.update(nxt)
            if nxt:
                d += 1
            frontier = nxt
        depth = max(depth, d)
    return depth
