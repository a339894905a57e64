"""System-level capacity arithmetic and figure-data sweeps."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from seedplan import analytic
from seedplan.builders import choose_level, default_k_max
from seedplan.errors import NegativeRadicandError, NoSolutionError, SeedplanError
from seedplan.model import StreamParams

LARGE_N = 10**6  # leecher count standing in for "unbounded"
DEFAULT_CAP = 1e6
AGGREGATION_NOTE = "seeder efficiency is the individual optimum; aggregation losses are neglected"


@dataclass(frozen=True)
class ConservationResult:
    solvable: bool
    margin: float

    def to_dict(self) -> dict:
        return {"solvable": self.solvable, "margin": self.margin}


def conservation_check(
    alpha_l: float,
    alpha_s: float,
    beta: float,
    n_c_over_n_l: float,
    etas: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> ConservationResult:
    """Bandwidth conservation with efficiencies ``etas = (eta_L, eta_S, eta_C)``."""
    for v in (alpha_l, alpha_s, beta, n_c_over_n_l):
        if v < 0:
            raise SeedplanError("conservation inputs must be >= 0")
    if any(not 0 <= e <= 1 for e in etas):
        raise SeedplanError("efficiencies must lie in [0, 1]")
    eta_l, eta_s, eta_c = etas
    margin = eta_l * alpha_l + eta_s * beta * alpha_s + eta_c * n_c_over_n_l - 1
    return ConservationResult(margin >= 0, margin)


@dataclass(frozen=True)
class ScalabilityQuery:
    params: StreamParams
    beta: float
    eta_leecher: float | None = None  # defaults to eta_max
    n_leechers: int = LARGE_N
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        if self.beta < 0:
            raise SeedplanError("beta must be >= 0")
        if self.eta_leecher is not None and not 0 <= self.eta_leecher <= self.params.eta_max + 1e-15:
            raise SeedplanError("eta_leecher must lie in [0, eta_max]")

    @property
    def eta_l(self) -> float:
        return self.params.eta_max if self.eta_leecher is None else self.eta_leecher


def scalability_margin(query: ScalabilityQuery, u: float) -> float:
    """``beta * eta_OPT(u) + eta_L - r/u``; the system scales where this is >= 0."""
    eta = analytic.eta_overhead_exact(query.params, u, query.n_leechers).eta
    return query.beta * eta + query.eta_l - query.params.r / u


def required_bandwidth(query: ScalabilityQuery, grid: int = 2000, rel_tol: float = 1e-9) -> float:
    """Smallest homogeneous upload for which the system is scalable.

    The exact efficiency is not monotone in ``u`` at fanout switches, so a
    geometric scan locates the first feasible grid point before bisecting
    the bracket below it.
    """
    p = query.params
    eta_l = query.eta_l
    if query.beta == 0:
        if eta_l == 0:
            raise NoSolutionError("no seeders and inefficient leechers: never scalable")
        # r / eta_max is R; return it without the rounding of the division
        return p.R if query.eta_leecher is None else p.r / eta_l
    # above r/eta_L leechers alone suffice
    hi = min(query.cap, p.r / eta_l) if eta_l > 0 else query.cap
    lo = max(2 * p.b, hi * 1e-9)
    if scalability_margin(query, hi) < 0:
        raise NoSolutionError(f"no scalable upload below {hi:g}")
    ratio = (hi / lo) ** (1 / grid)
    prev = lo
    for i in range(1, grid + 1):
        x = hi if i == grid else lo * ratio**i
        if scalability_margin(query, x) >= 0:
            hi = x
            break
        prev = x
    lo = prev
    while hi - lo > rel_tol * hi:
        mid = (lo + hi) / 2
        if scalability_margin(query, mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


# ------------------------------------------------------------ sweeps

GENERATORS = ("eta_vs_u", "eta_rel_vs_u", "input_r_vs_u", "bin_vs_opt", "u_vs_beta", "general_vs_sender")

HEADERS = {
    "eta_vs_u": ["u", "eta_exact", "eta_continuous", "epsilon_bound", "c_opt"],
    "eta_rel_vs_u": ["u", "rel_exact", "rel_continuous"],
    "input_r_vs_u": ["u", "rel_exact", "rel_input_r"],
    "bin_vs_opt": ["u", "eta_opt", "eta_bin", "level"],
    "u_vs_beta": ["beta", "u_required", "u_required_perfect"],
    "general_vs_sender": ["u", "c_opt_sender", "c_opt_general", "eta_sender", "eta_general"],
}


def _with_receiver_costs(p: StreamParams) -> StreamParams:
    if p.a_r or p.b_r:
        return p
    return replace(p, a_r=p.a, b_r=p.b)


def sweep_row(generator: str, params: StreamParams, x: float, n_leechers: int, k_max: int | None) -> list:
    p = params
    if generator == "eta_vs_u":
        res = analytic.eta_overhead_exact(p, x, n_leechers)
        return [x, res.eta, analytic.eta_overhead_continuous(p, x), analytic.epsilon_bound(p, x), res.c_opt]
    if generator == "eta_rel_vs_u":
        m = p.eta_max
        return [x, analytic.eta_overhead_exact(p, x, n_leechers).eta / m, analytic.eta_overhead_continuous(p, x) / m]
    if generator == "input_r_vs_u":
        m = p.eta_max
        return [x, analytic.eta_overhead_exact(p, x, n_leechers).eta / m, analytic.eta_input_r(p, x) / m]
    if generator == "bin_vs_opt":
        km = default_k_max(p) if k_max is None else k_max
        level, eta_bin = choose_level(p, x, km, n_leechers)
        return [x, analytic.eta_overhead_exact(p, x, n_leechers).eta, eta_bin, "" if level is None else level]
    if generator == "u_vs_beta":
        return [
            x,
            required_bandwidth(ScalabilityQuery(p, x, n_leechers=n_leechers)),
            required_bandwidth(ScalabilityQuery(StreamParams(p.r), x, n_leechers=n_leechers)),
        ]
    if generator == "general_vs_sender":
        g = _with_receiver_costs(p)
        try:
            c_gen = analytic.c_opt_general(g, x)
            eta_gen = analytic.eta_general_continuous(g, x, c_gen)
        except NegativeRadicandError:
            c_gen, eta_gen = "", ""
        return [x, analytic.continuous_c_opt(p, x), c_gen, analytic.eta_overhead_continuous(p, x), eta_gen]
    raise SeedplanError(f"unknown generator {generator!r}; expected one of {', '.join(GENERATORS)}")


def sweep_points(lo: float, hi: float, step: float) -> list[float]:
    """Grid ``lo, lo+step, ...`` up to ``hi`` inclusive, built from integer indices."""
    if step <= 0:
        raise SeedplanError("step must be positive")
    if hi < lo:
        return []
    n = math.floor((hi - lo) / step + 1e-9) + 1
    return [round(lo + i * step, 12) for i in range(n)]


def _rows_chunk(args) -> list[list]:
    generator, params, xs, n_leechers, k_max = args
    return [sweep_row(generator, params, x, n_leechers, k_max) for x in xs]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SEEDPLAN_THREADS", "1")))
    except ValueError:
        return 1


def sweep(
    generator: str,
    params: StreamParams,
    lo: float,
    hi: float,
    step: float,
    n_leechers: int = LARGE_N,
    k_max: int | None = None,
) -> tuple[list[str], list[list]]:
    """Table for one figure: header and one row per grid point."""
    if generator not in HEADERS:
        raise SeedplanError(f"unknown generator {generator!r}; expected one of {', '.join(GENERATORS)}")
    xs = sweep_points(lo, hi, step)
    workers = min(_workers(), max(1, len(xs)))
    if workers == 1:
        rows = _rows_chunk((generator, params, xs, n_leechers, k_max))
    else:
        size = math.ceil(len(xs) / workers)
        chunks = [(generator, params, xs[i : i + size], n_leechers, k_max) for i in range(0, len(xs), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [row for part in pool.map(_rows_chunk, chunks) for row in part]
    return list(HEADERS[generator]), rows


def default_range(generator: str, params: StreamParams) -> tuple[float, float, float]:
    if generator == "u_vs_beta":
        return 0.0, 4.0, 0.05
    return round(2 * params.b + 0.1, 12), 2000.0, 0.1 if generator in ("eta_vs_u", "eta_rel_vs_u") else 1.0


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()
