"""Closed-form and enumerated optimal seeder efficiencies.

Functions that only use field operations stay exact when given ints or
Fractions; everything involving square roots works in floats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from seedplan.errors import NegativeRadicandError, NotHomogeneousError, SeedplanError, SetTooLargeError
from seedplan.model import StreamParams

TIE_TOL = 1e-12


def _q(x):
    # ints become Fractions so rational inputs give rational outputs
    return Fraction(x) if isinstance(x, int) else x


class Regime(str, enum.Enum):
    ZERO = "ZERO"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"
    OVERPROVISIONED = "OVERPROVISIONED"


# ------------------------------------------------------------ overhead-free


def eta_perfect_set(n_leechers: int, total_upload, r):
    """Optimal efficiency of a seeder set in a perfect system."""
    if n_leechers < 1:
        raise SeedplanError("n_leechers must be >= 1")
    total_upload, r = _q(total_upload), _q(r)
    if not total_upload > 0:
        raise SeedplanError("total upload must be positive")
    return (1 - Fraction(1, n_leechers)) * min(1, n_leechers * r / total_upload)


def eta_fanout_single(u, c: int, r):
    """Optimal efficiency of one seeder limited to ``c`` connections."""
    if c < 1:
        raise SeedplanError("fanout must be >= 1")
    u, r = _q(u), _q(r)
    if not u > 0:
        raise SeedplanError("upload must be positive")
    return (1 - Fraction(1, c)) * min(1, r * c / u)


def eta_fanout_homogeneous_set(
    seeders: Sequence[tuple[float, int]], n_leechers: int, r
) -> tuple[object, int | None]:
    """Aggregated efficiency of a proportionally homogeneous set and its size bound.

    Returns ``(eta, bound)``; ``bound`` is None when every fanout is 1 (relays
    stack without consuming leaves).
    """
    if not seeders:
        raise SeedplanError("empty seeder set")
    r = _q(r)
    ups = [_q(u) for u, _ in seeders]
    fans = [int(c) for _, c in seeders]
    if min(fans) < 1 or min(ups) <= 0:
        raise SeedplanError("seeders need positive upload and fanout")
    e = ups[0] / fans[0]
    for u, c in zip(ups, fans):
        if not math.isclose(float(u / c), float(e), rel_tol=1e-12) and u / c != e:
            raise NotHomogeneousError(f"upload/fanout ratios differ ({float(u / c)} vs {float(e)})")
    if e > r:
        raise SetTooLargeError("per-connection rate exceeds the streamrate")
    cmax = max(fans)
    bound = None if cmax == 1 else ((n_leechers - 1) // (cmax - 1)) * math.floor(r / e)
    if bound is not None and len(seeders) > bound:
        raise SetTooLargeError(f"{len(seeders)} seeders exceed the bound {bound}")
    total = sum(ups)
    eta = sum((1 - Fraction(1, c)) * u for u, c in zip(ups, fans)) / total
    return eta, bound


# ------------------------------------------------------------ linear overhead


def eta_given_u_c(params: StreamParams, u: float, c: int) -> float:
    """Best efficiency with upload ``u`` and exactly ``c`` equal-rate outputs."""
    if u <= 0:
        raise SeedplanError("upload must be positive")
    if c < 1:
        raise SeedplanError("fanout must be >= 1")
    fanout_bound = (c - 1) * params.r / u
    upload_bound = ((1 - 1 / c) - (params.b / u) * (c - 1)) / (1 + params.a)
    return max(0.0, min(fanout_bound, upload_bound))


def continuous_c_opt(params: StreamParams, u: float) -> float:
    """Real-valued fanout maximising :func:`eta_given_u_c` (ignoring any leecher cap)."""
    if params.b == 0 or u >= params.R**2 / params.b:
        return u / params.R
    return math.sqrt(u / params.b)


def max_fanout(params: StreamParams, u: float, n_leechers: int) -> int:
    if params.b > 0:
        return max(1, min(n_leechers, math.floor(u / params.b)))
    return n_leechers


def argmax_fanout(params: StreamParams, u: float, n_leechers: int) -> tuple[int, float]:
    """Integer fanout maximising ``eta_given_u_c`` on [1, max_fanout]; ties go to the smaller c.

    ``min(fanout_bound, upload_bound)`` is concave in c, so the integer
    optimum sits next to the real optimum (or at the cap).
    """
    cmax = max_fanout(params, u, n_leechers)
    star = continuous_c_opt(params, u)
    cands = {1, cmax}
    for c in (math.floor(star), math.ceil(star)):
        cands.add(min(cmax, max(1, c)))
    best_c, best = 1, eta_given_u_c(params, u, 1)
    for c in sorted(cands):
        val = eta_given_u_c(params, u, c)
        if val > best + TIE_TOL:
            best_c, best = c, val
    return best_c, best


def brute_force_fanout(params: StreamParams, u: float, n_leechers: int) -> tuple[int, float]:
    """Reference enumeration over every admissible integer fanout."""
    best_c, best = 1, eta_given_u_c(params, u, 1)
    for c in range(2, max_fanout(params, u, n_leechers) + 1):
        val = eta_given_u_c(params, u, c)
        if val > best + TIE_TOL:
            best_c, best = c, val
    return best_c, best


@dataclass(frozen=True)
class OverheadEfficiencyResult:
    eta: float
    c_opt: int
    input_rate: float
    regime: Regime
    epsilon_bound: float
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "c_opt": self.c_opt,
            "input_rate": self.input_rate,
            "regime": self.regime.value,
            "epsilon_bound": self.epsilon_bound,
            "note": self.note,
        }


def eta_overhead_exact(params: StreamParams, u: float, n_leechers: int) -> OverheadEfficiencyResult:
    """Optimal single-seeder efficiency under linear overhead, integer fanout."""
    if u < 0:
        raise SeedplanError("upload must be >= 0")
    if n_leechers < 1:
        raise SeedplanError("n_leechers must be >= 1")
    R, r, b = params.R, params.r, params.b
    if u > 0 and u >= n_leechers * R:
        return OverheadEfficiencyResult((n_leechers - 1) * r / u, n_leechers, r, Regime.OVERPROVISIONED, 0.0)
    if u <= 2 * b or u == 0:
        return OverheadEfficiencyResult(0.0, 0, 0.0, Regime.ZERO, 0.0)

    c, eta = argmax_fanout(params, u, n_leechers)
    if eta <= 0:
        return OverheadEfficiencyResult(0.0, 0, 0.0, Regime.ZERO, 0.0)
    rate = min(r, (u / c - b) / (1 + params.a))
    note = ""
    if b > 0 and u > R**2 / b:
        regime = Regime.HIGH
    else:
        regime = Regime.MEDIUM
        if continuous_c_opt(params, u) > n_leechers:
            note = "fanout capped by the number of leechers"
    return OverheadEfficiencyResult(eta, c, rate, regime, epsilon_bound(params, u), note)


def eta_overhead_continuous(params: StreamParams, u: float) -> float:
    """Continuous-fanout approximation of the optimal efficiency."""
    b = params.b
    if u <= 2 * b or u <= 0:
        return 0.0
    if b == 0 or u <= params.R**2 / b:
        return (1 - math.sqrt(b / u)) ** 2 / (1 + params.a)
    return params.eta_max - params.r / u


def epsilon_bound(params: StreamParams, u: float) -> float:
    """Upper bound on the gap between continuous and integer-fanout optima."""
    b = params.b
    if b == 0 or u <= 2 * b:
        return 0.0
    if u <= params.R**2 / b:
        return (b / u) ** 1.5 / (1 + params.a)
    return min(b / u, (b / params.R) ** 2) / (1 + params.a)


def eta_input_r(params: StreamParams, u: float) -> float:
    """Best efficiency when the seeder must take the full stream as input."""
    if u <= 0:
        return 0.0
    R, r = params.R, params.r
    k = u / R
    whole = r * (math.floor(k) - 1) / u
    shaped = (1 - (params.b / u) * math.ceil(k)) / (1 + params.a) - r / u
    return max(0.0, whole, shaped)


# ------------------------------------------------------------ receiver overhead


def c_opt_general(params: StreamParams, u: float) -> float:
    """Continuous optimal fanout when receivers also pay ``a_r e + b_r``.

    With ``a_r = b_r = 0`` this is exactly ``sqrt(u / b)``.
    """
    a, b, ar, br = params.a, params.b, params.a_r, params.b_r
    if b <= 0:
        raise SeedplanError("additive cost b must be positive")
    radicand = b * (a + ar + 1) * (u - br - a * br + ar * b + a * u)
    if radicand < 0:
        raise NegativeRadicandError(f"radicand {radicand:.6g} < 0 for u={u}")
    return (-ar * b + math.sqrt(radicand)) / (b * (1 + a))


def eta_general_continuous(params: StreamParams, u: float, c: float) -> float:
    """Efficiency of ``c`` equal outputs when the seeder also pays for receiving its input."""
    e = (u - c * params.b - params.b_r) / (c * (1 + params.a) + params.a_r)
    e = min(e, params.r)
    return max(0.0, (c - 1) * e / u)
