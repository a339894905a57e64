"""JSON scenario and scheme files.

A scenario looks like::

    {"stream": {"r": 100, "a": 0.1, "b": 1.7},
     "servers": {"n_c": 4},
     "leechers": {"count": 3},
     "seeders": [{"upload": 150, "fanout": 2}, {"upload": 100, "count": 2}]}

``stream`` may be omitted when an overhead preset is given instead.
Seeder entries expand ``count`` times and are numbered S0, S1, ... in
file order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from seedplan.errors import ParseError, SeedplanError
from seedplan.model import DiffusionScheme, Population, SeederSpec, StreamParams

OVERHEAD_PRESETS = {
    "small": StreamParams(100.0, 0.1, 1.7),
    "large": StreamParams(100.0, 0.1, 25.0),
}


@dataclass(frozen=True)
class Scenario:
    params: StreamParams
    population: Population


def _read_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    return data


def parse_stream(data: dict | None, overhead: str | None = None) -> StreamParams:
    if overhead is not None:
        if overhead not in OVERHEAD_PRESETS:
            raise ParseError(f"unknown overhead preset {overhead!r}")
        base = OVERHEAD_PRESETS[overhead]
        if data and "r" in data:
            base = StreamParams(float(data["r"]), base.a, base.b)
        return base
    if not data:
        raise ParseError("scenario has no 'stream' section and no overhead preset was given")
    try:
        return StreamParams(
            float(data["r"]),
            float(data.get("a", 0.0)),
            float(data.get("b", 0.0)),
            float(data.get("a_r", 0.0)),
            float(data.get("b_r", 0.0)),
        )
    except KeyError as exc:
        raise ParseError(f"stream section misses {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad stream section: {exc}") from exc


def parse_scenario(data: dict, overhead: str | None = None) -> Scenario:
    params = parse_stream(data.get("stream"), overhead)
    try:
        leechers = data["leechers"]
        n_l = int(leechers["count"])
        servers = data.get("servers", {})
        n_c = int(servers.get("n_c", n_l))
        seeders = []
        for entry in data.get("seeders", []):
            fan = entry.get("fanout")
            spec = SeederSpec(float(entry["upload"]), None if fan is None else int(fan))
            seeders.extend([spec] * int(entry.get("count", 1)))
        pop = Population(n_c, n_l, tuple(seeders), float(leechers.get("upload", 0.0)))
    except KeyError as exc:
        raise ParseError(f"scenario misses {exc.args[0]!r}") from exc
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, SeedplanError):
            raise ParseError(str(exc)) from exc
        raise ParseError(f"bad scenario: {exc}") from exc
    return Scenario(params, pop)


def load_scenario(path: str | Path, overhead: str | None = None) -> Scenario:
    return parse_scenario(_read_json(path), overhead)


def load_scheme(path: str | Path) -> DiffusionScheme:
    data = _read_json(path)
    if "scheme" in data and "edges" not in data:
        data = data["scheme"]
    try:
        return DiffusionScheme.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad scheme ({exc})") from exc


def dump_json(obj, path: str | Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
