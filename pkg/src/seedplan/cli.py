"""Command-line entry point: ``seedplan <verb> [options]``.

Exit status: 0 success, 1 scheme failed validation, 2 usage or parse
error, 3 any other domain error (the JSON on stderr carries its code).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from seedplan import analytic, builders, dimensioning
from seedplan.errors import ParseError, SeedplanError
from seedplan.io import OVERHEAD_PRESETS, Scenario, dump_json, load_scenario, load_scheme
from seedplan.model import Model, measure_efficiency, scheme_depth, validate_scheme
from seedplan.oracle import oracle_optimal

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


class UsageError(SeedplanError):
    code = "USAGE"


def _range(text: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI:STEP, got {text!r}") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("STEP must be positive")
    return lo, hi, step


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _subset(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [s.strip() for s in text.split(",") if s.strip()]


def _scenario(args) -> Scenario:
    if args.scenario is None:
        raise UsageError("--scenario is required for this command")
    return load_scenario(args.scenario, args.overhead)


def _emit(payload, out: str | None) -> None:
    text = dump_json(payload)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _try(fn, *args):
    # analytic results that may not apply to this instance are reported, not fatal
    try:
        val = fn(*args)
    except SeedplanError as exc:
        return {"error": exc.code, "message": str(exc)}
    return val


# ------------------------------------------------------------ verbs


def cmd_efficiency(args) -> int:
    sc = _scenario(args)
    p, pop = sc.params, sc.population
    ids = _subset(args.subset) or pop.seeder_ids
    models = [Model(args.model)] if args.model else list(Model)
    seeders = []
    for sid in ids:
        spec = pop.seeder(sid)
        row: dict = {"seeder": sid, "upload": spec.upload, "fanout_cap": spec.fanout_cap}
        for m in models:
            if m is Model.PERFECT:
                row["perfect"] = _try(lambda: float(analytic.eta_perfect_set(pop.n_leechers, spec.upload, p.r)))
            elif m is Model.FANOUT:
                if spec.fanout_cap is None:
                    row["fanout"] = {"error": "NO_FANOUT", "message": "seeder has no fanout cap"}
                else:
                    row["fanout"] = _try(lambda: float(analytic.eta_fanout_single(spec.upload, spec.fanout_cap, p.r)))
            else:
                exact_res = _try(analytic.eta_overhead_exact, p, spec.upload, pop.n_leechers)
                row["overhead"] = {
                    "exact": exact_res if isinstance(exact_res, dict) else exact_res.to_dict(),
                    "continuous": analytic.eta_overhead_continuous(p, spec.upload),
                    "input_r": analytic.eta_input_r(p, spec.upload),
                    "relative": None if isinstance(exact_res, dict) else exact_res.eta / p.eta_max,
                }
        seeders.append(row)
    total = pop.total_upload(ids)
    summary: dict = {"subset": ids, "total_upload": total}
    for m in models:
        if not ids or total == 0:
            summary[m.value] = {"error": "ZERO_UPLOAD", "message": "the seeder set has no upload"}
        elif m is Model.PERFECT:
            summary["perfect"] = _try(lambda: float(analytic.eta_perfect_set(pop.n_leechers, total, p.r)))
        elif m is Model.FANOUT:
            res = _try(
                analytic.eta_fanout_homogeneous_set,
                [(pop.seeder(s).upload, pop.seeder(s).fanout_cap or 0) for s in ids],
                pop.n_leechers,
                p.r,
            )
            summary["fanout"] = res if isinstance(res, dict) else {"eta": float(res[0]), "set_size_bound": res[1]}
        else:
            # individual optima weighted by upload: an upper estimate ignoring aggregation
            etas = [analytic.eta_overhead_exact(p, pop.seeder(s).upload, pop.n_leechers).eta for s in ids]
            summary["overhead"] = {
                "weighted_individual_eta": sum(e * pop.seeder(s).upload for e, s in zip(etas, ids)) / total
            }
    _emit({"stream": p.to_dict(), "n_leechers": pop.n_leechers, "seeders": seeders, "set": summary}, args.out)
    return EXIT_OK


def _build(args, sc: Scenario):
    p, pop = sc.params, sc.population
    model = Model(args.model or "overhead")
    builder = args.builder or {Model.PERFECT: "perfect", Model.FANOUT: "trees", Model.OVERHEAD: "dichotomic"}[model]
    subset = _subset(args.subset)
    plan = None
    if builder == "perfect":
        scheme = builders.build_perfect_broadcast(pop, p, subset, args.slots or 1)
        model = Model.PERFECT
    elif builder == "trees":
        scheme = builders.build_homogeneous_trees(pop, p, subset, args.slots or 1)
        model = Model.FANOUT
    elif builder == "monorate":
        plan, scheme = builders.build_monorate(pop, p, subset, args.slots or 1024)
        model = Model.OVERHEAD
    else:
        plan, scheme = builders.build_dichotomic(pop, p, subset, args.kmax, args.slots)
        model = Model.OVERHEAD
    return builder, model, plan, scheme


def cmd_scheme(args) -> int:
    sc = _scenario(args)
    builder, model, plan, scheme = _build(args, sc)
    report = measure_efficiency(sc.params, sc.population, scheme, _subset(args.subset), model)
    payload = {
        "builder": builder,
        "model": model.value,
        "plan": None if plan is None else plan.to_dict(),
        "efficiency": report.to_dict(),
        "depth": scheme_depth(scheme),
        "scheme": scheme.to_dict(),
    }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = _scenario(args)
    if args.scheme is None:
        raise UsageError("--scheme is required for validate")
    scheme = load_scheme(args.scheme)
    model = Model(args.model or "overhead")
    result = validate_scheme(sc.params, sc.population, scheme, model)
    payload = {"model": model.value, **result.to_dict()}
    if result.ok:
        payload["efficiency"] = measure_efficiency(
            sc.params, sc.population, scheme, _subset(args.subset), model
        ).to_dict()
    _emit(payload, args.out)
    return EXIT_OK if result.ok else EXIT_INVALID


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    model = Model(args.model or "fanout")
    res = oracle_optimal(sc.population, sc.params, _subset(args.subset), model, args.slots or 6)
    _emit({"model": model.value, **res.to_dict()}, args.out)
    return EXIT_OK


def _params_only(args):
    if args.scenario is not None:
        return load_scenario(args.scenario, args.overhead).params
    return OVERHEAD_PRESETS[args.overhead or "small"]


def cmd_dimension(args) -> int:
    p = _params_only(args)
    if args.beta_range is not None:
        betas = dimensioning.sweep_points(*args.beta_range)
    else:
        betas = [args.beta if args.beta is not None else 0.0]
    rows = []
    for beta in betas:
        q = dimensioning.ScalabilityQuery(p, beta, args.eta_leecher, args.leechers)
        rows.append({"beta": beta, "u_required": dimensioning.required_bandwidth(q)})
    _emit(
        {"stream": p.to_dict(), "eta_leecher": args.eta_leecher if args.eta_leecher is not None else p.eta_max,
         "note": dimensioning.AGGREGATION_NOTE, "results": rows},
        args.out,
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.generator is None:
        raise UsageError(f"--generator is required; one of {', '.join(dimensioning.GENERATORS)}")
    p = _params_only(args)
    rng = args.range or (args.beta_range if args.generator == "u_vs_beta" else None)
    lo, hi, step = rng or dimensioning.default_range(args.generator, p)
    header, rows = dimensioning.sweep(args.generator, p, lo, hi, step, args.leechers, args.kmax)
    text = dimensioning.to_csv(header, rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "efficiency": cmd_efficiency,
    "scheme": cmd_scheme,
    "validate": cmd_validate,
    "oracle": cmd_oracle,
    "dimension": cmd_dimension,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seedplan", description="Seeder efficiency planning for live streaming.")
    sub = parser.add_subparsers(dest="verb", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--model", choices=[m.value for m in Model])
    common.add_argument("--overhead", choices=sorted(OVERHEAD_PRESETS), help="r=100, a=0.1, b=1.7 (small) or 25 (large)")
    common.add_argument("--subset", help="comma-separated seeder ids, e.g. S0,S2")
    common.add_argument("--out", help="write the result here as well")
    common.add_argument("--slots", type=_positive, help="slot count K")
    common.add_argument("--kmax", type=int, help="deepest dichotomic level")

    sub.add_parser("efficiency", parents=[common], help="analytic efficiencies per seeder and per set")
    p = sub.add_parser("scheme", parents=[common], help="build a diffusion scheme")
    p.add_argument("--builder", choices=["perfect", "trees", "monorate", "dichotomic"])
    p = sub.add_parser("validate", parents=[common], help="check a scheme file")
    p.add_argument("--scheme", help="scheme JSON file (a 'scheme' output is accepted too)")
    sub.add_parser("oracle", parents=[common], help="exhaustive optimum on a tiny instance")
    for name, help_text in (("dimension", "bandwidth required for scalability"), ("sweep", "figure data as CSV")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--beta-range", type=_range, metavar="LO:HI:STEP")
        p.add_argument("--leechers", type=_positive, default=dimensioning.LARGE_N)
        if name == "dimension":
            p.add_argument("--beta", type=float)
            p.add_argument("--eta-leecher", type=float)
        else:
            p.add_argument("--generator", choices=dimensioning.GENERATORS)
            p.add_argument("--range", type=_range, metavar="LO:HI:STEP", help="x-axis grid")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.verb](args)
    except (ParseError, UsageError) as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return EXIT_USAGE
    except SeedplanError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
