"""Command line entry point ``tlfea``.

Exit codes: 0 success, 1 a validation check failed, 2 usage or
configuration error, 3 a simulation step did not converge, 4 file
input/output error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

from . import config as cfgmod
from .errors import InvalidMeshError, TlfeaError, UsageError

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("tlfea")


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise UsageError(f"--set expects section.key=value, got '{item}'")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _check_threads() -> None:
    raw = os.environ.get("TLFEA_THREADS", "")
    if raw and (not raw.isdigit() or int(raw) < 1):
        raise UsageError(f"TLFEA_THREADS must be a positive integer, got '{raw}'")


# ------------------------------------------------------------------ commands

def cmd_run(args) -> int:
    from .scenarios import load_scenario, run_scenario

    scn = load_scenario(args.scenario, _parse_overrides(args.set))
    out = run_scenario(scn, out_dir=args.out, n_steps=args.steps)
    res = out.result
    print(f"{scn.name}: {len(res.reports)} steps, simulated {res.simulated_time:.6g} s, "
          f"wall {res.wall_time:.2f} s, RTF {res.rtf:.4g}")
    for name, F in out.reactions.items():
        print(f"  joint {name}: reaction {F[0]:+.6g} {F[1]:+.6g} {F[2]:+.6g} N")
    print(f"metrics: {out.csv_path}")
    print(f"report: {out.report_path}")
    if not res.all_converged:
        bad = sum(not r.converged for r in res.reports)
        print(f"error: {bad} step(s) did not converge; see {out.report_path}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import SUITES, run_suite

    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        for result in run_suite(name):
            print("\n".join(result.lines()), flush=True)
            ok &= result.passed
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


BENCH_COLUMNS = ("res", "solver", "material", "nodes", "elements", "dofs", "steps", "simulated_s",
                 "wall_s", "rtf", "inner_total", "converged_steps")


def cmd_bench(args) -> int:
    from .scenarios import build

    cfg = cfgmod.load_preset(f"cantilever_{'svk' if args.material == 'svk' else 'mr'}")
    cfg.blocks["body"][0]["res"] = args.res
    cfg.set("solver", "method", args.solver)
    if args.steps is not None:
        cfg.set("time", "n_steps", args.steps)
    scn = build(cfg)
    t0 = time.perf_counter()
    res = scn.simulation.run(scn.n_steps, scn.initial_state)
    wall = time.perf_counter() - t0
    row = {"res": args.res, "solver": args.solver, "material": args.material, "nodes": scn.mesh.n_nodes,
           "elements": scn.mesh.n_elements, "dofs": scn.mesh.n_dofs, "steps": len(res.reports),
           "simulated_s": f"{res.simulated_time:.6g}", "wall_s": f"{wall:.4f}",
           "rtf": f"{wall / res.simulated_time:.6g}",
           "inner_total": sum(r.inner_iters_total for r in res.reports),
           "converged_steps": sum(r.converged for r in res.reports)}
    path = args.csv
    new = not os.path.exists(path)
    try:
        with open(path, "a", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
            if new:
                w.writeheader()
            w.writerow(row)
    except OSError as err:
        raise OSError(f"cannot write benchmark CSV '{path}': {err}") from err
    print(",".join(BENCH_COLUMNS))
    print(",".join(str(row[c]) for c in BENCH_COLUMNS))
    print(f"appended to {path}")
    return EXIT_OK if res.all_converged else EXIT_NONCONVERGED


def cmd_mesh_info(args) -> int:
    from .io import load_mesh, mesh_info

    info = mesh_info(load_mesh(args.file))
    print("\n".join(info.lines()))
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in cfgmod.preset_names():
        print(f"{name:28s} {cfgmod.resolve(name)}")
    if args.keys:
        print()
        print(cfgmod.key_reference())
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    from .validation import SUITES

    p = argparse.ArgumentParser(prog="tlfea", description="T10 total Lagrangian FEA with contact and joints")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario file or preset; writes VTK, metrics CSV and a report")
    r.add_argument("scenario", help="config path or preset name (see 'tlfea presets')")
    r.add_argument("--out", help="output directory (default: output.dir from the config)")
    r.add_argument("--steps", type=int, help="override time.n_steps")
    r.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config key")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="run a validation suite and print a pass/fail table")
    v.add_argument("suite", choices=list(SUITES) + ["all"])
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="timing benchmarks")
    bsub = b.add_subparsers(dest="bench", required=True)
    c = bsub.add_parser("cantilever", help="T10 cantilever scaling family; appends one RTF row to a CSV")
    c.add_argument("--res", type=int, choices=(0, 2, 4), default=0)
    c.add_argument("--solver", choices=("newton", "adamw"), default="newton")
    c.add_argument("--material", choices=("svk", "mr"), default="svk")
    c.add_argument("--steps", type=int, help="override the preset step count")
    c.add_argument("--csv", default="bench_cantilever.csv", help="CSV file to append to")
    c.set_defaults(func=cmd_bench)

    m = sub.add_parser("mesh-info", help="validate a tlmesh file and print its statistics")
    m.add_argument("file")
    m.set_defaults(func=cmd_mesh_info)

    pr = sub.add_parser("presets", help="list shipped presets")
    pr.add_argument("--keys", action="store_true", help="also print every accepted config key")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_threads()
        return args.func(args)
    except UsageError as err:  # includes ConfigError
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, InvalidMeshError) as err:  # includes mesh format and output errors
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except TlfeaError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
