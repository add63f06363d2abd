"""Command line entry point ``cosserat-mixdim``.

Precedence of settings: command-line flags, then the config file, then defaults.
The thread count of the sparse factorization follows ``COSSERAT_MIXDIM_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

THREADS_ENV = "COSSERAT_MIXDIM_THREADS"


def _apply_thread_env() -> None:
    n = os.environ.get(THREADS_ENV)
    if n:
        for var in ("OMP_NUM_THREADS", "MKL_NUM_THREADS", "OPENBLAS_NUM_THREADS"):
            os.environ[var] = n


def _flag_overrides(args) -> list[str]:
    items = list(args.set or [])
    if getattr(args, "order", None) is not None:
        items.append(f"order={args.order}")
    if getattr(args, "divisions", None) is not None:
        items.append(f"mesh.divisions={json.dumps(args.divisions)}")
    for key in ("vtu", "csv", "json"):
        if getattr(args, key, None) is not None:
            items.append(f"output.{key}={json.dumps(getattr(args, key))}")
    return items


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _cmd_run(args) -> int:
    from .config import load_config
    from .runner import run

    _print(run(load_config(args.config, _flag_overrides(args))))
    return 0


def _cmd_example(args) -> int:
    from .benchmarks import example_config
    from .config import load_config
    from .runner import run

    doc = example_config(args.number, args.reinforce)
    if args.dump:
        _print(doc)
        return 0
    _print(run(load_config(doc, _flag_overrides(args))))
    return 0


def _cmd_sweep(args) -> int:
    from .benchmarks import lc_sweep
    from .config import SweepSpec, apply_overrides, load_config
    from .runner import sweep
    from .io import write_csv

    if args.config is None:
        doc, spec = lc_sweep()
    else:
        doc = json.loads(open(args.config, encoding="utf-8").read())
        spec = None
    if args.parameter or args.values:
        if not (args.parameter and args.values):
            raise SystemExit("--parameter and --values go together")
        ref = dict(kv.split("=", 1) for kv in args.reference or [])
        spec = SweepSpec(args.parameter, tuple(args.values), {k: json.loads(v) for k, v in ref.items()})
    if spec is None:
        raise SystemExit("a sweep needs --parameter and --values unless the built-in Lc sweep is used")
    rows = sweep(load_config(apply_overrides(doc, _flag_overrides(args))), spec)
    if args.out:
        write_csv(rows, args.out)
    _print(rows)
    return 0


def _cmd_fit(args) -> int:
    from .fit import fit_exponential
    from .io import read_csv

    if args.csv:
        rows = read_csv(args.csv)
        pts = [(r[args.x], r[args.y]) for r in rows]
    else:
        pts = [tuple(map(float, p.split(","))) for p in args.points]
    f = fit_exponential(pts)
    _print({"a": f.a, "b": f.b, "c": f.c, "f0": f.f0, "residual": f.residual})
    return 0


def _cmd_mesh(args) -> int:
    from ..mesh import validate_conformity, write_mesh
    from .config import MeshSource
    from .runner import build_mesh

    if args.action == "gen":
        opts = json.loads(args.options) if args.options else {}
        mesh = build_mesh(MeshSource(args.generator, tuple(args.divisions), opts))
        write_mesh(mesh, args.out)
        print(f"{args.out}: {mesh.n_vertices} vertices, " + ", ".join(f"{r.name}[{len(r)}]" for r in mesh.regions))
        return 0
    from ..mesh import read_mesh

    problems = validate_conformity(read_mesh(args.file))
    for p in problems:
        print(p)
    print("ok" if not problems else f"{len(problems)} problem(s)")
    return 0 if not problems else 1


def _cmd_export(args) -> int:
    from .config import load_config
    from .io import write_vtu
    from .runner import solve_config

    write_vtu(solve_config(load_config(args.config, _flag_overrides(args))), args.out)
    print(args.out)
    return 0


def _cmd_schema(args) -> int:
    from .config import CONFIG_SCHEMA

    _print(CONFIG_SCHEMA)
    return 0


def _add_overrides(p, with_outputs=True):
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (dotted path, JSON value)")
    p.add_argument("--order", type=int)
    p.add_argument("--divisions", type=int, nargs=3)
    if with_outputs:
        p.add_argument("--vtu")
        p.add_argument("--csv")
        p.add_argument("--json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cosserat-mixdim", description="Mixed-dimensional linear Cosserat solver.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve a JSON config")
    p.add_argument("config")
    _add_overrides(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("example", help="run a built-in benchmark")
    p.add_argument("number", type=int, choices=(1, 2, 3))
    p.add_argument("--reinforce", default="none", help="none | shell | membrane (1); none | beams | plate | both (2); none | beams (3)")
    p.add_argument("--dump", action="store_true", help="print the config instead of running it")
    _add_overrides(p)
    p.set_defaults(func=_cmd_example)

    p = sub.add_parser("sweep", help="parameter sweep against a reference run (default: the Lc sweep)")
    p.add_argument("config", nargs="?")
    p.add_argument("--parameter")
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--reference", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", help="CSV output")
    _add_overrides(p, with_outputs=False)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("fit", help="fit a exp(b h) + c and report f(0)")
    p.add_argument("points", nargs="*", metavar="H,VALUE")
    p.add_argument("--csv")
    p.add_argument("--x", default="h")
    p.add_argument("--y", default="max_u")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("mesh", help="generate or validate meshes")
    msub = p.add_subparsers(dest="action", required=True)
    g = msub.add_parser("gen")
    g.add_argument("generator", choices=("box", "curved_slab", "extruded_s"))
    g.add_argument("--divisions", type=int, nargs=3, required=True)
    g.add_argument("--options", help="JSON object of generator keyword arguments")
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_mesh)
    v = msub.add_parser("validate")
    v.add_argument("file")
    v.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("export", help="solve a config and write only the VTU file")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    _add_overrides(p, with_outputs=False)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("schema", help="print the config JSON schema")
    p.set_defaults(func=_cmd_schema)
    return ap


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from .config import ConfigError

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
