"""Command-line entry point: ``kppspeed run | list-presets | sweep``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from kppspeed import __version__, config as cfgmod, io
from kppspeed.errors import ConfigError
from kppspeed.pipeline import run_config

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("kppspeed")


def _resolve(args) -> dict:
    if args.config and args.preset:
        raw = json.loads(Path(args.config).read_text()) if Path(args.config).exists() else None
        if raw is None:
            raise ConfigError(f"cannot read config {args.config}")
        raw["preset"] = args.preset
        return cfgmod.resolve(raw)
    if args.config:
        return cfgmod.load(args.config)
    if args.preset:
        return cfgmod.resolve({"preset": args.preset})
    raise ConfigError("give --config PATH or --preset NAME")


def _summary(res, quiet):
    if quiet:
        return
    sp = res.speeds
    if res.error:
        print(f"error: {res.error}", file=sys.stderr)
        return

    def f(v):
        return "-" if v is None else f"{v:.6g}"
    print(f"{res.out_dir}: w_under={f(sp.get('w_under'))} w_over={f(sp.get('w_over'))} "
          f"w_star_emp={f(sp.get('w_star_emp'))} w_upper_emp={f(sp.get('w_upper_emp'))} "
          f"verdict={res.report['verdict']}")
    failed = [k for k, v in res.report["checks"].items() if not v]
    if failed:
        print("failed checks: " + ", ".join(failed))


def cmd_run(args) -> int:
    cfg = _resolve(args)
    out = args.out_dir or cfg.get("output", {}).get("dir") or f"runs/{cfg.get('preset', 'custom')}"
    res = run_config(cfg, out, seed=args.seed)
    _summary(res, args.quiet)
    return res.status


def cmd_list(args) -> int:
    rows = cfgmod.list_presets()
    width = max(len(n) for n, _ in rows)
    for name, desc in rows:
        print(f"{name:<{width}}  {desc}")
    aliases = [(a, n) for n, c in cfgmod._preset_files().items() for a in c.get("aliases", [])]
    for alias, target in aliases:
        print(f"{alias:<{width}}  alias of {target}")
    return EXIT_OK


def _sweep_item(job):
    cfg, out, name, value = job
    try:
        res = run_config(cfg, out)
    except ConfigError as err:
        return {"param": name, "value": value, "status": EXIT_CONFIG, "error": str(err)}
    sp = res.speeds
    return {"param": name, "value": value, "status": res.status, "error": res.error,
            "w_under": sp.get("w_under"), "w_over": sp.get("w_over"), "w_star_emp": sp.get("w_star_emp"),
            "w_upper_emp": sp.get("w_upper_emp"), "verdict": (res.report or {}).get("verdict", "error"),
            "out_dir": str(out)}


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    values = [_parse_value(v) for v in (args.values or [])]
    if not values:
        raise ConfigError("sweep needs at least one value (--values)")
    if args.param not in cfgmod.SWEEP_ALIASES and "." not in args.param:
        raise ConfigError(f"sweep parameter {args.param!r} is not a recognized config key")
    base = Path(args.out_dir or f"runs/sweep_{cfg.get('preset', 'custom')}_{args.param}")
    jobs = []
    for i, v in enumerate(values):
        item = cfgmod.apply_parameter(cfg, args.param, v)
        if args.seed is not None and args.param != "seed":
            item = cfgmod.apply_parameter(item, "seed", args.seed)
        jobs.append((item, base / f"{args.param}_{i:03d}", args.param, v))
    workers = max(1, args.workers or 1)
    if workers == 1 or len(jobs) == 1:
        rows = [_sweep_item(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_item, jobs))
    cols = ["param", "value", "w_under", "w_over", "w_star_emp", "w_upper_emp", "verdict", "status"]
    path = io.write_csv(base / "sweep.csv", cols, ([r.get(c) for c in cols] for r in rows))
    if not args.quiet:
        for r in rows:
            print(", ".join(f"{c}={io.fmt(r.get(c))}" for c in cols))
        print(f"wrote {path}")
    statuses = {r["status"] for r in rows}
    for code in (EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERDICT):
        if code in statuses:
            return code
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--preset", metavar="NAME", help="preset name (see list-presets)")
    common.add_argument("--out-dir", metavar="PATH", help="output directory")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--workers", type=int, default=1, help="concurrent sweep items")
    common.add_argument("--quiet", action="store_true", help="suppress the summary")

    parser = argparse.ArgumentParser(prog="kppspeed", description="Spreading speeds of heterogeneous KPP fronts.")
    parser.add_argument("--version", action="version", version=f"kppspeed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run the pipeline for one configuration")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("list-presets", parents=[common], help="list shipped presets")
    p.set_defaults(func=cmd_list)
    p = sub.add_parser("sweep", parents=[common], help="run the pipeline over values of one parameter")
    p.add_argument("--param", required=True, help="seed, b0, alpha, epsilon, ... or a dotted config path")
    p.add_argument("--values", nargs="*", help="values (JSON literals)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
