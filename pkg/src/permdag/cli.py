"""Command-line interface: ``permdag {estimate,benchmark,heatmap,simulate}``.

Settings come from defaults, then an optional JSON config file, then flags.
Exit codes: 0 success, 2 bad usage or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dagwishart import PriorTemplate
from .ensemble import Variant, estimate
from .errors import InputError, NumericalError
from .io import dumps_record, estimate_record, format_matrix, read_matrix, write_dag, write_json, write_matrix
from .plotting import write_heatmaps
from .selection import SelectionConfig
from .simbench import (REP_HEADER, SUMMARY_HEADER, BenchmarkConfig, Case, ScenarioSpec, make_omega,
                       rep_csv_rows, rep_rng, run_benchmark, sample_gaussian, summary_csv_rows)

log = logging.getLogger("permdag")

CONFIG_VERSION = 1
_TOP_KEYS = {"version", "seed", "workers", "K", "variant", "grid_size", "selection", "prior",
             "estimate", "benchmark", "simulate"}
_SELECTION_KEYS = {f.name for f in fields(SelectionConfig)} - {"seed"}
_PRIOR_KEYS = {"shape_offset"}
_ESTIMATE_KEYS = {"data"}
_BENCHMARK_KEYS = {"scenarios", "methods", "figures"}
_SCENARIO_KEYS = {"case", "p", "n", "reps"}
_SIMULATE_KEYS = {"case", "p", "n"}


def _check_keys(section: str, obj: Any, allowed: set[str]) -> dict:
    if not isinstance(obj, dict):
        raise InputError(f"config section {section!r} must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise InputError(f"unknown key(s) in config section {section!r}: {', '.join(unknown)}")
    return obj


def load_config(path: str | Path | None) -> dict:
    """Parse and validate a run config; ``None`` gives an empty config."""
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from None
    _check_keys("top level", cfg, _TOP_KEYS)
    if cfg.get("version") != CONFIG_VERSION:
        raise InputError(f"config version must be {CONFIG_VERSION}")
    _check_keys("selection", cfg.get("selection", {}), _SELECTION_KEYS)
    _check_keys("prior", cfg.get("prior", {}), _PRIOR_KEYS)
    _check_keys("estimate", cfg.get("estimate", {}), _ESTIMATE_KEYS)
    bench = _check_keys("benchmark", cfg.get("benchmark", {}), _BENCHMARK_KEYS)
    for sc in bench.get("scenarios", []):
        _check_keys("benchmark.scenarios", sc, _SCENARIO_KEYS)
    _check_keys("simulate", cfg.get("simulate", {}), _SIMULATE_KEYS)
    return cfg


def _pick(flag, cfg: dict, key: str, default=None):
    return flag if flag is not None else cfg.get(key, default)


def _selection(cfg: dict, seed: int) -> SelectionConfig:
    try:
        return SelectionConfig(**cfg.get("selection", {}), seed=seed)
    except TypeError as exc:
        raise InputError(f"bad selection settings: {exc}") from None


def _prior(cfg: dict) -> PriorTemplate:
    return PriorTemplate(shape_offset=float(cfg.get("prior", {}).get("shape_offset", 10.0)))


def _echo(selection: SelectionConfig, prior: PriorTemplate, **extra) -> dict:
    # worker count is left out so outputs do not depend on it
    sel = selection.to_dict()
    sel.pop("seed")
    return {"selection": sel, "prior": {"shape_offset": prior.shape_offset}, **extra}


def _out_dir(path: str | None) -> Path:
    if path is None:
        raise InputError("--out is required")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
    return out


def cmd_estimate(args) -> None:
    cfg = load_config(args.config)
    data = args.data or cfg.get("estimate", {}).get("data")
    if data is None:
        raise InputError("no data file given")
    seed = int(_pick(args.seed, cfg, "seed", 0))
    K = int(_pick(args.K, cfg, "K", 100))
    variant = Variant.parse(_pick(args.variant, cfg, "variant", Variant.DAGW_BIC.value))
    grid_size = int(_pick(args.grid_size, cfg, "grid_size", 50))
    workers = int(_pick(args.workers, cfg, "workers", 1))
    selection, prior = _selection(cfg, seed), _prior(cfg)
    out = _out_dir(args.out)

    Y = read_matrix(data)
    t0 = time.perf_counter()
    est = estimate(Y, K=K, cfg=selection, prior=prior, variant=variant,
                   rng=np.random.default_rng(seed), grid_size=grid_size, workers=workers)
    elapsed = time.perf_counter() - t0
    echo = _echo(selection, prior, K=K, variant=variant.value, grid_size=grid_size,
                 data=Path(data).name)
    write_json(out / "estimate.json", estimate_record(est, seed, echo))
    write_matrix(out / "omega.txt", est.omega)
    write_json(out / "timing.json", {"wall_clock_seconds": elapsed, "workers": workers})
    print(f"wrote {out / 'estimate.json'} and {out / 'omega.txt'} "
          f"(tau_b={est.tau_b:.4g}, {elapsed:.1f}s)")


def _scenarios(args, cfg: dict, seed: int) -> list[ScenarioSpec]:
    bench = cfg.get("benchmark", {})
    if args.case is not None or args.p is not None:
        if args.case is None or args.p is None:
            raise InputError("--case and --p must be given together")
        raw = [{"case": args.case, "p": args.p, "n": args.n or 100, "reps": args.reps or 20}]
    else:
        raw = bench.get("scenarios")
        if not raw:
            raise InputError("no benchmark scenarios given")
        raw = [dict(sc, **({"reps": args.reps} if args.reps else {}),
                    **({"n": args.n} if args.n else {})) for sc in raw]
    return [ScenarioSpec(Case.parse(sc["case"]), int(sc["p"]), int(sc.get("n", 100)),
                         int(sc.get("reps", 20)), seed) for sc in raw]


def cmd_benchmark(args) -> None:
    cfg = load_config(args.config)
    seed = _pick(args.seed, cfg, "seed")
    if seed is None:
        raise InputError("benchmark runs need a seed (--seed or config 'seed')")
    seed = int(seed)
    bench = cfg.get("benchmark", {})
    methods = args.methods if args.methods is not None else bench.get(
        "methods", [v.value for v in Variant])
    if not methods:
        raise InputError("method list is empty")
    K = int(_pick(args.K, cfg, "K", 100))
    grid_size = int(_pick(args.grid_size, cfg, "grid_size", 50))
    workers = int(_pick(args.workers, cfg, "workers", 1))
    figures = bool(args.figures or bench.get("figures", False))
    selection, prior = _selection(cfg, seed), _prior(cfg)
    bcfg = BenchmarkConfig(tuple(Variant.parse(m) for m in methods), K, grid_size, selection, prior)
    specs = _scenarios(args, cfg, seed)
    out = _out_dir(args.out)

    echo = _echo(selection, prior, K=K, grid_size=grid_size, methods=[m.value for m in bcfg.methods],
                 scenarios=[{"case": s.case.slug, "p": s.p, "n": s.n, "reps": s.reps} for s in specs])
    header = "# " + json.dumps({"seed": seed, "config": echo}, sort_keys=True) + "\n"
    timing = {}
    summary_rows = []
    with open(out / "reps.csv", "w", newline="") as fh:
        fh.write(header)
        rep_writer = csv.writer(fh, lineterminator="\n")
        rep_writer.writerow(REP_HEADER)
        for spec in specs:
            t0 = time.perf_counter()

            def flush(res, spec=spec):
                rep_writer.writerows(rep_csv_rows(spec, res))
                fh.flush()
                log.info("case %s p=%d rep %d done", spec.case.slug, spec.p, res.rep)

            result = run_benchmark(spec, bcfg, workers=workers, on_rep=flush)
            timing[f"{spec.case.slug}_p{spec.p}_n{spec.n}"] = time.perf_counter() - t0
            summary_rows += result.rows
            if figures:
                _benchmark_figures(out / "figures", result)
    with open(out / "results.csv", "w", newline="") as fh:
        fh.write(header)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(summary_csv_rows(summary_rows))
    write_json(out / "timing.json", {"wall_clock_seconds": timing, "workers": workers})
    print(f"wrote {out / 'results.csv'} ({len(summary_rows)} rows)")


def _benchmark_figures(folder: Path, result) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    first = result.reps[0]
    stem = f"{result.spec.case.slug}_p{result.spec.p}"
    names = ["true"] + [v.value for v in first.estimates]
    mats = [first.omega0] + list(first.estimates.values())
    titles = ["true precision"] + [v.label for v in first.estimates]
    write_heatmaps([folder / f"{stem}_{name}.svg" for name in names], mats, titles)


def cmd_heatmap(args) -> None:
    out = _out_dir(args.out)
    mats = [read_matrix(path) for path in args.inputs]
    paths = [out / (Path(path).stem + ".svg") for path in args.inputs]
    if len(set(paths)) != len(paths):
        raise InputError("input file names must have distinct stems")
    vmax = write_heatmaps(paths, mats)
    print(f"wrote {len(paths)} heatmap(s) to {out} (scale 0..{vmax:.4g})")


def cmd_simulate(args) -> None:
    cfg = load_config(args.config)
    sim = cfg.get("simulate", {})
    seed = int(_pick(args.seed, cfg, "seed", 0))
    case = _pick(args.case, sim, "case")
    p = _pick(args.p, sim, "p")
    if case is None or p is None:
        raise InputError("simulate needs --case and --p")
    spec = ScenarioSpec(Case.parse(case), int(p), int(_pick(args.n, sim, "n", 100)), 1, seed)
    out = _out_dir(args.out)
    # same stream as repetition 0 of a benchmark with this seed
    rng = rep_rng(seed, 0)
    omega0, dag0 = make_omega(spec, rng)
    Y = sample_gaussian(omega0, spec.n, rng)
    write_matrix(out / "omega0.txt", omega0)
    write_dag(out / "dag0.txt", dag0)
    write_matrix(out / "data.txt", Y)
    print(f"wrote omega0.txt, dag0.txt and data.txt ({spec.n} x {spec.p}) to {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permdag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--out", help="output directory")
        if seed:
            p.add_argument("--seed", type=int)

    p = sub.add_parser("estimate", help="estimate a precision matrix from a data file")
    common(p)
    p.add_argument("data", nargs="?", help="n x p data matrix, rows are observations")
    p.add_argument("--K", type=int, help="number of permutations")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--grid-size", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("benchmark", help="run the simulation study")
    common(p)
    p.add_argument("--case", help="1-5 or a case name")
    p.add_argument("--p", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--methods", nargs="*", choices=[v.value for v in Variant])
    p.add_argument("--K", type=int)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--figures", action="store_true", help="write heatmaps of the first repetition")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("heatmap", help="render matrix files as SVG heatmaps")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("simulate", help="write a true precision, its DAG and sampled data")
    common(p)
    p.add_argument("--case")
    p.add_argument("--p", type=int)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except InputError as exc:
        print(f"permdag {args.command}: input error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"permdag {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
