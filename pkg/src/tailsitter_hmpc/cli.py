"""Command-line entry point: ``tailsitter-hmpc <subcommand> ...``.

Every subcommand takes ``--seed`` and an optional JSON ``--config`` file whose
keys mirror the matching configuration dataclass; explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import dump_json, from_dict, load_json, to_dict
from .core import VehicleParams
from .data import build_dataset, read_dataset, read_raw_log, write_dataset, write_raw_log
from .ffnn import TrainConfig, load_model, save_model, train_lm
from .harness import (
    CONTROLLERS,
    DEFAULT_DURATIONS,
    SUITE_CONTROLLERS,
    SUITE_TRAJECTORIES,
    CollectConfig,
    ExperimentConfig,
    SuiteConfig,
    TrajectorySpec,
    benchmark_solver,
    benchmark_suite,
    collect_data,
    identify_params,
    prepare_models,
    run_closed_loop,
)
from .plant import WindField

log = logging.getLogger("tailsitter_hmpc")


def _load_config(cls, path: str | None):
    return cls() if path is None else from_dict(cls, load_json(path))


def _load_params(path: str | None, default: VehicleParams) -> VehicleParams:
    return default if path is None else from_dict(VehicleParams, load_json(path))


def _read_logs(directory: str):
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise ValueError(f"no log CSVs in {directory}")
    return [read_raw_log(p) for p in paths]


def _print(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


# --- subcommands ---------------------------------------------------------------------


def cmd_collect(args) -> None:
    cfg = _load_config(CollectConfig, args.config)
    cfg = replace(cfg, seed=args.seed, reduced=args.reduced or cfg.reduced, raw_rate=args.raw_rate or cfg.raw_rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logs = collect_data(cfg)
    for lg in logs:
        write_raw_log(lg, out / f"{lg.name}.csv")
    _print({"segments": len(logs), "rows": sum(len(lg) for lg in logs), "out": str(out)})


def cmd_build_dataset(args) -> None:
    params = _load_params(args.params, VehicleParams())
    ds = build_dataset(_read_logs(args.logs), params, args.window, seed=args.seed)
    write_dataset(ds, args.out)
    _print({"samples": len(ds), "split": ds.counts(), "out": args.out})


def cmd_identify(args) -> None:
    base = _load_params(args.params, VehicleParams())
    params = identify_params(_read_logs(args.logs), read_dataset(args.dataset), base, args.window)
    dump_json(params, args.out)
    _print(to_dict(params))


def cmd_train(args) -> None:
    cfg = _load_config(TrainConfig, args.config)
    cfg = replace(cfg, seed=args.seed, max_epochs=args.epochs or cfg.max_epochs)
    model, report = train_lm(read_dataset(args.dataset), args.hidden, cfg)
    save_model(model, args.out)
    _print(report.to_dict())


def cmd_run(args) -> None:
    cfg = _load_config(ExperimentConfig, args.config)
    over: dict = {"seed": args.seed, "record_timing": args.timing or cfg.record_timing}
    if args.controller:
        over["controller"] = args.controller
    if args.trajectory:
        over["trajectory"] = TrajectorySpec(args.trajectory)
        over["duration"] = DEFAULT_DURATIONS[args.trajectory]
    if args.duration:
        over["duration"] = args.duration
    if args.wind_x is not None:
        over["wind"] = WindField.constant(args.wind_x) if args.wind_x != 0 else WindField()
    if args.model:
        over["model_path"] = args.model
    if args.params:
        over["params"] = _load_params(args.params, cfg.params)
    if args.out:
        over["output_csv"] = args.out
    cfg = replace(cfg, **over)
    _, metrics = run_closed_loop(cfg)
    _print(metrics.to_dict())


def _suite_models(args, cfg: SuiteConfig):
    if args.models:
        d = Path(args.models)
        params = from_dict(VehicleParams, load_json(d / "params.json"))
        residuals = {}
        for name, fname in (("hmpc", "model.json"), ("hmpc_star", "model_reduced.json")):
            if (d / fname).exists():
                residuals[name] = load_model(d / fname)
        return params, residuals
    prepared = prepare_models(args.seed, cfg, Path(args.out) / "models")
    return prepared.params, prepared.residuals


def cmd_suite(args) -> None:
    cfg = _load_config(SuiteConfig, args.config)
    t0 = time.perf_counter()
    params, residuals = _suite_models(args, cfg)
    report = benchmark_suite(
        params, residuals, args.out, seed=args.seed,
        controllers=args.controllers or SUITE_CONTROLLERS,
        trajectories=args.trajectories or SUITE_TRAJECTORIES,
        plant=cfg.plant, mpc=cfg.mpc, gains=cfg.gains, record_timing=args.timing,
    )  # fmt: skip
    log.info("suite finished in %.1f s", time.perf_counter() - t0)
    _print(report["reductions"])


def cmd_bench_solver(args) -> None:
    cfg = _load_config(SuiteConfig, args.config)
    params = _load_params(args.params, cfg.plant.params)
    models = {"nonlinear": None}
    for spec in args.model:
        label, _, path = spec.partition("=")
        if not path:
            raise ValueError(f"--model expects LABEL=PATH, got {spec!r}")
        models[label] = load_model(path)
    table = benchmark_solver(models, params, args.n_solves, cfg.mpc, args.seed)
    if args.out:
        Path(args.out).write_text(json.dumps(table, indent=1, sort_keys=True) + "\n")
    _print(table)


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tailsitter-hmpc", description="Tail-sitter hybrid-model MPC experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", help="JSON file with configuration overrides")
        sp.set_defaults(func=fn)
        return sp

    sp = add("collect", cmd_collect, "fly the excitation program and write raw logs")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--reduced", action="store_true", help="reduced speed envelope")
    sp.add_argument("--raw-rate", type=float, default=None, help="log at this rate (Hz) with uneven spacing")

    sp = add("build-dataset", cmd_build_dataset, "turn raw logs into a residual dataset")
    sp.add_argument("--logs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--params", help="VehicleParams JSON for the nominal model")
    sp.add_argument("--window", type=int, default=15)

    sp = add("identify", cmd_identify, "identify attitude time constants and drag")
    sp.add_argument("--logs", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--params")
    sp.add_argument("--window", type=int, default=15)

    sp = add("train", cmd_train, "train the residual network with Levenberg-Marquardt")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--hidden", type=int, default=10)
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--out", required=True)

    sp = add("run", cmd_run, "one closed-loop experiment")
    sp.add_argument("--controller", choices=CONTROLLERS)
    sp.add_argument("--trajectory", choices=tuple(DEFAULT_DURATIONS))
    sp.add_argument("--duration", type=float)
    sp.add_argument("--wind-x", type=float, default=None, help="constant wind along x (m/s)")
    sp.add_argument("--model", help="network JSON for hmpc")
    sp.add_argument("--params", help="identified VehicleParams JSON")
    sp.add_argument("--out", help="run CSV path")
    sp.add_argument("--timing", action="store_true", help="record solve times in the CSV")

    sp = add("suite", cmd_suite, "controller x trajectory x wind comparison")
    sp.add_argument("--out", required=True)
    sp.add_argument("--models", help="directory with params.json, model.json, model_reduced.json")
    sp.add_argument("--controllers", nargs="+", choices=SUITE_CONTROLLERS)
    sp.add_argument("--trajectories", nargs="+", choices=SUITE_TRAJECTORIES)
    sp.add_argument("--timing", action="store_true", help="also write timing.json")

    sp = add("bench-solver", cmd_bench_solver, "OCP solve-time table per prediction model")
    sp.add_argument("--model", action="append", default=[], help="LABEL=PATH, repeatable")
    sp.add_argument("--params")
    sp.add_argument("--n-solves", type=int, default=1000)
    sp.add_argument("--out")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
