"""Command-line front end: single runs, seed sweeps, plots, evaluation,
and a loopback scripted-teacher server.
"""

from __future__ import annotations

import argparse
import json
import logging
import multiprocessing
import os
import sys
from dataclasses import replace

from . import __version__
from .config import (experiment_to_dict, load_json, parse_experiment,
                     parse_server, parse_sweep)
from .errors import ConfigError, NumericalFailureError, TeacherUnavailableError
from .metrics import (aggregate_runs, read_metrics_csv, write_aggregate_csv,
                      write_metrics_csv)
from .nn import PolicyValueNet
from .plot import learning_curve_svg
from .serve import serve_forever
from .teacher import ScriptedTeacher, ScriptedTeacherSpec
from .trainer import build_env_spec, evaluate, train

log = logging.getLogger("rpd.cli")


def _setup_logging() -> None:
    level_name = os.environ.get("RPD_LOG", "info").lower()
    level = {"debug": logging.DEBUG, "info": logging.INFO}.get(level_name,
                                                               logging.INFO)
    logging.basicConfig(level=level,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _write_run_outputs(out_dir: str, cfg, result) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_metrics_csv(result.metrics, os.path.join(out_dir, "metrics.csv"))
    result.policy.save(os.path.join(out_dir, "checkpoint.bin"))
    manifest = {
        "engine_version": __version__,
        "config": experiment_to_dict(cfg),
        "teacher_success": result.teacher_success,
        "wallclock_s": result.wallclock_s,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)


def cmd_run(args) -> int:
    cfg = parse_experiment(load_json(args.config))
    out_dir = args.out or os.path.join(
        "runs", os.path.splitext(os.path.basename(args.config))[0])
    try:
        result = train(cfg, checkpoint_dir=out_dir)
    except TeacherUnavailableError as exc:
        log.error("teacher unavailable, aborting run: %s", exc)
        return 3
    except NumericalFailureError as exc:
        log.error("numerical failure in %s, aborting run", exc.term)
        return 4
    _write_run_outputs(out_dir, cfg, result)
    final = result.metrics[-1]
    log.info("run finished: eval_success=%.3f eval_reward=%.3f (%s)",
             final.eval_success, final.eval_reward, out_dir)
    return 0


def _run_cell(packed) -> tuple[str, int, str]:
    """Sweep worker: one (config, seed) cell. Returns (name, seed, error)."""
    name, config_dict, seed, out_dir = packed
    try:
        cfg = replace(parse_experiment(config_dict), seed=seed)
        result = train(cfg, checkpoint_dir=out_dir)
        _write_run_outputs(out_dir, cfg, result)
        return name, seed, ""
    except Exception as exc:  # cell failures must not kill the sweep
        return name, seed, f"{type(exc).__name__}: {exc}"


def cmd_sweep(args) -> int:
    spec = parse_sweep(load_json(args.sweep))
    out_root = args.out or spec.output_dir or os.path.join(
        "runs", os.path.splitext(os.path.basename(args.sweep))[0])
    os.makedirs(out_root, exist_ok=True)

    cells = []
    for name, cfg in spec.configs.items():
        for seed in spec.seeds:
            cell_dir = os.path.join(out_root, name, f"seed{seed}")
            cells.append((name, experiment_to_dict(cfg), seed, cell_dir))

    if args.jobs > 1:
        with multiprocessing.get_context("spawn").Pool(args.jobs) as pool:
            outcomes = pool.map(_run_cell, cells)
    else:
        outcomes = [_run_cell(c) for c in cells]

    failures = [(n, s, e) for n, s, e in outcomes if e]
    for name, seed, err in failures:
        log.error("cell %s/seed%d failed: %s", name, seed, err)

    per_config: dict[str, list] = {name: [] for name in spec.configs}
    for name, seed, err in outcomes:
        if err:
            continue
        path = os.path.join(out_root, name, f"seed{seed}", "metrics.csv")
        per_config[name].append(read_metrics_csv(path))
    rows = aggregate_runs(per_config, spec.teacher_baselines)
    write_aggregate_csv(rows, os.path.join(out_root, "aggregate.csv"))

    summary = {
        "cells": len(cells),
        "failed": [{"config": n, "seed": s, "error": e} for n, s, e in failures],
    }
    with open(os.path.join(out_root, "sweep_summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
    log.info("sweep finished: %d cells, %d failed (%s)", len(cells),
             len(failures), out_root)
    return 1 if failures else 0


def cmd_plot(args) -> int:
    from .metrics import read_aggregate_csv
    rows = read_aggregate_csv(args.aggregate)
    svg = learning_curve_svg(rows, metric=args.metric,
                             title=os.path.basename(args.aggregate))
    with open(args.output, "w") as f:
        f.write(svg)
    log.info("wrote %s", args.output)
    return 0


def cmd_eval(args) -> int:
    cfg = parse_experiment(load_json(args.config))
    policy = PolicyValueNet.load(args.checkpoint)
    env_spec = build_env_spec(cfg)
    if policy.obs_dim != env_spec.obs_dim:
        raise ConfigError(f"checkpoint expects obs_dim {policy.obs_dim}, "
                          f"environment provides {env_spec.obs_dim}")
    success, reward = evaluate(policy, env_spec, args.episodes, args.seed)
    print(f"success_rate={success!r} mean_reward={reward!r}")
    return 0


def cmd_serve(args) -> int:
    port, act_dim, settings = parse_server(load_json(args.spec))
    if args.port is not None:
        port = args.port
    teacher = ScriptedTeacher(
        settings.task,
        ScriptedTeacherSpec(competence=settings.competence,
                            action_noise_std=settings.action_noise_std,
                            systematic_bias=settings.systematic_bias,
                            observes_transformed=settings.observes_transformed),
        seed=settings.seed, act_dim=act_dim)
    serve_forever(teacher, port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rpd", description="Teacher-guided PPO distillation engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one training run from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run a config x seed grid and aggregate")
    p.add_argument("sweep")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("plot", help="render learning curves from aggregate.csv")
    p.add_argument("aggregate")
    p.add_argument("output")
    p.add_argument("--metric", default="eval_success",
                   choices=["eval_success", "eval_reward", "train_reward"])
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a config's environment")
    p.add_argument("checkpoint")
    p.add_argument("config")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve-scripted-teacher",
                       help="host a scripted teacher over the HTTP protocol")
    p.add_argument("spec")
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
