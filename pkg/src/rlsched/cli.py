"""Command-line entry point.

Subcommands: train, eval, transfer, bench-time, plot, serve, bench-kernels.
Every subcommand accepts --config FILE, a flat key=value text file whose keys
mirror the long option names; precedence is built-in defaults < config file <
explicit flags.  Runs write a manifest.json recording seeds and versions.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, nets, proto
from .env import EnvConfig, SchedulingEnv, parse_env_spec
from .experiments import (
    DESK_STEPS, DESK_TRIALS, PAPER_SEEDS, PAPER_STEPS, PAPER_TRIALS,
    EvalReport, evaluate, horizon_time_ratios, measure_training_time,
    parse_policy, plot_curves, plot_eval_bars, run_training, transfer_matrix,
    transfer_wins, write_csv, write_eval_csv, write_manifest,
)
from .ppo import PPOConfig
from .scenarios import SCENARIOS, get_scenario
from .workload import load_trace

S = argparse.SUPPRESS

DEFAULTS = {
    "train": {"env": "rep=compact,trans=dense,rew=all", "steps": None, "seeds": None,
              "outdir": "runs/train", "paper_scale": False, "scenario": None},
    "eval": {"env": "", "trials": None, "seed": 0, "outdir": "runs/eval",
             "paper_scale": False, "policy": None, "scenario": None, "trace": None},
    "transfer": {"scenarios": "all", "trials": None, "seed": 0, "outdir": "runs/transfer",
                 "paper_scale": False, "params": None, "specialist": []},
    "bench-time": {"scenario": 6, "steps": 1500, "reps": 3, "outdir": "runs/bench-time"},
    "plot": {"curves": [], "band": None, "eval_report": None, "out": "runs/plots"},
    "serve": {"env": "", "scenario": None, "transport": "stdio"},
    "bench-kernels": {"iters": 2000, "steps": 2000},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlsched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=S)
        p.add_argument("--config", help="flat key=value file mirroring the flags")
        return p

    p = add("train", "train PPO agents on a scenario")
    p.add_argument("--scenario", type=int, help="scenario id 1..10")
    p.add_argument("--env", help="rep=...,trans=...,rew=...,W=...,H=...,T=...")
    p.add_argument("--steps", type=int, help="agent decisions per seed")
    p.add_argument("--seeds", help="comma-separated training seeds")
    p.add_argument("--outdir")
    p.add_argument("--paper-scale", action="store_true",
                   help="3M steps x 6 seeds, as in the full study (hours of compute)")

    p = add("eval", "evaluate a policy on a scenario")
    p.add_argument("--policy", help="random|fcfs|sjf|packer|agent:<params-file>")
    p.add_argument("--scenario", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--env", help="environment overrides for evaluation")
    p.add_argument("--trace", help="evaluate on a fixed trace file instead of sampled workloads")
    p.add_argument("--outdir")
    p.add_argument("--paper-scale", action="store_true", help="1000 trials")

    p = add("transfer", "evaluate one compact agent across scenarios")
    p.add_argument("--params", help="compact agent parameter file")
    p.add_argument("--scenarios", help="'all' or comma-separated ids")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--specialist", action="append", metavar="ID=FILE",
                   help="per-scenario specialist params for comparison (repeatable)")
    p.add_argument("--outdir")
    p.add_argument("--paper-scale", action="store_true")

    p = add("bench-time", "compare training wall-clock across representations and horizons")
    p.add_argument("--scenario", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--outdir")

    p = add("plot", "render learning curves and slowdown bars as SVG")
    p.add_argument("--curves", nargs="*", help="per-seed curve CSVs")
    p.add_argument("--band", help="aggregate band CSV")
    p.add_argument("--eval-report", help="evaluation CSV for the bar chart")
    p.add_argument("--out", help="output directory")

    p = add("serve", "serve the environment over the JSON-lines protocol")
    p.add_argument("--scenario", type=int)
    p.add_argument("--env")
    p.add_argument("--transport", choices=["stdio"])

    p = add("bench-kernels", "compare compiled vs pure NumPy kernels")
    p.add_argument("--iters", type=int)
    p.add_argument("--steps", type=int)

    return parser


def load_config(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


# types for keys whose default is None (everything else coerces from its default)
CONFIG_TYPES = {"scenario": int, "steps": int, "trials": int, "seed": int,
                "reps": int, "iters": int}


def _coerce(key, value, like):
    if not isinstance(value, str):
        return value
    if isinstance(like, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(like, list):
        return value.split(",")
    caster = CONFIG_TYPES.get(key, type(like) if like is not None else str)
    return caster(value)


def merge_options(command: str, cli: dict) -> argparse.Namespace:
    merged = dict(DEFAULTS[command])
    config_path = cli.pop("config", None)
    if config_path:
        for key, value in load_config(config_path).items():
            if key not in merged:
                raise ValueError(f"unknown config key {key!r} for {command}")
            merged[key] = _coerce(key, value, merged[key])
    merged.update(cli)
    return argparse.Namespace(**merged)


def _parse_seeds(text: str | None, paper_scale: bool) -> list[int]:
    if text is None:
        return list(range(PAPER_SEEDS)) if paper_scale else [0]
    return [int(s) for s in str(text).split(",") if s != ""]


def _require(opts, name):
    if getattr(opts, name) is None:
        raise SystemExit(f"error: --{name.replace('_', '-')} is required (flag or config file)")
    return getattr(opts, name)


def cmd_train(opts) -> int:
    scenario = get_scenario(_require(opts, "scenario"))
    steps = opts.steps if opts.steps is not None else (PAPER_STEPS if opts.paper_scale else DESK_STEPS)
    seeds = _parse_seeds(opts.seeds, opts.paper_scale)
    cfg = PPOConfig(total_steps=steps)
    runs = run_training(scenario, opts.env, cfg, seeds, opts.outdir)
    for run in runs:
        if run.error:
            print(f"seed {run.seed}: FAILED\n{run.error}", file=sys.stderr)
        else:
            print(f"seed {run.seed}: params={run.params_file} curve={run.curve_file}")
    return 1 if all(r.error for r in runs) else 0


def cmd_eval(opts) -> int:
    policy = parse_policy(_require(opts, "policy"))
    scenario = get_scenario(_require(opts, "scenario"))
    trials = opts.trials if opts.trials is not None else (PAPER_TRIALS if opts.paper_scale else DESK_TRIALS)
    trace = load_trace(opts.trace) if opts.trace else None
    row = evaluate(policy, scenario, trials, opts.seed, env_spec=opts.env,
                   trace=trace, label=opts.policy)
    outdir = Path(opts.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = EvalReport(rows=[row])
    write_eval_csv(outdir / "eval.csv", report)
    write_manifest(outdir / "manifest.json", {
        "command": "eval", "policy": opts.policy, "scenario": scenario.id,
        "trials": trials, "seed": opts.seed, "env": opts.env,
    })
    print(f"scenario {scenario.id} policy {opts.policy}: "
          f"mean slowdown {row.mean_slowdown:.4f} (std {row.std_slowdown:.4f}, "
          f"{row.trials} trials, {row.episodes_skipped} skipped)")
    return 0


def cmd_transfer(opts) -> int:
    params = nets.load_params(_require(opts, "params"))
    ids = sorted(SCENARIOS) if opts.scenarios == "all" else [int(s) for s in str(opts.scenarios).split(",")]
    trials = opts.trials if opts.trials is not None else (PAPER_TRIALS if opts.paper_scale else DESK_TRIALS)
    specialists = {}
    for item in opts.specialist or []:
        sid, _, path = item.partition("=")
        specialists[int(sid)] = nets.load_params(path)
    report = transfer_matrix(params, ids, trials, opts.seed, specialists or None)
    outdir = Path(opts.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_eval_csv(outdir / "transfer.csv", report)
    wins = transfer_wins(report)
    (outdir / "wins.json").write_text(json.dumps(wins, indent=2) + "\n", encoding="utf-8")
    write_manifest(outdir / "manifest.json", {
        "command": "transfer", "params": opts.params, "scenarios": ids,
        "trials": trials, "seed": opts.seed,
    })
    for row in report.rows:
        print(f"scenario {row.scenario_id} {row.label}: mean slowdown {row.mean_slowdown:.4f}")
    if wins:
        won = sum(w["transfer_wins"] for w in wins)
        print(f"transfer wins {won}/{len(wins)} comparisons")
    return 0


def cmd_bench_time(opts) -> int:
    rows = measure_training_time(opts.scenario, opts.steps, opts.reps)
    outdir = Path(opts.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "bench_time.csv",
              ["representation", "H", "rep_index", "seconds"],
              [(r["representation"], r["H"], r["rep_index"], r["seconds"]) for r in rows])
    ratios = horizon_time_ratios(rows)
    write_manifest(outdir / "manifest.json", {
        "command": "bench-time", "scenario": opts.scenario, "steps": opts.steps,
        "reps": opts.reps, "ratios": ratios,
    })
    for rep, ratio in ratios.items():
        print(f"{rep}: time(H=60) / time(H=20) = {ratio:.2f}")
    if {"compact", "image"} <= set(ratios):
        claim = ratios["compact"] < ratios["image"]
        print(f"compact ratio < image ratio: {claim}")
    return 0


def cmd_plot(opts) -> int:
    outdir = Path(opts.out)
    outdir.mkdir(parents=True, exist_ok=True)
    made = []
    if opts.curves or opts.band:
        plot_curves(outdir / "curves.svg", opts.curves, opts.band)
        made.append(outdir / "curves.svg")
    if opts.eval_report:
        plot_eval_bars(outdir / "slowdown.svg", opts.eval_report)
        made.append(outdir / "slowdown.svg")
    for path in made:
        print(f"wrote {path}")
    if not made:
        print("nothing to plot; pass --curves/--band/--eval-report", file=sys.stderr)
        return 1
    return 0


def cmd_serve(opts) -> int:
    scenario = get_scenario(_require(opts, "scenario"))
    env = SchedulingEnv(EnvConfig(scenario=scenario, **parse_env_spec(opts.env)))
    proto.serve(env, sys.stdin.buffer, sys.stdout.buffer)
    return 0


def cmd_bench_kernels(opts) -> int:
    bench.main(iters=opts.iters, steps=opts.steps)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "bench-time": cmd_bench_time,
    "plot": cmd_plot,
    "serve": cmd_serve,
    "bench-kernels": cmd_bench_kernels,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cli = vars(args).copy()
    command = cli.pop("command")
    opts = merge_options(command, cli)
    return COMMANDS[command](opts)


if __name__ == "__main__":
    sys.exit(main())
