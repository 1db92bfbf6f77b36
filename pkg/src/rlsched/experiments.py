"""Study orchestration: training batches, thousand-trial evaluations, transfer
matrices, timing comparisons, and CSV/SVG emission.

Reproducibility: every run directory gets a manifest recording seeds,
package/backend versions, and the exact configuration.  Evaluation workload
seeds are derived from the report seed and trial index only, never from the
policy, so two policies evaluated with the same seed face identical
workloads.
"""

from __future__ import annotations

import csv
import json
import platform
import time
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__, backend, nets
from .baselines import HEURISTIC_KINDS, HeuristicPolicy
from .baselines import act as heuristic_act
from .cluster import average_slowdown
from .env import EnvConfig, SchedulingEnv, parse_env_spec
from .nets import PolicyParams, ShapeError
from .ppo import PPOConfig, TrainingLog, train
from .scenarios import ScenarioConfig, get_scenario
from .stats import welch_t_test
from .workload import Trace

Policy = Union[HeuristicPolicy, PolicyParams]

DESK_TRIALS = 200
PAPER_TRIALS = 1000
DESK_STEPS = 100_000
PAPER_STEPS = 3_000_000
PAPER_SEEDS = 6


def compact_length(H: int, W: int) -> int:
    return 2 * H + 8 * W + 1


def episode_seed(report_seed: int, trial: int) -> int:
    """Workload seed for one evaluation episode; policy-independent."""
    return int(np.random.SeedSequence([report_seed, trial]).generate_state(1)[0])


def action_seed(report_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([report_seed, trial, 1]).generate_state(1)[0])


def bind_policy(policy: Policy, env: SchedulingEnv):
    """Return action_fn(obs, rng) -> int, checking observation compatibility."""
    if isinstance(policy, PolicyParams):
        policy.check_input(env.config.observation_length)

        def action_fn(obs, rng):
            probs, _ = nets.forward(policy, obs.ravel())
            return int(rng.choice(len(probs), p=probs))

        return action_fn

    def action_fn(obs, rng):
        window, _, free = env.window_view()
        return heuristic_act(policy, window, free, env.config.W, rng)

    return action_fn


def parse_policy(spec: str) -> Policy:
    """`random|fcfs|sjf|packer` or `agent:<params-file>`."""
    if spec.startswith("agent:"):
        return nets.load_params(spec[len("agent:"):])
    if spec in HEURISTIC_KINDS:
        return HeuristicPolicy(spec)
    raise ValueError(f"unknown policy {spec!r}; expected one of {HEURISTIC_KINDS} or agent:<file>")


def run_episode(env: SchedulingEnv, action_fn, rng: np.random.Generator) -> None:
    """Step the already-reset env until done (sampling actions from action_fn)."""
    obs = env.observe()
    done = env.done
    while not done:
        obs, _, done, _ = env.step(action_fn(obs, rng))


@dataclass
class EvalRow:
    label: str
    scenario_id: int
    trials: int
    mean_slowdown: float
    std_slowdown: float
    seed: int
    episodes: np.ndarray  # per-episode average slowdown over completed jobs
    episodes_skipped: int = 0  # episodes that completed no job


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def pairwise_p_values(self) -> list[dict]:
        """Welch p-values for every pair of rows sharing a scenario."""
        out = []
        for i, a in enumerate(self.rows):
            for b in self.rows[i + 1:]:
                if a.scenario_id != b.scenario_id:
                    continue
                res = welch_t_test(a.episodes, b.episodes)
                out.append({
                    "scenario": a.scenario_id, "a": a.label, "b": b.label,
                    "t": res.t, "dof": res.dof, "p": res.p,
                })
        return out


def evaluate(
    policy: Policy,
    scenario: Union[int, ScenarioConfig],
    trials: int,
    seed: int,
    env_spec: str = "",
    trace: Optional[Trace] = None,
    label: Optional[str] = None,
) -> EvalRow:
    """Mean/std of per-episode average slowdown over `trials` episodes.

    Episodes use dense transitions unless env_spec says otherwise; the metric
    counts only jobs completed within the episode.
    """
    sc = get_scenario(scenario) if isinstance(scenario, int) else scenario
    kwargs = {"transitions": "dense"}
    kwargs.update(parse_env_spec(env_spec))
    if isinstance(policy, PolicyParams):
        kwargs.setdefault("W", policy.W)
        kwargs.setdefault("H", policy.H)
    env = SchedulingEnv(EnvConfig(scenario=sc, **kwargs))
    action_fn = bind_policy(policy, env)

    slowdowns = []
    skipped = 0
    for trial in range(trials):
        env.reset(seed=episode_seed(seed, trial), trace=trace)
        rng = np.random.default_rng(action_seed(seed, trial))
        run_episode(env, action_fn, rng)
        if env.state.completed:
            slowdowns.append(float(average_slowdown(env.state.completed)))
        else:
            skipped += 1
    episodes = np.asarray(slowdowns)
    if label is None:
        label = policy.kind if isinstance(policy, HeuristicPolicy) else "agent"
    return EvalRow(
        label=label,
        scenario_id=sc.id,
        trials=trials,
        mean_slowdown=float(episodes.mean()) if episodes.size else float("nan"),
        std_slowdown=float(episodes.std(ddof=1)) if episodes.size > 1 else 0.0,
        seed=seed,
        episodes=episodes,
        episodes_skipped=skipped,
    )


def require_compact(params: PolicyParams) -> None:
    if params.input_dim != compact_length(params.H, params.W):
        raise ShapeError(
            f"parameters have input width {params.input_dim}, which is not the "
            f"compact width {compact_length(params.H, params.W)} for H={params.H}, "
            f"W={params.W}: image-like agents cannot transfer across cluster sizes"
        )


def transfer_matrix(
    params: PolicyParams,
    scenario_ids: Sequence[int],
    trials: int,
    seed: int,
    specialists: Optional[dict[int, PolicyParams]] = None,
) -> EvalReport:
    """Evaluate one compact agent on every scenario without retraining."""
    require_compact(params)
    report = EvalReport()
    for sid in scenario_ids:
        report.rows.append(evaluate(params, sid, trials, seed, label="transfer"))
        if specialists and sid in specialists:
            report.rows.append(evaluate(specialists[sid], sid, trials, seed, label="specialist"))
    return report


def transfer_wins(report: EvalReport) -> list[dict]:
    """Per-scenario transfer-vs-specialist comparison with Welch p-values."""
    by_scenario: dict[int, dict[str, EvalRow]] = {}
    for row in report.rows:
        by_scenario.setdefault(row.scenario_id, {})[row.label] = row
    out = []
    for sid, rows in sorted(by_scenario.items()):
        if "transfer" not in rows or "specialist" not in rows:
            continue
        t_row, s_row = rows["transfer"], rows["specialist"]
        res = welch_t_test(t_row.episodes, s_row.episodes)
        out.append({
            "scenario": sid,
            "transfer_mean": t_row.mean_slowdown,
            "specialist_mean": s_row.mean_slowdown,
            "transfer_wins": t_row.mean_slowdown < s_row.mean_slowdown,
            "p": res.p,
        })
    return out


def make_env_factory(scenario: ScenarioConfig, variant: str):
    kwargs = parse_env_spec(variant)
    return lambda: SchedulingEnv(EnvConfig(scenario=scenario, **kwargs))


@dataclass
class TrainingRun:
    seed: int
    params_file: Optional[str]
    curve_file: Optional[str]
    error: Optional[str] = None


def run_training(
    scenario: Union[int, ScenarioConfig],
    variant: str,
    ppo_config: PPOConfig,
    seeds: Sequence[int],
    outdir: Union[str, Path],
) -> list[TrainingRun]:
    """One curve CSV and one params file per seed, plus an aggregate band file.

    A failed seed is recorded and skipped; the batch keeps going.
    """
    sc = get_scenario(scenario) if isinstance(scenario, int) else scenario
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    factory = make_env_factory(sc, variant)
    runs: list[TrainingRun] = []
    curves: list[list[tuple[int, float]]] = []
    for seed in seeds:
        try:
            params, log = train(factory, ppo_config, seed=seed)
        except Exception as exc:  # keep the batch alive, record the failure
            runs.append(TrainingRun(seed, None, None, error=f"{exc}\n{traceback.format_exc()}"))
            continue
        params_file = outdir / f"params_s{seed}.bin"
        curve_file = outdir / f"curve_s{seed}.csv"
        nets.save_params(params, params_file)
        write_csv(curve_file, ["agent_step", "mean_return"], log.curve)
        curves.append(log.curve)
        runs.append(TrainingRun(seed, str(params_file), str(curve_file)))
    if curves:
        write_curve_band(outdir / "curve_band.csv", curves)
    write_manifest(outdir / "manifest.json", {
        "command": "train",
        "scenario": asdict(sc),
        "variant": variant,
        "ppo": asdict(ppo_config),
        "seeds": list(seeds),
        "failures": {r.seed: r.error for r in runs if r.error},
    })
    return runs


def write_curve_band(path: Union[str, Path], curves: Sequence[Sequence[tuple[int, float]]]) -> None:
    """Aggregate seed curves into (step, mean, std) rows; std is the sample
    standard deviation across seeds (ddof=1, 0 for a single seed)."""
    n = min(len(c) for c in curves)
    rows = []
    for i in range(n):
        step = curves[0][i][0]
        vals = np.array([c[i][1] for c in curves])
        rows.append((step, float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0))
    write_csv(path, ["agent_step", "mean", "std"], rows)


def measure_training_time(
    scenario: Union[int, ScenarioConfig],
    steps: int,
    reps: int = 3,
    representations: Sequence[str] = ("compact", "image"),
    horizons: Sequence[int] = (20, 60),
    base_variant: str = "trans=sparse,rew=window",
) -> list[dict]:
    """Wall-clock training time per (representation, horizon), reps times each."""
    sc = get_scenario(scenario) if isinstance(scenario, int) else scenario
    cfg = PPOConfig(total_steps=steps)
    rows = []
    for rep in representations:
        for H in horizons:
            variant = f"rep={rep},{base_variant},H={H}"
            factory = make_env_factory(sc, variant)
            for r in range(reps):
                t0 = time.perf_counter()
                train(factory, cfg, seed=r)
                rows.append({
                    "representation": rep, "H": H, "rep_index": r,
                    "seconds": time.perf_counter() - t0,
                })
    return rows


def horizon_time_ratios(rows: Sequence[dict], horizons: Sequence[int] = (20, 60)) -> dict[str, float]:
    """Mean time at the larger horizon over mean time at the smaller, per representation."""
    lo, hi = horizons
    out = {}
    for rep in sorted({r["representation"] for r in rows}):
        t_lo = np.mean([r["seconds"] for r in rows if r["representation"] == rep and r["H"] == lo])
        t_hi = np.mean([r["seconds"] for r in rows if r["representation"] == rep and r["H"] == hi])
        out[rep] = float(t_hi / t_lo)
    return out


# ---------------------------------------------------------------------------
# files: CSV, manifests, SVG charts


def write_csv(path: Union[str, Path], header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(list(row))


def read_csv(path: Union[str, Path]) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        return header, [row for row in reader if row]


def write_eval_csv(path: Union[str, Path], report: EvalReport) -> None:
    write_csv(
        path,
        ["scenario", "policy", "trials", "mean_slowdown", "std_slowdown", "skipped", "seed"],
        [
            (r.scenario_id, r.label, r.trials, r.mean_slowdown, r.std_slowdown, r.episodes_skipped, r.seed)
            for r in report.rows
        ],
    )


def write_manifest(path: Union[str, Path], payload: dict) -> None:
    manifest = {
        "rlsched_version": __version__,
        "backend": backend.active_backend(),
        "numpy_version": np.__version__,
        "python": platform.python_version(),
        "created_unix": time.time(),
    }
    manifest.update(payload)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
        f.write("\n")


def _require_columns(header: Sequence[str], needed: Sequence[str], path) -> dict[str, int]:
    missing = [c for c in needed if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing} (found {list(header)})")
    return {c: header.index(c) for c in header}


def plot_curves(
    out_svg: Union[str, Path],
    curve_files: Sequence[Union[str, Path]] = (),
    band_file: Optional[Union[str, Path]] = None,
    title: str = "learning curves",
) -> None:
    """Line chart of learning curves; the band file adds a mean +/- std ribbon."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for path in curve_files:
        header, rows = read_csv(path)
        col = _require_columns(header, ["agent_step", "mean_return"], path)
        xs = [float(r[col["agent_step"]]) for r in rows]
        ys = [float(r[col["mean_return"]]) for r in rows]
        ax.plot(xs, ys, linewidth=1.0, label=Path(path).stem)
    if band_file is not None:
        header, rows = read_csv(band_file)
        col = _require_columns(header, ["agent_step", "mean", "std"], band_file)
        xs = [float(r[col["agent_step"]]) for r in rows]
        mean = np.array([float(r[col["mean"]]) for r in rows])
        std = np.array([float(r[col["std"]]) for r in rows])
        ax.plot(xs, mean, color="k", linewidth=1.5, label="mean")
        if len(xs) > 1:
            ax.fill_between(xs, mean - std, mean + std, alpha=0.25, color="k")
    ax.set_xlabel("agent steps")
    ax.set_ylabel("mean episodic return")
    ax.set_title(title)
    if curve_files or band_file:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_svg, format="svg")
    plt.close(fig)


def plot_eval_bars(out_svg: Union[str, Path], eval_csv: Union[str, Path], title: str = "average slowdown") -> None:
    """Grouped bar chart of mean slowdown per scenario (ordered by id), one
    bar group per policy label, with one-std whiskers."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, rows = read_csv(eval_csv)
    col = _require_columns(header, ["scenario", "policy", "mean_slowdown", "std_slowdown"], eval_csv)
    scenarios = sorted({int(r[col["scenario"]]) for r in rows})
    labels = sorted({r[col["policy"]] for r in rows})
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(1, len(labels))
    for li, label in enumerate(labels):
        xs, ys, errs = [], [], []
        for si, sid in enumerate(scenarios):
            for r in rows:
                if int(r[col["scenario"]]) == sid and r[col["policy"]] == label:
                    xs.append(si + li * width)
                    ys.append(float(r[col["mean_slowdown"]]))
                    errs.append(float(r[col["std_slowdown"]]))
        ax.bar(xs, ys, width=width, yerr=errs, capsize=2, label=label)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(scenarios))])
    ax.set_xticklabels([str(s) for s in scenarios])
    ax.set_xlabel("scenario")
    ax.set_ylabel("average slowdown")
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_svg, format="svg")
    plt.close(fig)
