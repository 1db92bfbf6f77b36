"""The scheduling task as four (semi-)MDP variants.

Two observation encoders (image-like occupancy matrix, compact feature
vector), two transition modes (dense: the agent sees every simulator step;
sparse: the environment fast-forwards to the next state with a schedulable
window job), and two reward scopes (all jobs in the system, or only the
window).  Actions 0..W-1 try to schedule that window slot; action W (or an
empty / non-fitting slot, which behaves identically) lets one time step pass.

A successful schedule costs no simulator time and pays reward 0.  Every
advance pays the configured reward function evaluated after the tick; sparse
mode sums those per-step rewards, undiscounted, into the reward of a single
agent step, so episode totals match dense mode decision for decision.

Sparse-mode attribution: a schedule that empties the schedulable set makes
the environment fast-forward to the next decision point, but the schedule
step itself still reports reward 0 (spanning the elapsed time in its info);
the accumulated penalties are banked and paid by the next time-advancing
step, or flushed into the step that ends the episode.  Without the bank the
best action in the window would carry the cost of the idle period it
triggers, inverting the learning signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import cluster
from .cluster import ClusterState, free_processors, usage_profile
from .scenarios import ScenarioConfig
from .workload import Job, Trace, WorkloadConfig, generate_trace

REPRESENTATIONS = ("image", "compact")
TRANSITIONS = ("dense", "sparse")
REWARD_SCOPES = ("all_jobs", "window")


class InvalidActionError(ValueError):
    """Raised for actions outside [0, W]."""


@dataclass(frozen=True)
class EnvConfig:
    scenario: ScenarioConfig
    representation: str = "compact"
    transitions: str = "dense"
    reward_scope: str = "all_jobs"
    W: int = 10
    H: int = 20
    T: int = 100
    backlog_view_cap: Optional[int] = None  # image backlog column height; defaults to H
    normalize_obs: bool = False  # optional linear scaling of compact features

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of {REPRESENTATIONS}")
        if self.transitions not in TRANSITIONS:
            raise ValueError(f"transitions must be one of {TRANSITIONS}")
        if self.reward_scope not in REWARD_SCOPES:
            raise ValueError(f"reward_scope must be one of {REWARD_SCOPES}")
        if self.W < 1 or self.H < 1 or self.T < 1:
            raise ValueError("W, H and T must all be >= 1")

    @property
    def observation_shape(self) -> tuple[int, ...]:
        if self.representation == "image":
            return (self.H, self.scenario.n_p * (1 + self.W) + 1)
        return (2 * self.H + 8 * self.W + 1,)

    @property
    def observation_length(self) -> int:
        return int(np.prod(self.observation_shape))

    @property
    def n_actions(self) -> int:
        return self.W + 1


@dataclass(frozen=True)
class JobSnapshot:
    """System view captured once when a job is admitted to the queue.

    All fields describe the instant of submission, just before the job itself
    joins the wait queue (earlier arrivals of the same step are included).
    """

    queue_size: int
    queued_work: int
    free_procs: int
    remaining_work: int
    backlog: int


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


def window_and_backlog(state: ClusterState, W: int) -> tuple[list[Job], int]:
    """First W queued jobs in arrival order, plus the count left behind.

    Only the representation truncates: backlog jobs stay in the simulator
    queue and enter the window as slots free up.
    """
    return state.queue[:W], max(0, len(state.queue) - W)


def reward_all_jobs(state: ClusterState) -> float:
    """Negative online slowdown over every job in the system (running + queued)."""
    total = sum(1.0 / r.job.t_e for r in state.running)
    total += sum(1.0 / j.t_e for j in state.queue)
    return -total


def reward_window(state: ClusterState, W: int) -> float:
    """Negative online slowdown over only the first W queued jobs."""
    window, _ = window_and_backlog(state, W)
    return -sum(1.0 / j.t_e for j in window)


def encode_image(state: ClusterState, config: EnvConfig) -> np.ndarray:
    """Binary occupancy matrix of shape (H, n_p + W*n_p + 1).

    Row k is the look-ahead offset.  The n_p cluster columns pack running
    jobs left-to-right in allocation order for every offset they still hold
    processors.  Each of the W slot blocks renders queued job i as a
    procs-wide, t_e-tall bar anchored at row 0 (clipped at H).  The final
    column shows the backlog count in unary, clipped at the view cap.
    """
    n_p, W, H = state.n_p, config.W, config.H
    m = np.zeros((H, n_p * (1 + W) + 1), dtype=np.float64)
    for k in range(H):
        col = 0
        for r in state.running:
            if r.remaining > k:
                m[k, col:col + r.job.procs] = 1.0
                col += r.job.procs
    window, backlog = window_and_backlog(state, W)
    for i, job in enumerate(window):
        c0 = n_p * (1 + i)
        m[:min(job.t_e, H), c0:c0 + job.procs] = 1.0
    cap = config.backlog_view_cap if config.backlog_view_cap is not None else H
    m[:min(backlog, cap, H), -1] = 1.0
    return m


def encode_compact(
    state: ClusterState,
    config: EnvConfig,
    snapshots: dict[int, JobSnapshot],
) -> np.ndarray:
    """Feature vector of length 2H + 8W + 1, independent of cluster size.

    Layout: H (used, free) usage pairs; W slot groups of 8 features
    (submission time, requested time, requested processors, then the five
    submission-time snapshot values: queue size, queued work, free
    processors, remaining work, backlog); finally the current backlog count.
    Empty slots are all zeros.
    """
    W, H = config.W, config.H
    v = np.zeros(2 * H + 8 * W + 1, dtype=np.float64)
    for k, (used, free) in enumerate(usage_profile(state, H)):
        v[2 * k] = used
        v[2 * k + 1] = free
    window, backlog = window_and_backlog(state, W)
    for i, job in enumerate(window):
        snap = snapshots[job.id]
        base = 2 * H + 8 * i
        v[base:base + 8] = (
            job.t_s,
            job.t_e,
            job.procs,
            snap.queue_size,
            snap.queued_work,
            snap.free_procs,
            snap.remaining_work,
            snap.backlog,
        )
    v[-1] = backlog
    if config.normalize_obs:
        v = _normalize_compact(v, config)
    return v


def _normalize_compact(v: np.ndarray, config: EnvConfig) -> np.ndarray:
    """Scale raw compact features to roughly [0, 1] (optional, default off)."""
    sc = config.scenario
    out = v.copy()
    out[:2 * config.H] /= sc.n_p
    work_scale = float(sc.n_p * sc.d)
    scales = np.array([config.T, sc.d, sc.n_p, config.W, work_scale, sc.n_p, work_scale, config.W])
    for i in range(config.W):
        base = 2 * config.H + 8 * i
        out[base:base + 8] /= scales
    out[-1] /= config.W
    return out


class SchedulingEnv:
    """Reset/step environment over the cluster simulator.

    One instance is strictly sequential; run independent instances for
    parallel rollouts.
    """

    def __init__(self, config: EnvConfig, sparse_banking: bool = True):
        self.config = config
        self.state: Optional[ClusterState] = None
        self.done = True
        self.episode_return = 0.0
        self.agent_steps = 0
        self._arrivals: dict[int, list[Job]] = {}
        self._snapshots: dict[int, JobSnapshot] = {}
        self._sparse_banking = sparse_banking
        self._banked_reward = 0.0  # sparse mode: penalties owed by the next advancing step

    @property
    def observation_shape(self) -> tuple[int, ...]:
        return self.config.observation_shape

    @property
    def n_actions(self) -> int:
        return self.config.n_actions

    def reset(self, seed: Optional[int] = None, trace: Optional[Trace] = None) -> np.ndarray:
        """Start a fresh episode: empty cluster at clock 0, workload stream seeded."""
        cfg = self.config
        if trace is None:
            wl = WorkloadConfig(
                d=cfg.scenario.d,
                j_s=cfg.scenario.j_s,
                seed=seed if seed is not None else int(np.random.SeedSequence().generate_state(1)[0]),
            )
            trace = generate_trace(wl, cfg.T)
        self._arrivals = {}
        for job in trace.fresh_jobs():
            self._arrivals.setdefault(job.t_s, []).append(job)
        self._snapshots = {}
        self.state = ClusterState(n_p=cfg.scenario.n_p)
        self.done = False
        self.episode_return = 0.0
        self.agent_steps = 0
        self._banked_reward = 0.0
        return self._encode()

    def step(self, action: int) -> StepResult:
        if self.done or self.state is None:
            raise RuntimeError("step() called on a finished episode; call reset() first")
        cfg = self.config
        if not 0 <= action <= cfg.W:
            raise InvalidActionError(f"action must be in [0, {cfg.W}], got {action}")

        state = self.state
        accumulated = 0.0
        sim_steps = 0
        scheduled_id = None

        window, _ = window_and_backlog(state, cfg.W)
        if action < len(window) and free_processors(state) >= window[action].procs:
            job = window[action]
            cluster.schedule(state, job)
            scheduled_id = job.id
        else:
            accumulated += self._advance_once()
            sim_steps += 1

        if cfg.transitions == "sparse":
            while state.clock < cfg.T and not self._decision_possible():
                accumulated += self._advance_once()
                sim_steps += 1

        self.done = state.clock >= cfg.T
        if cfg.transitions == "sparse" and self._sparse_banking:
            # schedules pay 0; advancing steps pay their own accumulation plus
            # any banked fast-forward debt; episode end flushes the bank
            self._banked_reward += accumulated
            if scheduled_id is None or self.done:
                reward = self._banked_reward
                self._banked_reward = 0.0
            else:
                reward = 0.0
        else:
            reward = accumulated

        self.episode_return += reward
        self.agent_steps += 1
        info = {"sim_steps": sim_steps, "scheduled_job_id": scheduled_id}
        return StepResult(self._encode(), reward, self.done, info)

    def decision_possible(self) -> bool:
        """True iff some window job fits right now (a sparse-mode decision point)."""
        return self._decision_possible()

    def observe(self) -> np.ndarray:
        """Encode the current state without stepping."""
        if self.state is None:
            raise RuntimeError("observe() before reset()")
        return self._encode()

    def window_view(self) -> tuple[list[Job], int, int]:
        """(window jobs, backlog count, free processors) — the heuristics' view."""
        window, backlog = window_and_backlog(self.state, self.config.W)
        return window, backlog, free_processors(self.state)

    def _decision_possible(self) -> bool:
        free = free_processors(self.state)
        window, _ = window_and_backlog(self.state, self.config.W)
        return any(job.procs <= free for job in window)

    def _advance_once(self) -> float:
        state = self.state
        arrivals = self._arrivals.get(state.clock + 1, [])
        n_before = len(state.queue)
        queued_work = sum(j.work for j in state.queue)
        cluster.advance_time(state, arrivals)
        free = free_processors(state)
        remaining_work = sum(r.job.procs * r.remaining for r in state.running)
        for i, job in enumerate(arrivals):
            ahead = n_before + i
            self._snapshots[job.id] = JobSnapshot(
                queue_size=ahead,
                queued_work=queued_work,
                free_procs=free,
                remaining_work=remaining_work,
                backlog=max(0, ahead - self.config.W),
            )
            queued_work += job.work
        if self.config.reward_scope == "window":
            return reward_window(state, self.config.W)
        return reward_all_jobs(state)

    def _encode(self) -> np.ndarray:
        if self.config.representation == "image":
            return encode_image(self.state, self.config)
        return encode_compact(self.state, self.config, self._snapshots)


def parse_env_spec(spec: str) -> dict:
    """Parse `rep=...,trans=...,rew=...,W=...,H=...,T=...` into config kwargs.

    Keys may be omitted; `rew` accepts `all` or `window`.
    """
    kwargs: dict = {}
    if not spec:
        return kwargs
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad env spec element {part!r}; expected key=value")
        key, value = (s.strip() for s in part.split("=", 1))
        if key == "rep":
            kwargs["representation"] = value
        elif key == "trans":
            kwargs["transitions"] = value
        elif key == "rew":
            kwargs["reward_scope"] = {"all": "all_jobs", "all_jobs": "all_jobs", "window": "window"}.get(value)
            if kwargs["reward_scope"] is None:
                raise ValueError(f"bad reward scope {value!r}; expected all or window")
        elif key in ("W", "H", "T"):
            kwargs[key] = int(value)
        else:
            raise ValueError(f"unknown env spec key {key!r}")
    return kwargs


def format_env_spec(config: EnvConfig) -> str:
    rew = "all" if config.reward_scope == "all_jobs" else "window"
    return (
        f"rep={config.representation},trans={config.transitions},rew={rew},"
        f"W={config.W},H={config.H},T={config.T}"
    )


def make_env(scenario: ScenarioConfig, spec: str = "", **overrides) -> SchedulingEnv:
    """Build an environment from a scenario plus an env spec string."""
    kwargs = parse_env_spec(spec)
    kwargs.update(overrides)
    return SchedulingEnv(EnvConfig(scenario=scenario, **kwargs))
