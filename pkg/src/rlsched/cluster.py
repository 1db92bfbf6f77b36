"""Discrete-time cluster simulator with exact slowdown accounting.

Processors are fungible counts (no topology) and jobs run to completion.
The state is a single-writer machine: one instance must not be mutated from
two threads, but independent instances are fully isolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .workload import Job


class SchedulingError(RuntimeError):
    """Raised when a job is scheduled without enough free processors."""


@dataclass
class RunningJob:
    job: Job
    remaining: int


@dataclass
class ClusterState:
    """Processors, running set (in allocation order), FIFO wait queue, clock."""

    n_p: int
    running: list[RunningJob] = field(default_factory=list)
    queue: list[Job] = field(default_factory=list)
    clock: int = 0
    completed: list[Job] = field(default_factory=list)

    def __post_init__(self):
        if self.n_p < 1:
            raise ValueError(f"cluster must have >= 1 processor, got {self.n_p}")


def used_processors(state: ClusterState) -> int:
    return sum(r.job.procs for r in state.running)


def free_processors(state: ClusterState) -> int:
    return state.n_p - used_processors(state)


def _require_queued(state: ClusterState, job: Job) -> int:
    for i, queued in enumerate(state.queue):
        if queued is job:
            return i
    raise ValueError(f"job {job.id} is not in the wait queue")


def can_schedule(state: ClusterState, job: Job) -> bool:
    """True iff the queued job fits in the currently free processors."""
    _require_queued(state, job)
    return free_processors(state) >= job.procs


def schedule(state: ClusterState, job: Job) -> ClusterState:
    """Move a queued job onto the processors at the current clock."""
    idx = _require_queued(state, job)
    if free_processors(state) < job.procs:
        raise SchedulingError(
            f"job {job.id} needs {job.procs} processors, only "
            f"{free_processors(state)} of {state.n_p} free"
        )
    del state.queue[idx]
    job.t_start = state.clock
    state.running.append(RunningJob(job, job.t_e))
    return state


def advance_time(state: ClusterState, arrivals: Sequence[Job] = ()) -> ClusterState:
    """Tick the clock: run everything one step, retire finishers, admit arrivals."""
    for job in arrivals:
        if job.t_s != state.clock + 1:
            raise ValueError(f"arrival {job.id} has t_s={job.t_s}, expected {state.clock + 1}")
    state.clock += 1
    still_running: list[RunningJob] = []
    for r in state.running:
        r.remaining -= 1
        if r.remaining == 0:
            r.job.t_f = state.clock
            state.completed.append(r.job)
        else:
            still_running.append(r)
    state.running = still_running
    state.queue.extend(arrivals)
    return state


def slowdown(job: Job) -> Fraction:
    """(t_f - t_s) / t_e for a completed job, as an exact rational."""
    if job.t_f is None:
        raise ValueError(f"job {job.id} has not completed; slowdown is undefined")
    return Fraction(job.t_f - job.t_s, job.t_e)


def average_slowdown(jobs: Iterable[Job]) -> Fraction:
    """Arithmetic mean of slowdowns, kept exact."""
    jobs = list(jobs)
    if not jobs:
        raise ValueError("average slowdown of an empty job list is undefined")
    return sum(slowdown(j) for j in jobs) / len(jobs)


def usage_profile(state: ClusterState, H: int) -> list[tuple[int, int]]:
    """(used, free) processor counts for offsets 0..H-1 from the current clock.

    Offset k counts jobs that still hold processors k steps from now, i.e.
    running jobs with remaining > k; no future scheduling is assumed.
    """
    if H < 1:
        raise ValueError(f"horizon H must be >= 1, got {H}")
    profile = []
    for k in range(H):
        used = sum(r.job.procs for r in state.running if r.remaining > k)
        profile.append((used, state.n_p - used))
    return profile
