"""Synthetic job arrival streams and deterministic trace files.

The generator follows a two-piece uniform mixture: on each time step a job
arrives with probability ``new_job_rate``; it is "small" with probability
``small_job_chance`` (duration uniform on [1, d//5]) and "large" otherwise
(duration uniform on [ceil(2d/3), d]); its processor demand is uniform on
[ceil(j_s/2), j_s].  At most one job arrives per step.

Reproducibility contract: the random stream is a seeded ``numpy.random.
Generator`` (PCG64) and every ``sample_step`` call consumes exactly four
float64 draws in a fixed order (arrival, size class, duration, processors),
whether or not a job is emitted.  Identical (config, seed, T) therefore
always produce identical traces.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field, replace
from typing import BinaryIO, Iterable, Optional

import numpy as np

TRACE_HEADER_PREFIX = "#trace v1"


class TraceFormatError(ValueError):
    """Raised when a trace file cannot be parsed or validated."""


@dataclass
class Job:
    """A unit of work with its lifecycle timestamps.

    ``t_s`` is the submission step, ``t_e`` the execution duration (also used
    as the requested time), ``procs`` the processor demand.  ``t_start`` and
    ``t_f`` stay ``None`` until the job is scheduled / completed.
    """

    id: int
    t_s: int
    t_e: int
    procs: int
    t_start: Optional[int] = None
    t_f: Optional[int] = None

    def __post_init__(self):
        if self.t_e < 1:
            raise ValueError(f"job {self.id}: duration must be >= 1, got {self.t_e}")
        if self.procs < 1:
            raise ValueError(f"job {self.id}: processor demand must be >= 1, got {self.procs}")

    @property
    def t_w(self) -> Optional[int]:
        """Wait time t_f - (t_e + t_s); None until completed."""
        if self.t_f is None:
            return None
        return self.t_f - (self.t_e + self.t_s)

    @property
    def work(self) -> int:
        """Processors times requested time."""
        return self.procs * self.t_e


@dataclass(frozen=True)
class WorkloadConfig:
    """Parameters of the stochastic workload model."""

    d: int
    j_s: int
    new_job_rate: float = 0.3
    small_job_chance: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.new_job_rate <= 1.0:
            raise ValueError(f"new_job_rate must be in [0, 1], got {self.new_job_rate}")
        if not 0.0 <= self.small_job_chance <= 1.0:
            raise ValueError(f"small_job_chance must be in [0, 1], got {self.small_job_chance}")
        if self.d < 5:
            raise ValueError(f"max job length d must be >= 5, got {self.d}")
        if self.j_s < 1:
            raise ValueError(f"max job size j_s must be >= 1, got {self.j_s}")

    @property
    def small_duration_range(self) -> tuple[int, int]:
        return 1, self.d // 5

    @property
    def large_duration_range(self) -> tuple[int, int]:
        return (2 * self.d + 2) // 3, self.d  # integer ceil(2d/3)

    @property
    def procs_range(self) -> tuple[int, int]:
        return (self.j_s + 1) // 2, self.j_s  # integer ceil(j_s/2)


@dataclass
class Trace:
    """An ordered arrival stream over a generation horizon of T steps."""

    jobs: list[Job]
    T: int
    seed: int = 0
    config: Optional[WorkloadConfig] = None

    def __post_init__(self):
        prev = (0, 0)
        for job in self.jobs:
            if not 1 <= job.t_s <= self.T:
                raise TraceFormatError(f"job {job.id}: t_s={job.t_s} outside [1, {self.T}]")
            if (job.t_s, job.id) <= prev:
                raise TraceFormatError(f"job {job.id}: trace not ordered by (t_s, id)")
            prev = (job.t_s, job.id)

    def fresh_jobs(self) -> list[Job]:
        """Copies with lifecycle fields cleared, safe to mutate in a simulation."""
        return [replace(j, t_start=None, t_f=None) for j in self.jobs]


def _uniform_int(u: float, lo: int, hi: int) -> int:
    # u in [0, 1) maps onto the integers lo..hi inclusive
    return lo + int(u * (hi - lo + 1))


def sample_step(config: WorkloadConfig, rng: np.random.Generator, t: int, job_id: int = 0) -> Optional[Job]:
    """Draw the (possible) arrival for time step t.

    Always consumes exactly 4 draws: arrival, size class, duration, procs.
    """
    if t < 1:
        raise ValueError(f"time step must be >= 1, got {t}")
    u = rng.random(4)
    if u[0] >= config.new_job_rate:
        return None
    if u[1] < config.small_job_chance:
        lo, hi = config.small_duration_range
    else:
        lo, hi = config.large_duration_range
    t_e = _uniform_int(u[2], lo, hi)
    procs = _uniform_int(u[3], *config.procs_range)
    return Job(id=job_id, t_s=t, t_e=t_e, procs=procs)


def generate_trace(config: WorkloadConfig, T: int) -> Trace:
    """Concatenate sample_step results for t = 1..T; deterministic per seed."""
    if T < 1:
        raise ValueError(f"horizon T must be >= 1, got {T}")
    rng = np.random.default_rng(config.seed)
    jobs: list[Job] = []
    for t in range(1, T + 1):
        job = sample_step(config, rng, t, job_id=len(jobs) + 1)
        if job is not None:
            jobs.append(job)
    return Trace(jobs=jobs, T=T, seed=config.seed, config=config)


def save_trace(trace: Trace, sink: BinaryIO | str | os.PathLike) -> None:
    """Write the line-oriented trace format (header, then `id t_s t_e procs`)."""
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as f:
            save_trace(trace, f)
        return
    lines = [f"{TRACE_HEADER_PREFIX} T={trace.T} seed={trace.seed}"]
    lines.extend(f"{j.id} {j.t_s} {j.t_e} {j.procs}" for j in trace.jobs)
    sink.write(("\n".join(lines) + "\n").encode("utf-8"))


def load_trace(source: BinaryIO | str | os.PathLike) -> Trace:
    """Parse a trace file; raises TraceFormatError naming the offending line."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            return load_trace(f)
    text = io.TextIOWrapper(source, encoding="utf-8")
    header = text.readline().rstrip("\n")
    if not header.startswith(TRACE_HEADER_PREFIX):
        raise TraceFormatError(f"line 1: bad header {header!r}")
    try:
        fields = dict(part.split("=", 1) for part in header[len(TRACE_HEADER_PREFIX):].split())
        T = int(fields["T"])
        seed = int(fields["seed"])
    except (KeyError, ValueError) as exc:
        raise TraceFormatError(f"line 1: bad header {header!r} ({exc})") from exc

    jobs: list[Job] = []
    seen: set[int] = set()
    for lineno, raw in enumerate(text, start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise TraceFormatError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            job_id, t_s, t_e, procs = (int(p) for p in parts)
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: non-integer field ({exc})") from exc
        if job_id in seen:
            raise TraceFormatError(f"line {lineno}: duplicate job id {job_id}")
        seen.add(job_id)
        try:
            jobs.append(Job(id=job_id, t_s=t_s, t_e=t_e, procs=procs))
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from exc
    return Trace(jobs=jobs, T=T, seed=seed, config=None)
