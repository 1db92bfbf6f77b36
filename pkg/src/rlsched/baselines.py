"""Deterministic and random reference policies used as evaluation anchors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .workload import Job

HEURISTIC_KINDS = ("random", "fcfs", "sjf", "packer")


@dataclass(frozen=True)
class HeuristicPolicy:
    kind: str

    def __post_init__(self):
        if self.kind not in HEURISTIC_KINDS:
            raise ValueError(f"unknown heuristic {self.kind!r}; choose from {HEURISTIC_KINDS}")


def act(
    policy: HeuristicPolicy,
    window: Sequence[Job],
    free_procs: int,
    W: int,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """Pick an action in [0, W] from the window view.

    random: uniform over schedulable slots plus the no-op W.
    fcfs:   lowest-index schedulable slot, else W.
    sjf:    schedulable slot with smallest duration (ties: lower index), else W.
    packer: schedulable slot with largest processor demand (ties: lower index), else W.
    """
    schedulable = [i for i, job in enumerate(window) if job.procs <= free_procs]
    if policy.kind == "random":
        if rng is None:
            raise ValueError("the random heuristic needs an rng")
        choices = schedulable + [W]
        return int(choices[rng.integers(len(choices))])
    if not schedulable:
        return W
    if policy.kind == "fcfs":
        return schedulable[0]
    if policy.kind == "sjf":
        return min(schedulable, key=lambda i: (window[i].t_e, i))
    return min(schedulable, key=lambda i: (-window[i].procs, i))  # packer
