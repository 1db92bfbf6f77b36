from fractions import Fraction

import numpy as np
import pytest

from rlsched.baselines import HeuristicPolicy, act
from rlsched.cluster import average_slowdown
from rlsched.env import EnvConfig, SchedulingEnv
from rlsched.scenarios import ScenarioConfig
from rlsched.workload import Job, Trace, WorkloadConfig, generate_trace


def trio():
    return [Job(1, 1, 2, 1), Job(2, 1, 3, 1), Job(3, 1, 4, 1)]


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        HeuristicPolicy("easy-backfill")


def test_empty_window_all_kinds_refuse():
    rng = np.random.default_rng(0)
    for kind in ("random", "fcfs", "sjf", "packer"):
        assert act(HeuristicPolicy(kind), [], free_procs=4, W=10, rng=rng) == 10


def test_sjf_picks_shortest():
    a = act(HeuristicPolicy("sjf"), trio(), free_procs=2, W=5)
    assert a == 0  # duration 2 is shortest


def test_sjf_tie_breaks_by_index():
    window = [Job(1, 1, 3, 1), Job(2, 1, 3, 1)]
    assert act(HeuristicPolicy("sjf"), window, free_procs=2, W=5) == 0


def test_fcfs_lowest_index_that_fits():
    window = [Job(1, 1, 2, 4), Job(2, 1, 3, 1)]
    assert act(HeuristicPolicy("fcfs"), window, free_procs=2, W=5) == 1
    assert act(HeuristicPolicy("fcfs"), window, free_procs=4, W=5) == 0
    assert act(HeuristicPolicy("fcfs"), window, free_procs=0, W=5) == 5


def test_packer_largest_procs_first():
    window = [Job(1, 1, 2, 2), Job(2, 1, 9, 3), Job(3, 1, 1, 3)]
    assert act(HeuristicPolicy("packer"), window, free_procs=3, W=5) == 1
    assert act(HeuristicPolicy("packer"), window, free_procs=2, W=5) == 0


def test_random_uniform_over_schedulable_and_noop():
    rng = np.random.default_rng(1)
    window = [Job(1, 1, 2, 1), Job(2, 1, 3, 9), Job(3, 1, 4, 1)]
    counts = {0: 0, 2: 0, 5: 0}
    for _ in range(6000):
        a = act(HeuristicPolicy("random"), window, free_procs=2, W=5, rng=rng)
        assert a in counts  # slot 1 never fits
        counts[a] += 1
    for c in counts.values():
        assert abs(c / 6000 - 1 / 3) < 0.03


def run_policy_episode(kind, trace, n_p, T, W=10, seed=0):
    env = SchedulingEnv(EnvConfig(
        scenario=ScenarioConfig(0, n_p, max(5, max((j.t_e for j in trace.jobs), default=5)), n_p),
        transitions="sparse", T=T, W=W))
    env.reset(trace=trace)
    rng = np.random.default_rng(seed)
    policy = HeuristicPolicy(kind)
    while not env.done:
        window, _, free = env.window_view()
        env.step(act(policy, window, free, W, rng))
    return env.state.completed


def test_fcfs_reproduces_worked_schedule():
    completed = run_policy_episode("fcfs", Trace(jobs=trio(), T=10), n_p=2, T=10)
    assert average_slowdown(completed) == Fraction(7, 6)


def test_sjf_picks_green_first_on_worked_trio():
    env = SchedulingEnv(EnvConfig(scenario=ScenarioConfig(0, 2, 5, 1), T=10, W=5))
    env.reset(trace=Trace(jobs=trio(), T=10))
    env.step(5)  # admit the trio
    window, _, free = env.window_view()
    assert act(HeuristicPolicy("sjf"), window, free, 5) == 0
    assert window[0].t_e == 2


def test_sjf_not_worse_than_fcfs_on_single_machine_average():
    # classical SPT optimality, checked statistically on the mean over traces
    totals = {"sjf": 0.0, "fcfs": 0.0}
    n_traces = 100
    for seed in range(n_traces):
        cfg = WorkloadConfig(d=10, j_s=1, new_job_rate=0.4, seed=1000 + seed)
        trace = generate_trace(cfg, 60)
        if not trace.jobs:
            continue
        for kind in totals:
            completed = run_policy_episode(kind, trace, n_p=1, T=120)
            if completed:
                totals[kind] += float(average_slowdown(completed))
    assert totals["sjf"] <= totals["fcfs"]
