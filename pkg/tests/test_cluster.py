from fractions import Fraction

import numpy as np
import pytest

from rlsched.cluster import (
    ClusterState, RunningJob, SchedulingError, advance_time, average_slowdown,
    can_schedule, free_processors, schedule, slowdown, usage_profile,
)
from rlsched.workload import Job, WorkloadConfig, generate_trace


def trio():
    return [Job(1, 1, 2, 1), Job(2, 1, 3, 1), Job(3, 1, 4, 1)]


def run_fcfs_schedule(state):
    """Greedy lowest-index scheduling; returns when everything completed."""
    while state.queue or state.running:
        scheduled = True
        while scheduled:
            scheduled = False
            for job in list(state.queue):
                if can_schedule(state, job):
                    schedule(state, job)
                    scheduled = True
                    break
        advance_time(state)
    return state


def test_can_schedule_empty_cluster():
    state = ClusterState(n_p=2, clock=1)
    job = Job(1, 1, 2, 1)
    state.queue.append(job)
    assert can_schedule(state, job)


def test_can_schedule_third_job_does_not_fit():
    # two single-processor jobs already run on the 2-processor cluster
    state = ClusterState(n_p=2)
    advance_time(state, trio())
    green, orange, red = state.queue[0], state.queue[1], state.queue[2]
    schedule(state, green)
    schedule(state, orange)
    assert not can_schedule(state, red)


def test_can_schedule_requires_queued_job():
    state = ClusterState(n_p=2)
    with pytest.raises(ValueError, match="not in the wait queue"):
        can_schedule(state, Job(9, 1, 2, 1))


def test_can_schedule_agrees_with_recount_oracle():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n_p = int(rng.integers(2, 40))
        state = ClusterState(n_p=n_p, clock=1)
        used = 0
        jid = 0
        while True:
            procs = int(rng.integers(1, n_p + 1))
            if used + procs > n_p or rng.random() < 0.3:
                break
            jid += 1
            state.running.append(RunningJob(Job(jid, 1, int(rng.integers(1, 9)), procs, t_start=1),
                                            int(rng.integers(1, 9))))
            used += procs
        job = Job(99, 1, 3, int(rng.integers(1, n_p + 1)))
        state.queue.append(job)
        # oracle: recount free processors from scratch
        free = n_p - sum(r.job.procs for r in state.running)
        assert can_schedule(state, job) == (job.procs <= free)


def test_schedule_green_on_empty_cluster():
    state = ClusterState(n_p=2)
    advance_time(state, [Job(1, 1, 2, 1)])
    schedule(state, state.queue[0])
    assert [(r.job.id, r.remaining) for r in state.running] == [(1, 2)]
    assert free_processors(state) == 1
    assert state.running[0].job.t_start == 1
    assert state.clock == 1  # scheduling consumes no time


def test_schedule_saturation():
    state = ClusterState(n_p=8)
    advance_time(state, [Job(1, 1, 2, 8)])
    schedule(state, state.queue[0])
    assert free_processors(state) == 0


def test_schedule_rejects_oversubscription():
    state = ClusterState(n_p=2)
    advance_time(state, [Job(1, 1, 2, 2), Job(2, 1, 2, 1)])
    schedule(state, state.queue[0])
    with pytest.raises(SchedulingError):
        schedule(state, state.queue[0])


def test_conservation_over_random_traces():
    rng = np.random.default_rng(1)
    for seed in range(10):
        cfg = WorkloadConfig(d=10, j_s=6, new_job_rate=0.5, seed=seed)
        trace = generate_trace(cfg, 60)
        by_t = {}
        for j in trace.jobs:
            by_t.setdefault(j.t_s, []).append(j)
        state = ClusterState(n_p=8)
        for t in range(1, 61):
            advance_time(state, by_t.get(t, []))
            for job in list(state.queue):
                if can_schedule(state, job) and rng.random() < 0.7:
                    schedule(state, job)
                used = sum(r.job.procs for r in state.running)
                assert used + free_processors(state) == 8
                assert used <= 8


def test_advance_empty_cluster_only_moves_clock():
    state = ClusterState(n_p=4)
    advance_time(state)
    assert state.clock == 1 and not state.running and not state.queue and not state.completed


def test_advance_completes_green_at_t3():
    state = ClusterState(n_p=2)
    advance_time(state, [Job(1, 1, 2, 1)])
    schedule(state, state.queue[0])
    advance_time(state)
    advance_time(state)
    assert [j.id for j in state.completed] == [1]
    job = state.completed[0]
    assert job.t_f == 3
    assert slowdown(job) == 1


def test_advance_validates_arrival_times():
    state = ClusterState(n_p=2)
    with pytest.raises(ValueError, match="expected 1"):
        advance_time(state, [Job(1, 5, 2, 1)])


def test_completion_counts_match_event_replay_oracle():
    # replay the same schedule decisions on an independent event list
    rng = np.random.default_rng(2)
    for seed in range(8):
        cfg = WorkloadConfig(d=8, j_s=4, new_job_rate=0.6, seed=seed)
        trace = generate_trace(cfg, 50)
        by_t = {}
        for j in trace.jobs:
            by_t.setdefault(j.t_s, []).append(j)
        state = ClusterState(n_p=6)
        started = []  # (start_clock, duration)
        for t in range(1, 51):
            advance_time(state, by_t.get(t, []))
            for job in list(state.queue):
                if can_schedule(state, job) and rng.random() < 0.5:
                    schedule(state, job)
                    started.append((t, job.t_e))
        # oracle: a job started at s with duration e completes when clock >= s + e
        expected_done = sum(1 for s, e in started if s + e <= state.clock)
        assert len(state.completed) == expected_done


def test_slowdown_zero_wait_is_one():
    job = Job(1, 4, 7, 1, t_start=4, t_f=11)
    assert slowdown(job) == 1


def test_slowdown_red_job_fig1_schedule():
    # red (duration 4) waits 2 steps behind green on the 2-processor cluster
    state = ClusterState(n_p=2)
    advance_time(state, trio())
    schedule(state, state.queue[0])
    schedule(state, state.queue[0])
    run_fcfs_schedule(state)
    red = next(j for j in state.completed if j.id == 3)
    assert red.t_start == 3 and red.t_f == 7
    assert slowdown(red) == Fraction(3, 2)


def test_slowdown_requires_completion():
    with pytest.raises(ValueError, match="not completed"):
        slowdown(Job(1, 1, 2, 1))


def test_slowdown_equals_step_counting_oracle():
    # oracle: count the wait and execution steps one by one
    rng = np.random.default_rng(3)
    for seed in range(6):
        cfg = WorkloadConfig(d=9, j_s=3, new_job_rate=0.5, seed=seed)
        trace = generate_trace(cfg, 40)
        by_t = {}
        for j in trace.jobs:
            by_t.setdefault(j.t_s, []).append(j)
        state = ClusterState(n_p=4)
        for t in range(1, 80):
            advance_time(state, by_t.get(t, []))
            for job in list(state.queue):
                if can_schedule(state, job) and rng.random() < 0.6:
                    schedule(state, job)
        for job in state.completed:
            waits = sum(1 for t in range(job.t_s, job.t_f) if t < job.t_start)
            execs = sum(1 for t in range(job.t_s, job.t_f) if t >= job.t_start)
            assert execs == job.t_e
            assert slowdown(job) == Fraction(waits + execs, job.t_e)
            assert job.t_w >= 0


def test_average_slowdown_fig1_golden():
    state = ClusterState(n_p=2)
    advance_time(state, trio())
    schedule(state, state.queue[0])
    schedule(state, state.queue[0])
    run_fcfs_schedule(state)
    assert average_slowdown(state.completed) == Fraction(7, 6)


def test_average_slowdown_swapped_golden():
    # schedule red and orange first; green runs once orange finishes
    state = ClusterState(n_p=2)
    advance_time(state, trio())
    green, orange, red = state.queue
    schedule(state, red)
    schedule(state, orange)
    run_fcfs_schedule(state)
    assert average_slowdown(state.completed) == Fraction(3, 2)


def test_average_slowdown_zero_wait_exactly_one():
    jobs = [Job(i, 1, i + 1, 1, t_start=1, t_f=i + 2) for i in range(1, 5)]
    assert average_slowdown(jobs) == 1


def test_average_slowdown_empty_is_error():
    with pytest.raises(ValueError, match="empty"):
        average_slowdown([])


def test_usage_profile_worked_example():
    # 3 processors, one running job with 2 procs and 2 steps left, H=5
    state = ClusterState(n_p=3, clock=3)
    state.running.append(RunningJob(Job(1, 1, 4, 2, t_start=1), 2))
    assert usage_profile(state, 5) == [(2, 1), (2, 1), (0, 3), (0, 3), (0, 3)]


def test_usage_profile_empty_cluster():
    assert usage_profile(ClusterState(n_p=7), 4) == [(0, 7)] * 4


def test_usage_profile_matches_advance_and_recount_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n_p = int(rng.integers(3, 30))
        state = ClusterState(n_p=n_p, clock=1)
        used = 0
        jid = 0
        while used < n_p and rng.random() < 0.8:
            procs = int(rng.integers(1, n_p - used + 1))
            jid += 1
            state.running.append(RunningJob(Job(jid, 1, 12, procs, t_start=1),
                                            int(rng.integers(1, 10))))
            used += procs
        H = int(rng.integers(1, 12))
        profile = usage_profile(state, H)
        # oracle: advance a copy k times with no arrivals, recount each time
        copy = ClusterState(n_p=n_p, clock=1)
        copy.running = [RunningJob(r.job, r.remaining) for r in state.running]
        for k in range(H):
            used_k = sum(r.job.procs for r in copy.running)
            assert profile[k] == (used_k, n_p - used_k)
            advance_time(copy)
