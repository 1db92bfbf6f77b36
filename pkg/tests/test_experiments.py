import json
from fractions import Fraction
from pathlib import Path
from xml.etree import ElementTree

import numpy as np
import pytest

from rlsched import nets
from rlsched.baselines import HeuristicPolicy
from rlsched.experiments import (
    EvalReport, bind_policy, compact_length, episode_seed, evaluate,
    horizon_time_ratios, measure_training_time, parse_policy, plot_curves,
    plot_eval_bars, read_csv, run_training, transfer_matrix, transfer_wins,
    write_csv, write_curve_band, write_eval_csv, write_manifest,
)
from rlsched.env import EnvConfig, SchedulingEnv
from rlsched.nets import ShapeError
from rlsched.ppo import PPOConfig
from rlsched.scenarios import SCENARIOS, ScenarioConfig, get_scenario
from rlsched.stats import welch_t_test
from rlsched.workload import Job, Trace


def test_scenario_grid_is_exact():
    expected = {
        1: (10, 15, 10), 2: (10, 48, 10), 3: (38, 15, 32), 4: (38, 33, 32),
        5: (38, 48, 32), 6: (64, 15, 64), 7: (64, 33, 32), 8: (64, 33, 64),
        9: (64, 48, 32), 10: (64, 48, 64),
    }
    assert set(SCENARIOS) == set(expected)
    for sid, (n_p, d, j_s) in expected.items():
        sc = get_scenario(sid)
        assert (sc.n_p, sc.d, sc.j_s) == (n_p, d, j_s)
    with pytest.raises(ValueError):
        get_scenario(11)


def test_parse_policy():
    assert parse_policy("sjf") == HeuristicPolicy("sjf")
    with pytest.raises(ValueError):
        parse_policy("deep-thought")


def test_evaluate_fcfs_on_worked_trace_golden():
    trio = Trace(jobs=[Job(1, 1, 2, 1), Job(2, 1, 3, 1), Job(3, 1, 4, 1)], T=10)
    row = evaluate(HeuristicPolicy("fcfs"), ScenarioConfig(0, 2, 5, 1), trials=1,
                   seed=0, env_spec="T=10,W=5", trace=trio)
    assert row.mean_slowdown == float(Fraction(7, 6))
    assert row.trials == 1 and row.episodes_skipped == 0


def test_evaluate_deterministic_and_workload_seeds_policy_independent():
    row1 = evaluate(HeuristicPolicy("sjf"), 1, trials=8, seed=5)
    row2 = evaluate(HeuristicPolicy("sjf"), 1, trials=8, seed=5)
    assert np.array_equal(row1.episodes, row2.episodes)
    # different policy, same seed: same workload stream (seed derivation
    # cannot depend on the policy); outcome differs but seeds align
    assert episode_seed(5, 3) == episode_seed(5, 3)
    row3 = evaluate(HeuristicPolicy("fcfs"), 1, trials=8, seed=5)
    assert row3.seed == row1.seed


def test_random_worse_than_sjf_with_high_confidence():
    sjf = evaluate(HeuristicPolicy("sjf"), 1, trials=300, seed=11)
    rnd = evaluate(HeuristicPolicy("random"), 1, trials=300, seed=11)
    assert rnd.mean_slowdown > sjf.mean_slowdown
    res = welch_t_test(rnd.episodes, sjf.episodes)
    assert res.p < 0.01


def test_bind_policy_checks_width():
    params = nets.init_policy(999, 11, W=10, H=20, seed=0)
    env = SchedulingEnv(EnvConfig(scenario=get_scenario(1)))
    with pytest.raises(ShapeError):
        bind_policy(params, env)


def test_run_training_single_seed_single_point(tmp_path):
    cfg = PPOConfig(total_steps=50, n_steps=50)
    runs = run_training(1, "rep=compact,trans=sparse,rew=window", cfg, [1], tmp_path)
    assert len(runs) == 1 and runs[0].error is None
    header, rows = read_csv(runs[0].curve_file)
    assert header == ["agent_step", "mean_return"]
    assert len(rows) <= 1
    params = nets.load_params(runs[0].params_file)
    assert params.input_dim == compact_length(20, 10)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"] == [1] and manifest["failures"] == {}


def test_run_training_records_failures_without_aborting(tmp_path):
    cfg = PPOConfig(total_steps=50, n_steps=50)
    # scenario id 0 is not in the registry -> get_scenario raises inside
    runs = run_training(get_scenario(1), "rep=compact,trans=sparse,rew=window",
                        cfg, [0, 1], tmp_path)
    assert all(r.error is None for r in runs)

    class Boom(Exception):
        pass

    import rlsched.experiments as exp
    original = exp.train

    def flaky(factory, config, seed):
        if seed == 0:
            raise Boom("injected")
        return original(factory, config, seed)

    exp.train = flaky
    try:
        runs = run_training(1, "rep=compact,trans=sparse,rew=window", cfg, [0, 1], tmp_path)
    finally:
        exp.train = original
    assert runs[0].error is not None and "injected" in runs[0].error
    assert runs[1].error is None
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "0" in {str(k) for k in manifest["failures"]}


def test_curve_band_aggregation_matches_recomputation(tmp_path):
    curves = [
        [(50, 1.0), (100, 2.0), (150, 3.0)],
        [(50, 2.0), (100, 4.0), (150, 5.0)],
        [(50, 3.0), (100, 6.0), (150, 10.0)],
    ]
    band_path = tmp_path / "band.csv"
    write_curve_band(band_path, curves)
    header, rows = read_csv(band_path)
    assert header == ["agent_step", "mean", "std"]
    for i, row in enumerate(rows):
        vals = np.array([c[i][1] for c in curves])
        assert float(row[0]) == curves[0][i][0]
        assert float(row[1]) == pytest.approx(vals.mean())
        assert float(row[2]) == pytest.approx(vals.std(ddof=1))


def test_transfer_self_transfer_matches_plain_evaluate(tmp_path):
    env = SchedulingEnv(EnvConfig(scenario=get_scenario(9)))
    params = nets.init_policy(env.config.observation_length, 11, W=10, H=20, seed=3)
    report = transfer_matrix(params, [9], trials=6, seed=7)
    plain = evaluate(params, 9, trials=6, seed=7)
    assert report.rows[0].mean_slowdown == plain.mean_slowdown
    assert np.array_equal(report.rows[0].episodes, plain.episodes)


def test_transfer_rejects_image_params():
    image_width = 20 * (10 * 11 + 1)
    params = nets.init_policy(image_width, 11, W=10, H=20, seed=0)
    with pytest.raises(ShapeError, match="cannot transfer"):
        transfer_matrix(params, [1], trials=1, seed=0)


def test_transfer_wins_reports_pairs():
    params = nets.init_policy(compact_length(20, 10), 11, W=10, H=20, seed=1)
    specialist = nets.init_policy(compact_length(20, 10), 11, W=10, H=20, seed=2)
    report = transfer_matrix(params, [1], trials=12, seed=3, specialists={1: specialist})
    wins = transfer_wins(report)
    assert len(wins) == 1
    assert set(wins[0]) == {"scenario", "transfer_mean", "specialist_mean", "transfer_wins", "p"}
    assert 0.0 < wins[0]["p"] <= 1.0
    pairs = report.pairwise_p_values()
    assert len(pairs) == 1 and pairs[0]["scenario"] == 1


def test_observation_width_arithmetic_for_horizons():
    # compact width grows 121 -> 201 as H goes 20 -> 60; the image width is
    # n_p-bound only, while its height triples
    assert compact_length(20, 10) == 121
    assert compact_length(60, 10) == 201
    img20 = EnvConfig(scenario=get_scenario(6), representation="image", H=20)
    img60 = EnvConfig(scenario=get_scenario(6), representation="image", H=60)
    assert img20.observation_shape[1] == img60.observation_shape[1] == 64 * 11 + 1
    assert img60.observation_shape[0] == 3 * img20.observation_shape[0]


def test_measure_training_time_zero_steps_wellformed():
    rows = measure_training_time(1, steps=0, reps=1)
    assert len(rows) == 4  # 2 representations x 2 horizons
    for row in rows:
        assert row["seconds"] >= 0.0
    ratios = horizon_time_ratios(rows)
    assert set(ratios) == {"compact", "image"}


def test_plot_curves_single_point_and_band(tmp_path):
    curve = tmp_path / "curve_s0.csv"
    write_csv(curve, ["agent_step", "mean_return"], [(50, -1.0)])
    out = tmp_path / "single.svg"
    plot_curves(out, [curve])
    assert out.exists()
    ElementTree.parse(out)  # well-formed XML

    band = tmp_path / "band.csv"
    write_curve_band(band, [[(50, 1.0), (100, 2.0)], [(50, 3.0), (100, 4.0)]])
    out2 = tmp_path / "band.svg"
    plot_curves(out2, [], band_file=band)
    root = ElementTree.parse(out2).getroot()
    assert root.tag.endswith("svg")


def test_plot_rejects_missing_columns(tmp_path):
    bad = tmp_path / "bad.csv"
    write_csv(bad, ["x", "y"], [(1, 2)])
    with pytest.raises(ValueError, match="missing columns"):
        plot_curves(tmp_path / "out.svg", [bad])


def test_plot_eval_bars_scenario_order(tmp_path):
    report = EvalReport()
    rows = []
    for sid in (3, 1, 2):
        rows.append((sid, "sjf", 4, 1.0 + sid, 0.1, 0, 0))
    path = tmp_path / "eval.csv"
    write_csv(path, ["scenario", "policy", "trials", "mean_slowdown",
                     "std_slowdown", "skipped", "seed"], rows)
    out = tmp_path / "bars.svg"
    plot_eval_bars(out, path)
    text = out.read_text()
    # x tick labels appear in ascending scenario order
    assert text.index(">1<") < text.index(">2<") < text.index(">3<") if ">1<" in text else True
    ElementTree.parse(out)


def test_write_eval_csv_and_manifest(tmp_path):
    row = evaluate(HeuristicPolicy("fcfs"), 1, trials=3, seed=0)
    write_eval_csv(tmp_path / "eval.csv", EvalReport(rows=[row]))
    header, rows = read_csv(tmp_path / "eval.csv")
    assert header[0] == "scenario" and len(rows) == 1
    write_manifest(tmp_path / "manifest.json", {"command": "eval", "seed": 0})
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "eval"
    assert "rlsched_version" in manifest and "backend" in manifest
