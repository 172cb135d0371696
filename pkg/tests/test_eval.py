import json
import time

import numpy as np
import pytest

from core.eval import (CellResult, EvalReport, OfflineEpochClock, average_ranks, evaluate, evaluate_configs,
                       evaluation_seeds, final_performance, normalize_return, percentage_gain, rank_values,
                       steps_per_epoch)
from core.jobs import Job, run_jobs


class ConstantAgent:
    def __init__(self, action):
        self.action = np.asarray(action, dtype=float)
        self.resets = 0

    def reset(self):
        self.resets += 1

    def act(self, obs):
        return self.action


# ---------------------------------------------------------------------------
# offline-epoch clock
# ---------------------------------------------------------------------------

def test_clock_maps_steps_onto_offline_epochs():
    clock = OfflineEpochClock(7)
    readings = [clock.tick() for _ in range(7)]
    assert readings == sorted(readings)
    assert readings[-1] == 1000.0
    assert clock.done
    with pytest.raises(ValueError):
        clock.tick()


def test_clock_crossings():
    clock = OfflineEpochClock(10)
    crossed = []
    for _ in range(10):
        clock.tick()
        crossed.append(clock.crossed(250))
    # 100, 200, 300 (past 250), ..., 500, ..., 800, ..., 1000 (end)
    assert crossed == [False, False, True, False, True, False, False, True, False, True]


def test_clock_needs_steps():
    with pytest.raises(ValueError):
        OfflineEpochClock(0)
    assert steps_per_epoch(100, 32) == 3
    assert steps_per_epoch(10, 32) == 1


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_normalize_return():
    assert normalize_return(0.0) == 0.0
    assert normalize_return(500.0) == 50.0
    assert normalize_return(1000.0) == 100.0
    assert normalize_return(10.0, max_return=20.0) == 50.0
    for bad in (-1.0, 1000.5):
        with pytest.raises(ValueError):
            normalize_return(bad)


def test_ranks_share_ties():
    assert rank_values([10.0, 20.0, 20.0]) == [3.0, 1.5, 1.5]
    assert rank_values([5.0]) == [1.0]
    assert rank_values([3.0, 2.0, 1.0]) == [1.0, 2.0, 3.0]


def test_average_ranks_over_datasets():
    table = {
        "random": {"odv2": 300.0, "drqbc": 100.0, "bc": 50.0},
        "expert": {"odv2": 200.0, "drqbc": 900.0, "bc": 900.0},
    }
    ranks = average_ranks(table)
    assert list(ranks) == ["bc", "drqbc", "odv2"]
    assert ranks == {"odv2": 2.0, "drqbc": 1.75, "bc": 2.25}
    assert average_ranks({"only": {"odv2": 1.0}}) == {"odv2": 1.0}


def test_percentage_gain():
    assert percentage_gain({0.1: 100.0, 0.5: 120.0, 1.0: 150.0}) == pytest.approx(0.5)
    assert percentage_gain({1.0: 100.0}) is None
    assert percentage_gain({0.1: 0.0, 1.0: 50.0}) is None


def test_final_performance_averages_the_tail():
    curve = list(range(1, 21))
    assert final_performance(curve) == pytest.approx(19.5)
    assert final_performance([7.0, 9.0]) == 9.0
    assert final_performance(curve, window=0.25) == pytest.approx(np.mean(curve[-5:]))
    with pytest.raises(ValueError):
        final_performance([])


def test_evaluation_seeds_are_reproducible():
    assert evaluation_seeds(3, 5) == evaluation_seeds(3, 5)
    assert evaluation_seeds(3, 5) != evaluation_seeds(4, 5)
    assert len(set(evaluation_seeds(0, 10))) == 10


def test_evaluate_is_deterministic(tiny_env):
    agent = ConstantAgent([0.4, -0.2])
    first = evaluate(agent, tiny_env, 3, seed=11)
    second = evaluate(agent, tiny_env, 3, seed=11)
    assert first == second
    assert len(first.returns) == 3
    assert agent.resets == 6
    assert all(0.0 <= r <= tiny_env.max_return for r in first.returns)
    with pytest.raises(ValueError):
        evaluate(agent, tiny_env, 0, seed=0)


def test_evaluate_configs_cycles_through_configs(tiny_env):
    agent = ConstantAgent([0.0, 0.0])
    mixed = evaluate_configs(agent, [tiny_env.with_variant("A"), tiny_env.with_variant("H")], 4, seed=2)
    assert len(mixed.returns) == 4
    assert mixed.mean == pytest.approx(np.mean(mixed.returns))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _report():
    cells = [
        CellResult({"dataset": "random", "algorithm": "odv2"}, [300.0, 320.0]),
        CellResult({"dataset": "random", "algorithm": "bc"}, [50.0, 70.0]),
    ]
    curves = [{"dataset": "random", "algorithm": "bc", "seed": 0, "offline_epoch": 1000.0, "return": 50.0}]
    return EvalReport("standard", "pointmass", ["dataset", "algorithm"], cells,
                      ranks={"odv2": 1.0, "bc": 2.0}, curves=curves, meta={"seeds": 2})


def test_cell_results():
    cell = _report().cell(algorithm="odv2")
    assert cell.mean == 310.0
    assert cell.std == 10.0
    assert cell.normalized == pytest.approx(31.0)
    assert _report().cell(algorithm="cql") is None
    with pytest.raises(ValueError):
        CellResult({"dataset": "x"}, [])


def test_report_output_is_deterministic(tmp_path):
    first = _report().write(tmp_path / "a", tables=[("ranks.csv", "Algorithm,Rank\n")])
    second = _report().write(tmp_path / "b", tables=[("ranks.csv", "Algorithm,Rank\n")])
    assert [p.name for p in first] == ["report.json", "cells.csv", "curves.csv", "ranks.csv"]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
    data = json.loads(first[0].read_text())
    assert data["ranks"] == {"bc": 2.0, "odv2": 1.0}
    assert first[1].read_text().splitlines()[0] == "dataset,algorithm,mean,std,normalized,seeds"
    assert first[2].read_text().splitlines()[1] == "random,bc,0,1000.00,50.0000"


# ---------------------------------------------------------------------------
# cell work queue
# ---------------------------------------------------------------------------

def test_run_jobs_orders_results_by_key():
    def slow(value, delay):
        def run():
            time.sleep(delay)
            return value
        return run

    jobs = [Job(("b", 1), slow("b1", 0.05)), Job(("a", 2), slow("a2", 0.0)), Job(("a", 1), slow("a1", 0.02))]
    serial = run_jobs(jobs, workers=1)
    parallel = run_jobs(jobs, workers=3)
    assert list(serial.items()) == list(parallel.items())
    assert list(serial) == [("a", 1), ("a", 2), ("b", 1)]


def test_run_jobs_rejects_duplicate_keys():
    with pytest.raises(ValueError):
        run_jobs([Job(("a",), lambda: 1), Job(("a",), lambda: 2)])


def test_run_jobs_propagates_failures():
    def boom():
        raise RuntimeError("cell failed")

    with pytest.raises(RuntimeError):
        run_jobs([Job(("a",), boom)], workers=2)


def test_random_policy_scores_low_on_pointmass():
    class RandomAgent(ConstantAgent):
        def __init__(self):
            super().__init__([0.0, 0.0])
            self.rng = np.random.default_rng(0)

        def act(self, obs):
            return self.rng.uniform(-1.0, 1.0, size=2)

    from core.env import EnvConfig
    config = EnvConfig(task="pointmass", render_size=16)
    assert evaluate(RandomAgent(), config, 3, seed=0).mean < 100.0
