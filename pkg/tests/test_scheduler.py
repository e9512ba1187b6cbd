"""Makespan, feasibility, GA vs exhaustive search, jobs CSV."""

import itertools
import math
import random

import numpy as np
import pytest

from abacus.errors import (InfeasibleInstance, InvalidAssignment, ParseError,
                           TooLarge)
from abacus.scheduler import (GAParams, Job, brute_force_schedule, ga_schedule,
                              greedy_schedule, is_feasible, load_jobs,
                              lower_bound, makespan, random_schedule, save_jobs)


def _jobs(times, mems=None):
    mems = mems or [100.0] * len(times)
    return [Job(id=f"j{i}", time_s=float(t), mem_mib=float(m))
            for i, (t, m) in enumerate(zip(times, mems))]


AMPLE = [1e6, 1e6]


# ---------------------------------------------------------------------------
# Makespan and feasibility

def test_makespan_basic():
    assert makespan(_jobs([2, 2, 3]), [0, 0, 1], 2) == 4.0


def test_makespan_everything_on_one_machine():
    jobs = _jobs([1, 2, 3, 4])
    assert makespan(jobs, [0, 0, 0, 0], 2) == 10.0


def test_makespan_empty():
    assert makespan([], [], 3) == 0.0


def test_makespan_rejects_bad_assignment():
    with pytest.raises(InvalidAssignment):
        makespan(_jobs([1, 2]), [0], 2)
    with pytest.raises(InvalidAssignment):
        makespan(_jobs([1, 2]), [0, 5], 2)


def test_feasible_oom():
    jobs = _jobs([10], mems=[12_000])
    assert not is_feasible(jobs, [0], [11_264.0])


def test_feasible_under_capacity():
    jobs = _jobs([10, 10], mems=[512, 1024])
    assert is_feasible(jobs, [0, 1], [2048.0, 2048.0])


def test_feasible_sequential_peak_is_max_not_sum():
    jobs = _jobs([10, 10], mems=[8_000, 8_000])
    assert is_feasible(jobs, [0, 0], [11_264.0])


def test_lower_bound():
    jobs = _jobs([2, 2, 3])
    assert lower_bound(jobs, 2) == max(3.0, 7.0 / 2)


# ---------------------------------------------------------------------------
# Exhaustive search

def test_brute_force_small_instance():
    result = brute_force_schedule(_jobs([2, 2, 3]), AMPLE)
    assert result.makespan == 4.0
    assert result.assignment == (0, 0, 1)  # lexicographically smallest optimum


def test_brute_force_matches_itertools_enumeration():
    rng = random.Random(5)
    for _ in range(5):
        times = [rng.randint(1, 9) for _ in range(6)]
        jobs = _jobs(times)
        best = min(makespan(jobs, a, 2)
                   for a in itertools.product(range(2), repeat=6))
        assert brute_force_schedule(jobs, AMPLE).makespan == best


def test_brute_force_single_job_prefers_first_feasible_machine():
    job = _jobs([5], mems=[4096])
    assert brute_force_schedule(job, [8192.0, 8192.0]).assignment == (0,)
    assert brute_force_schedule(job, [1024.0, 8192.0]).assignment == (1,)


def test_brute_force_infeasible_everywhere():
    with pytest.raises(InfeasibleInstance):
        brute_force_schedule(_jobs([5], mems=[10_000]), [1024.0, 2048.0])


def test_brute_force_refuses_oversized_search():
    with pytest.raises(TooLarge):
        brute_force_schedule(_jobs([1] * 30), AMPLE)


# ---------------------------------------------------------------------------
# GA

def test_ga_small_instance_hits_optimum():
    result = ga_schedule(_jobs([2, 2, 3]), AMPLE, GAParams(seed=0))
    assert result.makespan == 4.0


def test_ga_single_machine():
    jobs = _jobs([3, 1, 4])
    result = ga_schedule(jobs, [1e6], GAParams(seed=0))
    assert result.assignment == (0, 0, 0)
    assert result.makespan == 8.0


def test_ga_is_deterministic():
    jobs = _jobs([random.Random(1).randint(1, 50) for _ in range(15)])
    a = ga_schedule(jobs, AMPLE, GAParams(seed=9))
    b = ga_schedule(jobs, AMPLE, GAParams(seed=9))
    assert a.assignment == b.assignment and a.history == b.history


def test_ga_history_is_monotone_and_feasible():
    rng = random.Random(2)
    jobs = _jobs([rng.randint(1, 50) for _ in range(12)],
                 mems=[rng.choice([512, 4096]) for _ in range(12)])
    caps = [8192.0, 8192.0, 8192.0]
    result = ga_schedule(jobs, caps, GAParams(seed=1))
    assert all(b <= a for a, b in zip(result.history, result.history[1:]))
    assert is_feasible(jobs, list(result.assignment), caps)
    assert result.makespan >= lower_bound(jobs, 3)


def test_ga_respects_memory_capacities():
    # one machine too small for the big jobs: GA must never place them there
    jobs = _jobs([5, 5, 5, 5], mems=[12_000, 512, 12_000, 512])
    caps = [8192.0, 24_576.0]
    result = ga_schedule(jobs, caps, GAParams(seed=3))
    assert result.assignment[0] == 1 and result.assignment[2] == 1


def test_ga_infeasible_instance():
    with pytest.raises(InfeasibleInstance):
        ga_schedule(_jobs([1], mems=[99_999]), [1024.0], GAParams(seed=0))


# ---------------------------------------------------------------------------
# Baselines

def test_greedy_lpt_balances():
    jobs = _jobs([7, 5, 3, 3])
    assignment = greedy_schedule(jobs, AMPLE)
    # LPT: 7->m0, 5->m1, 3->m1, 3->m0; optimal here (no split reaches 9)
    assert makespan(jobs, assignment, 2) == 10.0
    assert makespan(jobs, assignment, 2) == \
        brute_force_schedule(jobs, AMPLE).makespan


def test_random_mean_at_least_optimum():
    jobs = _jobs([4, 3, 2, 2, 1])
    optimum = brute_force_schedule(jobs, AMPLE).makespan
    values = [random_schedule(jobs, AMPLE, seed=s).makespan for s in range(30)]
    assert np.mean(values) >= optimum


def test_random_single_trial_reproducible():
    jobs = _jobs([4, 3, 2])
    a = random_schedule(jobs, AMPLE, seed=11)
    b = random_schedule(jobs, AMPLE, seed=11)
    assert a.assignment == b.assignment


# ---------------------------------------------------------------------------
# Job CSV and results

def test_jobs_round_trip(tmp_path):
    jobs = _jobs([1.5, 2.25], mems=[640, 1280.5])
    path = tmp_path / "jobs.csv"
    save_jobs(jobs, str(path))
    again = load_jobs(str(path))
    assert again == jobs


def test_load_jobs_rejects_foreign_header(tmp_path):
    path = tmp_path / "jobs.csv"
    path.write_text("a,b,c\nx,1,2\n")
    with pytest.raises(ParseError):
        load_jobs(str(path))


def test_job_validation():
    with pytest.raises(ValueError):
        Job(id="j", time_s=0.0, mem_mib=1.0)
    with pytest.raises(ValueError):
        Job(id="j", time_s=1.0, mem_mib=-5.0)


def test_result_rows_follow_job_order():
    jobs = _jobs([2, 2, 3])
    result = brute_force_schedule(jobs, AMPLE)
    rows = result.to_rows(jobs)
    assert [r[0] for r in rows] == ["j0", "j1", "j2"]
    assert math.isclose(sum(result.per_machine_time), 7.0)
