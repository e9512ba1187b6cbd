"""Assigning training jobs to machines with a genetic algorithm.

A job is a (time, peak memory) pair, usually produced by a trained
predictor. Machines run their queue sequentially, so a machine's makespan
contribution is the sum of its jobs' times while its memory constraint is
the *maximum* over its jobs — one job at a time occupies the device. An
assignment is feasible iff every job's memory fits its machine, which makes
feasibility separable per job: an instance admits a feasible schedule iff
each job fits on at least one machine.

The GA is deliberately small (population 20, 20 generations): genomes are
machine indices per job, fitness is makespan with infeasible assignments at
+inf, offspring come from single-point crossover plus per-gene mutation, and
survivors are the best population_size of parents plus offspring. A greedy
longest-processing-time seed is injected into the initial population so the
GA starts at least as good as the obvious heuristic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleInstance, InvalidAssignment, ParseError, TooLarge

BRUTE_FORCE_LIMIT = 2 ** 22


@dataclass
class Job:
    id: str
    time_s: float
    mem_mib: float

    def __post_init__(self):
        if self.time_s <= 0 or self.mem_mib <= 0:
            raise ValueError(f"job {self.id}: time and memory must be positive")


def _check_instance(jobs: list[Job], capacities: list[float]) -> None:
    if not jobs:
        raise ValueError("no jobs to schedule")
    if not capacities or any(c <= 0 for c in capacities):
        raise ValueError(f"capacities must be non-empty and positive, got {capacities}")
    for job in jobs:
        if not any(job.mem_mib <= cap for cap in capacities):
            raise InfeasibleInstance(
                f"job {job.id} needs {job.mem_mib} MiB, largest machine has "
                f"{max(capacities)} MiB")


def makespan(jobs: list[Job], assignment, n_machines: int) -> float:
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != (len(jobs),):
        raise InvalidAssignment(f"assignment shape {a.shape} != ({len(jobs)},)")
    if a.size and (a.min() < 0 or a.max() >= n_machines):
        raise InvalidAssignment(f"machine index outside [0, {n_machines})")
    loads = np.zeros(n_machines)
    np.add.at(loads, a, [j.time_s for j in jobs])
    return float(loads.max())


def is_feasible(jobs: list[Job], assignment, capacities: list[float]) -> bool:
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != (len(jobs),):
        raise InvalidAssignment(f"assignment shape {a.shape} != ({len(jobs)},)")
    if a.size and (a.min() < 0 or a.max() >= len(capacities)):
        raise InvalidAssignment(f"machine index outside [0, {len(capacities)})")
    return all(job.mem_mib <= capacities[m] for job, m in zip(jobs, a))


def lower_bound(jobs: list[Job], n_machines: int) -> float:
    """max(longest job, total work / machines); ignores memory constraints."""
    times = [j.time_s for j in jobs]
    return max(max(times), sum(times) / n_machines)


def greedy_schedule(jobs: list[Job], capacities: list[float]) -> np.ndarray:
    """LPT: longest job first onto the least-loaded machine that fits it."""
    _check_instance(jobs, capacities)
    loads = np.zeros(len(capacities))
    assignment = np.zeros(len(jobs), dtype=np.int64)
    order = sorted(range(len(jobs)), key=lambda i: (-jobs[i].time_s, i))
    for i in order:
        fits = [m for m in range(len(capacities)) if jobs[i].mem_mib <= capacities[m]]
        m = min(fits, key=lambda m: (loads[m], m))
        assignment[i] = m
        loads[m] += jobs[i].time_s
    return assignment


@dataclass
class GAParams:
    population_size: int = 20
    generations: int = 20
    crossover_prob: float = 0.9
    mutation_prob: float | None = None  # None = 1 / n_jobs
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError(f"crossover_prob {self.crossover_prob} outside [0,1]")
        if self.mutation_prob is not None and not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError(f"mutation_prob {self.mutation_prob} outside [0,1]")


@dataclass
class ScheduleResult:
    assignment: tuple[int, ...]
    makespan: float
    method: str
    per_machine_time: tuple[float, ...]
    history: tuple[float, ...] = ()  # best makespan per GA generation

    def to_rows(self, jobs: list[Job]) -> list[tuple[str, int]]:
        return [(job.id, m) for job, m in zip(jobs, self.assignment)]


def _result(jobs: list[Job], assignment: np.ndarray, n_machines: int, method: str,
            history=()) -> ScheduleResult:
    loads = np.zeros(n_machines)
    np.add.at(loads, assignment, [j.time_s for j in jobs])
    return ScheduleResult(assignment=tuple(int(m) for m in assignment),
                          makespan=float(loads.max()), method=method,
                          per_machine_time=tuple(float(x) for x in loads),
                          history=tuple(history))


def _fitness(times: np.ndarray, feasible_job_machine: np.ndarray,
             pop: np.ndarray, n_machines: int) -> np.ndarray:
    """Makespan per genome, +inf where any job sits on a too-small machine."""
    n_pop, n_jobs = pop.shape
    loads = np.zeros((n_pop, n_machines))
    rows = np.arange(n_pop)
    for j in range(n_jobs):
        loads[rows, pop[:, j]] += times[j]
    fit = loads.max(axis=1)
    ok = feasible_job_machine[np.arange(n_jobs), pop].all(axis=1)
    fit[~ok] = np.inf
    return fit


def ga_schedule(jobs: list[Job], capacities: list[float],
                params: GAParams | None = None) -> ScheduleResult:
    p = params or GAParams()
    _check_instance(jobs, capacities)
    n_jobs, n_machines = len(jobs), len(capacities)
    times = np.array([j.time_s for j in jobs])
    mems = np.array([j.mem_mib for j in jobs])
    fits_on = mems[:, None] <= np.asarray(capacities)[None, :]
    mut = p.mutation_prob if p.mutation_prob is not None else 1.0 / n_jobs
    rng = np.random.default_rng(p.seed)

    pop = rng.integers(0, n_machines, size=(p.population_size, n_jobs))
    pop[0] = greedy_schedule(jobs, capacities)
    fit = _fitness(times, fits_on, pop, n_machines)
    history = [float(fit.min())]

    for _ in range(p.generations):
        parent_idx = rng.permutation(p.population_size)
        offspring = pop[parent_idx].copy()
        for a in range(0, p.population_size - 1, 2):
            if n_jobs > 1 and rng.random() < p.crossover_prob:
                cut = int(rng.integers(1, n_jobs))
                tail = offspring[a, cut:].copy()
                offspring[a, cut:] = offspring[a + 1, cut:]
                offspring[a + 1, cut:] = tail
        if n_machines > 1:
            flip = rng.random(offspring.shape) < mut
            # add 1..M-1 so a mutated gene always lands on a different machine
            shift = rng.integers(1, n_machines, size=offspring.shape)
            offspring[flip] = (offspring[flip] + shift[flip]) % n_machines

        merged = np.vstack([pop, offspring])
        merged_fit = np.concatenate([fit, _fitness(times, fits_on, offspring, n_machines)])
        keep = np.argsort(merged_fit, kind="stable")[:p.population_size]
        pop, fit = merged[keep], merged_fit[keep]
        history.append(float(fit.min()))

    best = int(np.argmin(fit))
    if not np.isfinite(fit[best]):
        raise InfeasibleInstance("GA found no feasible assignment")  # pragma: no cover
    return _result(jobs, pop[best], n_machines, "ga", history)


def brute_force_schedule(jobs: list[Job], capacities: list[float]) -> ScheduleResult:
    """Exhaustive optimum; ties break to the lexicographically smallest genome."""
    _check_instance(jobs, capacities)
    n_jobs, n_machines = len(jobs), len(capacities)
    total = n_machines ** n_jobs
    if total > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{n_machines}^{n_jobs} = {total} assignments exceed "
                       f"the {BRUTE_FORCE_LIMIT} enumeration limit")
    times = np.array([j.time_s for j in jobs])
    mems = np.array([j.mem_mib for j in jobs])
    caps = np.asarray(capacities)

    idx = np.arange(total)
    loads = np.zeros((total, n_machines))
    infeasible = np.zeros(total, dtype=bool)
    rows = idx
    for j in range(n_jobs):
        # big-endian digits: job 0 is the most significant, so np.argmin's
        # first-minimum rule picks the lexicographically smallest optimum
        digit = (idx // (n_machines ** (n_jobs - 1 - j))) % n_machines
        loads[rows, digit] += times[j]
        infeasible |= mems[j] > caps[digit]
    fit = loads.max(axis=1)
    fit[infeasible] = np.inf
    best = int(np.argmin(fit))
    if not np.isfinite(fit[best]):
        raise InfeasibleInstance("no feasible assignment exists")  # pragma: no cover
    assignment = np.array([(best // (n_machines ** (n_jobs - 1 - j))) % n_machines
                           for j in range(n_jobs)], dtype=np.int64)
    return _result(jobs, assignment, n_machines, "brute_force")


def random_schedule(jobs: list[Job], capacities: list[float], seed: int = 0,
                    max_attempts: int = 1000) -> ScheduleResult:
    """Uniform random assignment, redrawn until feasible (the paper baseline)."""
    _check_instance(jobs, capacities)
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        a = rng.integers(0, len(capacities), size=len(jobs))
        if is_feasible(jobs, a, capacities):
            return _result(jobs, a, len(capacities), "random")
    raise InfeasibleInstance(f"no feasible random assignment in {max_attempts} draws")


# ---------------------------------------------------------------------------
# Job CSV round-trip

_JOB_COLUMNS = ("job_id", "time_s", "mem_mib")


def save_jobs(jobs: list[Job], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_JOB_COLUMNS)
        for j in jobs:
            writer.writerow([j.id, repr(float(j.time_s)), repr(float(j.mem_mib))])


def load_jobs(path: str) -> list[Job]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != _JOB_COLUMNS:
            raise ParseError(f"expected header {','.join(_JOB_COLUMNS)} in {path}")
        return [Job(id=row[0], time_s=float(row[1]), mem_mib=float(row[2]))
                for row in reader if row]
