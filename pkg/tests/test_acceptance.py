"""Acceptance suite: one test per toolkit exit criterion.

Each test prints a PASS/FAIL line with its elapsed time (visible under
pytest -s; pytest -v shows the per-criterion outcome either way) and
asserts both the criterion and its stated runtime budget.
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from divbench.core import (
    Gauge,
    IsingProblem,
    Sample,
    SampleSet,
    SpinConfiguration,
    apply_gauge,
    energy,
    enumerate_energies,
    exhaustive_minimum,
    gauge_transform,
)
from divbench.diversity import (
    AdjacencyGraph,
    build_distance_graph,
    exact_mis_bruteforce,
    greedy_coloring_upper_bound,
    lna_best_of_shuffles,
    lna_lower_bound,
)
from divbench.fileio import save_problem, save_samples
from divbench.harness import ExperimentConfig, cmd_run_benchmark, import_reference
from divbench.metrics import (
    ApproximationSpec,
    default_searchers,
    diversity_over_time,
    energy_threshold,
    filter_fit_unique,
    min_max_energy_search,
    target_diversity,
    ttd,
)
from divbench.rng import stream
from divbench.solvers import (
    PTConfig,
    geometric_ladder,
    icm_move,
    run_pt,
    run_pt_icm,
    tune_temperatures,
)
from divbench.topology import chimera, chimera_grid, gen_ac3, gen_ran1


class criterion:
    """Times a criterion, prints its verdict, and enforces the runtime budget."""

    def __init__(self, number, description, budget_seconds):
        self.number = number
        self.description = description
        self.budget = budget_seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        verdict = "PASS" if exc_type is None else "FAIL"
        print(f"criterion {self.number}: {verdict} ({elapsed:.1f}s / "
              f"budget {self.budget:.0f}s) - {self.description}")
        if exc_type is None:
            assert elapsed < self.budget, (
                f"criterion {self.number} exceeded its {self.budget}s budget "
                f"({elapsed:.1f}s)")
        return False


def random_adjacency(m, density, rng):
    edges = [(i, j) for i in range(m) for j in range(i + 1, m) if rng.random() < density]
    return AdjacencyGraph(m, edges)


def test_criterion_1_sandwich_property():
    with criterion(1, "sandwich bounds on 200 random graphs, LNA tight on >= 90%", 60):
        rng = stream(1001, "sandwich")
        violations = 0
        tight = 0
        for _ in range(200):
            m = int(rng.integers(2, 19))
            density = 0.1 + 0.8 * rng.random()
            graph = random_adjacency(m, density, rng)
            lower = lna_best_of_shuffles(graph, 100, seed=int(rng.integers(1 << 31)))
            exact = exact_mis_bruteforce(graph)
            upper = greedy_coloring_upper_bound(graph)
            if not lower <= exact <= upper:
                violations += 1
            if lower == exact:
                tight += 1
        assert violations == 0
        assert tight >= 180, f"LNA matched the exact MIS on only {tight}/200 graphs"


def test_criterion_2_lna_optimal_permutation_exists():
    with criterion(2, "some vertex order attains the exact MIS on all 50 small graphs", 60):
        rng = stream(1002, "permutations")
        for _ in range(50):
            m = int(rng.integers(2, 9))
            graph = random_adjacency(m, 0.15 + 0.7 * rng.random(), rng)
            exact = exact_mis_bruteforce(graph)
            attained = 0
            for order in itertools.permutations(range(m)):
                attained = max(attained, lna_lower_bound(graph, order).size)
                if attained == exact:
                    break
            assert attained == exact


def test_criterion_3_bipartite_spectrum_symmetry():
    with criterion(3, "exhaustive E_max == -E_min on C_1 and 1x2-cell RAN1", 60):
        for graph in (chimera(1), chimera_grid(1, 2)):
            for seed in range(20):
                problem = gen_ran1(graph, seed)
                energies = enumerate_energies(problem)
                assert energies.max() == -energies.min()


def test_criterion_4_solver_correctness_desk_scale():
    with criterion(4, "PT+ICM finds every enumerated C_1 ground state; ICM conserves", 120):
        graph = chimera(1)
        for generator in (gen_ran1, gen_ac3):
            for instance_seed in range(5):
                problem = generator(graph, instance_seed)
                e0, _ = exhaustive_minimum(problem)
                ladder = tune_temperatures(problem, 0.45, seed=instance_seed)
                found = 0
                for run_seed in range(100):
                    config = PTConfig(ladder=ladder, num_copies=1,
                                      sweeps_between_samples=100, icm_enabled=True,
                                      max_sweeps=10_000, seed=run_seed)
                    result = run_pt_icm(problem, config, stop_at_energy=e0)
                    if len(result) and result.energies().min() == e0:
                        found += 1
                assert found >= 99, (
                    f"{problem.problem_id}: ground state found in {found}/100 seeds")

        # pair-energy conservation, exactly, over 10^4 random cluster moves
        rng = stream(1004, "icm")
        problems = [gen_ran1(graph, 3), gen_ac3(graph, 4)]
        for k in range(10_000):
            problem = problems[k % 2]
            a = SpinConfiguration.random(8, rng)
            b = SpinConfiguration.random(8, rng)
            before = energy(problem, a) + energy(problem, b)
            a2, b2 = icm_move(problem, a, b, rng)
            assert energy(problem, a2) + energy(problem, b2) == before


def test_criterion_5_gauge_invariance():
    with criterion(5, "energy invariance on 10^3 random (problem, gauge, config)", 5):
        rng = stream(1005, "gauge")
        pool = [gen_ran1(chimera(1), 0), gen_ac3(chimera(2), 1),
                IsingProblem(10, rng.integers(-2, 3, size=10).astype(float),
                             [(i, i + 1, 1.0) for i in range(9)])]
        for k in range(1000):
            problem = pool[k % len(pool)]
            n = problem.num_spins
            alpha = Gauge.random(n, rng)
            config = SpinConfiguration.random(n, rng)
            assert energy(gauge_transform(problem, alpha),
                          apply_gauge(config, alpha)) == energy(problem, config)


def test_criterion_6_clock_accounting():
    with criterion(6, "time_ns == sweeps x replicas x copies x N on random configs", 30):
        rng = stream(1006, "clock")
        problems = [gen_ran1(chimera(1), 2), gen_ran1(chimera_grid(1, 2), 3)]
        for trial in range(20):
            problem = problems[trial % 2]
            n = problem.num_spins
            rungs = int(rng.integers(1, 7))
            copies = int(rng.integers(1, 4))
            between = int(rng.integers(1, 8))
            max_sweeps = int(rng.integers(between, 25))
            icm = bool(rng.integers(2))
            config = PTConfig(ladder=geometric_ladder(num_rungs=rungs),
                              num_copies=copies, sweeps_between_samples=between,
                              icm_enabled=icm, max_sweeps=max_sweeps,
                              seed=int(rng.integers(1 << 31)))
            run = run_pt(problem, config)
            rows = (2 if icm else 1) * rungs
            expected = []
            for copy in range(copies):
                for t in range(between, max_sweeps + 1, between):
                    expected.extend([(copy * max_sweeps + t) * rows * n] * rows)
            assert [s.time_ns for s in run] == expected
            if expected:
                assert run[-1].time_ns == max_sweeps * copies * rows * n


def test_criterion_7_ttd_formula():
    with criterion(7, "TTD closed forms at p = 0.99, 0.5, 0", 1):
        assert ttd(0.99, 4, 250.0) == 1000.0
        value_us = ttd(0.5, 1, 1000.0) / 1000.0  # one-microsecond block
        assert abs(value_us - 6.6439) <= 1e-4
        assert value_us == pytest.approx(math.log(0.01) / math.log(0.5), rel=1e-12)
        assert math.isinf(ttd(0.0, 1, 1000.0))


def _planted_case(num_spins, cluster_bit_groups, radius):
    """Reference SampleSet on the J01 = +1 problem with a known diversity.

    Every emitted sample fixes (s0, s1) = (+1, -1), so it is fit at energy
    -1; clusters of configurations are far apart and internally tight, so
    the independence number equals the cluster count by construction
    (cross-checked with brute force).
    """
    problem = IsingProblem(num_spins, None, [(0, 1, 1.0)])
    samples = []
    t = 0
    for bits_on in cluster_bit_groups:
        for extra in [(), (bits_on[0],) if bits_on else (2,)]:
            bits = np.zeros(num_spins, dtype=np.uint8)
            bits[1] = 1
            for b in bits_on:
                bits[b] = 1
            for b in extra:  # satellite: one bit off the centre
                bits[b] ^= 1
            config = SpinConfiguration.from_bits(bits)
            t += 7
            samples.append(Sample(config, -1.0, t, 0))
    spec = ApproximationSpec(0.25, -1.0, 1.0, radius)
    return problem, spec, SampleSet(samples, problem_id=problem.problem_id)


def test_criterion_8_qualitative_diversity_curves(tmp_path):
    with criterion(8, "burn-in + monotone curves on C_4; planted reference targets", 300):
        # part 1: structural reproduction of the diversity-over-time picture
        problem = gen_ran1(chimera(4), 0)
        e_min, e_max = min_max_energy_search(problem, 2000, default_searchers(), seed=8)
        assert e_max == -e_min  # zero-field bipartite
        spec = ApproximationSpec(0.01, e_min, e_max, 0.25)

        ladder = geometric_ladder(num_rungs=12)
        reference = run_pt_icm(problem, PTConfig(
            ladder=ladder, num_copies=1, sweeps_between_samples=10,
            icm_enabled=True, max_sweeps=2000, seed=800))
        target = target_diversity(reference, spec, num_calculations=5,
                                  shuffles_per_calc=30, seed=80)
        assert target.value >= 1

        rows = 2 * len(ladder)
        n = problem.num_spins
        grid = [int(t) for t in np.unique(
            np.geomspace(10 * rows * n, 1500 * rows * n, 24).round())]
        for experiment_seed in range(10):
            run = run_pt_icm(problem, PTConfig(
                ladder=ladder, num_copies=1, sweeps_between_samples=10,
                icm_enabled=True, max_sweeps=1500, seed=9000 + experiment_seed))
            curve = diversity_over_time(run, spec, grid, num_shuffles=20,
                                        seed=experiment_seed)
            values = [d for _, d in curve]
            assert values == sorted(values), "diversity must be non-decreasing"
            threshold = energy_threshold(spec)
            fit_times = [s.time_ns for s in run if s.energy <= threshold]
            assert fit_times, "expected fit samples within the run"
            first_fit = min(fit_times)
            for t, d in curve:  # burn-in: zero before the first fit sample
                if t < first_fit:
                    assert d == 0
            assert values[-1] >= 1

        # part 2: imported synthetic references with planted diversity
        layouts = [
            (12, [[]], 0.25),
            (12, [[], [2, 3, 4, 5, 6, 7]], 0.25),
            (12, [[], [2, 3, 4, 5, 6, 7], [6, 7, 8, 9, 10, 11]], 0.25),
            (16, [[], [2, 3, 4, 5, 6, 7]], 0.25),
            (16, [[], [2, 3, 4, 5, 6, 7], [8, 9, 10, 11, 12, 13]], 0.25),
            (16, [[], [2, 3, 4, 5, 6, 7], [8, 9, 10, 11, 12, 13],
                  [2, 3, 8, 9, 14, 15]], 0.25),
            (20, [[]], 0.2),
            (20, [[], [2, 3, 4, 5, 6, 7]], 0.2),
            (20, [[], [2, 3, 4, 5, 6, 7], [8, 9, 10, 11, 12, 13]], 0.2),
            (20, [[], [2, 3, 4, 5, 6, 7], [8, 9, 10, 11, 12, 13],
                  [14, 15, 16, 17, 18, 19]], 0.2),
        ]
        for case_index, (n, groups, radius) in enumerate(layouts):
            problem, spec, samples = _planted_case(n, groups, radius)
            planted = len(groups)
            path = tmp_path / f"planted_{case_index}.jsonl"
            save_samples(samples, n, path)
            imported = import_reference(path, problem, strict=True)
            target = target_diversity(imported, spec, num_calculations=10,
                                      shuffles_per_calc=30, seed=case_index)
            assert target.value == planted, (
                f"case {case_index}: computed {target.value}, planted {planted}")
            fit = filter_fit_unique(imported, energy_threshold(spec))
            graph = build_distance_graph(fit, spec.radius, n)
            assert exact_mis_bruteforce(graph) == planted


def test_criterion_9_benchmark_determinism(tmp_path, monkeypatch):
    with criterion(9, "benchmark records identical at 1 worker and at 8 workers", 300):
        problem_paths = []
        for seed in range(2):
            problem = gen_ran1(chimera(2), seed)
            path = tmp_path / f"ran1_L2_s{seed}.json"
            save_problem(problem, path)
            problem_paths.append(str(path))

        payloads = []
        for workers in ("1", "8"):
            monkeypatch.setenv("DIVBENCH_THREADS", workers)
            out_dir = tmp_path / f"results_w{workers}"
            config = ExperimentConfig(
                problems=problem_paths,
                solvers=[
                    {"id": "pt-icm", "kind": "pt-icm",
                     "params": {"num_rungs": 4, "sweeps_between_samples": 5}},
                    {"id": "sa", "kind": "sa", "params": {"num_sweeps": 30}},
                ],
                alpha=0.05,
                radius=0.25,
                num_experiments=6,
                wall_time_ns=60_000,
                num_shuffles=10,
                target_calculations=3,
                grid_points=10,
                energy_budget=600,
                master_seed=99,
                out_dir=str(out_dir),
            )
            cmd_run_benchmark(config)
            payload = (out_dir / "records.csv").read_bytes()
            for record in sorted((out_dir / "records").glob("*.json")):
                payload += record.read_bytes()
            payloads.append(payload)
        assert payloads[0] == payloads[1]
