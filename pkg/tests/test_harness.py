"""Tests for orchestration: generation, reference import, benchmark, grid search."""

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from divbench.core import (
    FormatError,
    Sample,
    SampleSet,
    SpinConfiguration,
    ValidationError,
    energy,
    exhaustive_minimum,
)
from divbench.fileio import load_problem, load_samples, save_problem, save_samples
from divbench.harness import (
    CSV_HEADER,
    ExperimentConfig,
    SolverSpec,
    cmd_generate,
    cmd_grid_search,
    cmd_run_benchmark,
    import_reference,
    make_time_grid,
    params_hash,
    read_records_csv,
    resolve_solver,
    run_resolved,
    worker_count,
)
from divbench.metrics import ttd_from_success_curve
from divbench.topology import chimera, gen_ran1


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv("DIVBENCH_THREADS", "1")


def write_problems(tmp_path, count=2, L=1):
    g = chimera(L)
    paths = []
    for s in range(count):
        p = gen_ran1(g, s)
        path = tmp_path / f"ran1_L{L}_s{s}.json"
        save_problem(p, path)
        paths.append(str(path))
    return paths


def small_config(tmp_path, paths, **overrides):
    base = dict(
        problems=paths,
        solvers=[{"id": "pt-icm", "kind": "pt-icm",
                  "params": {"num_rungs": 4, "sweeps_between_samples": 5}}],
        alpha=0.05,
        radius=0.25,
        num_experiments=3,
        wall_time_ns=20_000,
        num_shuffles=8,
        target_calculations=3,
        grid_points=8,
        exact_energy_bounds=True,
        master_seed=11,
        out_dir=str(tmp_path / "results"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestGenerate:
    def test_file_count(self, tmp_path):
        paths = cmd_generate(["ran1", "ac3"], [1, 2], 3, 10, tmp_path / "out")
        assert len(paths) == 2 * 2 * 3
        assert (tmp_path / "out" / "ran1_L2_s11.json").exists()

    def test_count_zero(self, tmp_path):
        assert cmd_generate(["ran1"], [1], 0, 0, tmp_path / "out") == []

    def test_rerun_identical_bytes(self, tmp_path):
        first = cmd_generate(["dcl"], [2], 2, 5, tmp_path / "a")
        second = cmd_generate(["dcl"], [2], 2, 5, tmp_path / "b")
        for a, b in zip(first, second):
            assert Path(a).read_bytes() == Path(b).read_bytes()


class TestImportReference:
    def test_roundtrip(self, tmp_path, c1_ran1, rng):
        samples = SampleSet(
            [Sample(c, energy(c1_ran1, c), 10 * (k + 1), k)
             for k, c in ((k, SpinConfiguration.random(8, rng)) for k in range(6))],
            problem_id=c1_ran1.problem_id,
        )
        path = tmp_path / "ref.jsonl"
        save_samples(samples, 8, path)
        loaded = import_reference(path, c1_ran1, strict=True)
        assert list(loaded) == list(samples)
        # byte-identical after re-export
        save_samples(loaded, 8, tmp_path / "ref2.jsonl")
        assert path.read_bytes() == (tmp_path / "ref2.jsonl").read_bytes()

    def test_wrong_num_spins(self, tmp_path, c1_ran1, rng):
        samples = SampleSet([Sample(SpinConfiguration.random(4, rng), 0.0, 1)])
        path = tmp_path / "ref.jsonl"
        save_samples(samples, 4, path)
        with pytest.raises(FormatError):
            import_reference(path, c1_ran1)

    def test_strict_rejects_with_line_numbers(self, tmp_path, c1_ran1, rng):
        good = SpinConfiguration.random(8, rng)
        bad = SpinConfiguration.random(8, rng)
        samples = SampleSet([
            Sample(good, energy(c1_ran1, good), 1, 0),
            Sample(bad, energy(c1_ran1, bad) + 1.0, 2, 1),
        ])
        path = tmp_path / "ref.jsonl"
        save_samples(samples, 8, path)
        with pytest.raises(ValidationError) as err:
            import_reference(path, c1_ran1, strict=True)
        assert "[3]" in str(err.value)  # header is line 1, bad sample is line 3

    def test_lenient_corrects(self, tmp_path, c1_ran1, rng):
        c = SpinConfiguration.random(8, rng)
        samples = SampleSet([Sample(c, energy(c1_ran1, c) + 2.0, 1, 0)])
        path = tmp_path / "ref.jsonl"
        save_samples(samples, 8, path)
        fixed = import_reference(path, c1_ran1, strict=False)
        assert fixed[0].energy == energy(c1_ran1, c)

    def test_max_samples_cap(self, tmp_path, c1_ran1, rng):
        configs = [SpinConfiguration.random(8, rng) for _ in range(10)]
        samples = SampleSet([Sample(c, energy(c1_ran1, c), k + 1, 0)
                             for k, c in enumerate(configs)])
        path = tmp_path / "ref.jsonl"
        save_samples(samples, 8, path)
        assert len(import_reference(path, c1_ran1, max_samples=4)) == 4


class TestResolveSolver:
    def test_wall_time_bounds_pt_sweeps(self, c1_ran1):
        spec = SolverSpec("pt", "pt", {"num_rungs": 4, "sweeps_between_samples": 2})
        r = resolve_solver(c1_ran1, spec, wall_time_ns=4 * 8 * 10, tune_seed=0)
        assert r["max_sweeps"] == 10
        assert r["t_total_ns"] == 4 * 8 * 10

    def test_icm_doubles_cost(self, c1_ran1):
        spec = SolverSpec("pticm", "pt-icm", {"num_rungs": 4})
        r = resolve_solver(c1_ran1, spec, wall_time_ns=4 * 8 * 10, tune_seed=0)
        assert r["max_sweeps"] == 5  # factor 2 in replicas halves the budget

    def test_sa_reads_from_wall_time(self, c1_ran1):
        spec = SolverSpec("sa", "sa", {"num_sweeps": 10})
        r = resolve_solver(c1_ran1, spec, wall_time_ns=10 * 8 * 7, tune_seed=0)
        assert r["num_reads"] == 7

    def test_explicit_ladder_respected(self, c1_ran1):
        spec = SolverSpec("pt", "pt", {"betas": [0.5, 1.0, 2.0], "max_sweeps": 6})
        r = resolve_solver(c1_ran1, spec, wall_time_ns=10**9, tune_seed=0)
        assert r["betas"] == [0.5, 1.0, 2.0]
        assert r["max_sweeps"] == 6

    def test_run_resolved_roundtrip(self, c1_ran1):
        spec = SolverSpec("sa", "sa", {"num_sweeps": 5, "num_reads": 3})
        r = resolve_solver(c1_ran1, spec, wall_time_ns=10**6, tune_seed=0)
        assert len(run_resolved(c1_ran1, r, seed=1)) == 3


class TestTimeGrid:
    def test_covers_range(self):
        grid = make_time_grid(100, 10_000, 16)
        assert grid[0] == 100
        assert grid[-1] == 10_000
        assert grid == sorted(set(grid))

    def test_degenerate(self):
        assert make_time_grid(50, 50, 8) == [50]
        assert make_time_grid(50, 10, 8) == [50]


class TestBenchmark:
    def test_trivial_target_gives_p1(self, tmp_path, rng):
        paths = write_problems(tmp_path, count=1)
        problem = load_problem(paths[0])
        # reference with exactly one fit sample: target diversity is 1
        _, config = exhaustive_minimum(problem)
        ref = SampleSet([Sample(config, energy(problem, config), 1, 0)])
        ref_path = tmp_path / "ref.jsonl"
        save_samples(ref, 8, ref_path)
        cfg = small_config(tmp_path, paths, num_experiments=1,
                           reference={"kind": "file", "path": str(ref_path)})
        records = cmd_run_benchmark(cfg)
        assert len(records) == 1
        r = records[0]["ttd"]
        assert records[0]["target_diversity"] == 1
        assert r["p"] == 1.0
        assert r["ttd_ns"] == r["n_runs"] * r["t_a_ns"]
        assert not r["censored"]

    def test_tiny_wall_time_all_censored(self, tmp_path):
        paths = write_problems(tmp_path, count=1)
        problem = load_problem(paths[0])
        _, config = exhaustive_minimum(problem)
        ref = SampleSet([Sample(config, energy(problem, config), 1, 0)])
        ref_path = tmp_path / "ref.jsonl"
        save_samples(ref, 8, ref_path)
        # experiments can never emit a sample within one nanosecond
        cfg = small_config(tmp_path, paths, wall_time_ns=1,
                           reference={"kind": "file", "path": str(ref_path)})
        records = cmd_run_benchmark(cfg)
        assert all(r["ttd"]["censored"] for r in records)
        rows = read_records_csv(Path(cfg.out_dir) / "records.csv")
        assert all(math.isinf(row["ttd_ns"]) for row in rows)

    def test_recompute_ttd_from_persisted_curves(self, tmp_path):
        paths = write_problems(tmp_path, count=1)
        cfg = small_config(tmp_path, paths)
        cmd_run_benchmark(cfg)
        record_files = sorted((Path(cfg.out_dir) / "records").glob("*.json"))
        assert record_files
        for path in record_files:
            r = json.loads(path.read_text())
            experiments = r["experiments"]
            success = [
                sum(1 for e in experiments if e[i] >= r["target_diversity"]) / len(experiments)
                for i in range(len(r["grid"]))
            ] if r["target_diversity"] > 0 else [1.0] * len(r["grid"])
            assert success == r["success"]
            again = ttd_from_success_curve(r["grid"], success, r["solver"], r["instance"])
            assert again.to_dict() == r["ttd"]

    def test_csv_roundtrip(self, tmp_path):
        paths = write_problems(tmp_path, count=2)
        cfg = small_config(tmp_path, paths)
        records = cmd_run_benchmark(cfg)
        rows = read_records_csv(Path(cfg.out_dir) / "records.csv")
        assert len(rows) == len(records)
        for row, rec in zip(rows, records):
            assert row["instance"] == rec["instance"]
            assert row["target_diversity"] == rec["target_diversity"]
            assert row["p"] == rec["ttd"]["p"]

    def test_workers_do_not_change_records(self, tmp_path, monkeypatch):
        paths = write_problems(tmp_path, count=1)
        byte_payloads = []
        for workers, tag in (("1", "w1"), ("8", "w8")):
            monkeypatch.setenv("DIVBENCH_THREADS", workers)
            cfg = small_config(tmp_path, paths, num_experiments=4,
                               out_dir=str(tmp_path / tag))
            cmd_run_benchmark(cfg)
            payload = (Path(cfg.out_dir) / "records.csv").read_bytes()
            for p in sorted((Path(cfg.out_dir) / "records").glob("*.json")):
                payload += p.read_bytes()
            byte_payloads.append(payload)
        assert byte_payloads[0] == byte_payloads[1]

    def test_reference_defaults_to_pt_icm(self, tmp_path):
        paths = write_problems(tmp_path, count=1)
        cfg = small_config(tmp_path, paths)
        assert cfg.reference == {"kind": "solver", "id": "pt-icm"}
        records = cmd_run_benchmark(cfg)
        assert records[0]["target_source"] == "solver:pt-icm"

    def test_config_validation(self, tmp_path):
        with pytest.raises(ValidationError):
            ExperimentConfig(problems=[], solvers=[{"id": "sa", "kind": "sa"}])
        with pytest.raises(ValidationError):
            ExperimentConfig(problems=["x"], solvers=[])
        with pytest.raises(ValidationError):
            ExperimentConfig(problems=["x"], solvers=[{"id": "sa", "kind": "sa"}],
                             wall_time_ns=0)
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict({"problems": ["x"],
                                        "solvers": [{"id": "sa", "kind": "sa"}],
                                        "bogus_key": 1})


class TestGridSearch:
    def test_single_point(self, tmp_path):
        paths = write_problems(tmp_path, count=1)
        cfg = small_config(tmp_path, paths, grid={"num_copies": [1]},
                           tuning_problems=paths)
        best, rows = cmd_grid_search(cfg)
        assert len(rows) == 1
        assert best is not None and best["num_copies"] == 1
        assert (Path(cfg.out_dir) / "grid_search.csv").exists()

    def test_failing_point_excluded(self, tmp_path):
        paths = write_problems(tmp_path, count=1)
        # the huge sampling interval never emits, so that point never succeeds
        cfg = small_config(tmp_path, paths,
                           grid={"sweeps_between_samples": [5, 10**9]},
                           tuning_problems=paths)
        best, rows = cmd_grid_search(cfg)
        assert len(rows) == 2
        failing = [r for r in rows if r["sweeps_between_samples"] == 10**9]
        assert math.isinf(failing[0]["median_ttd_ns"])
        assert best["sweeps_between_samples"] == 5

    def test_empty_grid_rejected(self, tmp_path):
        paths = write_problems(tmp_path, count=1)
        cfg = small_config(tmp_path, paths)
        with pytest.raises(ValidationError):
            cmd_grid_search(cfg)


def test_params_hash_stable():
    assert params_hash({"a": 1, "b": 2}) == params_hash({"b": 2, "a": 1})
    assert params_hash({"a": 1}) != params_hash({"a": 2})


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("DIVBENCH_THREADS", "3")
    assert worker_count() == 3
