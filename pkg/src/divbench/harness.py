"""End-to-end orchestration: generation batches, benchmarks, grid search.

A benchmark evaluates each (instance, solver) pair by running
num_experiments independent solver runs under the spin-update wall time,
building diversity-over-time curves, thresholding them at the target
diversity from the reference source, and reporting the resulting TTD.
Everything is a deterministic function of the config and master seed:
worker parallelism only changes scheduling, never results.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import hashlib
import itertools
import json
import math
import os
from pathlib import Path
import time

import numpy as np

from . import __version__
from .core import (
    IsingProblem,
    NotBipartiteError,
    SampleSet,
    ValidationError,
    energy,
    enumerate_energies,
)
from .fileio import load_problem, load_samples_with_lines, save_problem
from .metrics import (
    ApproximationSpec,
    TargetDiversity,
    default_searchers,
    diversity_over_time,
    min_max_energy_search,
    target_diversity,
    ttd_from_success_curve,
)
from .rng import stream
from .solvers import (
    PTConfig,
    TemperatureLadder,
    geometric_ladder,
    geometric_schedule,
    run_pt,
    simulated_annealing,
    tune_temperatures,
)
from .topology import DCLParams, chimera, generate

RESULTS_CSV = "records.csv"
CSV_HEADER = ["instance", "class", "L", "solver", "params_hash", "target_diversity",
              "p", "n_runs", "t_a_ns", "ttd_ns", "censored"]

WALL_TIME_5_MIN_NS = 300_000_000_000  # 5 CPU-minutes at 1 ns per spin update


@dataclass(frozen=True)
class SolverSpec:
    id: str
    kind: str  # "sa" | "pt" | "pt-icm"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sa", "pt", "pt-icm"):
            raise ValidationError(f"unknown solver kind {self.kind!r}")


@dataclass
class ExperimentConfig:
    problems: list
    solvers: list
    alpha: float = 0.01
    radius: float = 0.25
    reference: dict = None
    num_experiments: int = 100
    wall_time_ns: int = WALL_TIME_5_MIN_NS
    max_samples: int = 1_000_000
    num_shuffles: int = 100
    target_calculations: int = 100
    grid_points: int = 32
    energy_budget: int = 2_000_000
    exact_energy_bounds: bool = False
    master_seed: int = 0
    out_dir: str = "results"
    grid: dict = None
    tuning_problems: list = None

    def __post_init__(self):
        if not self.problems:
            raise ValidationError("config needs at least one problem")
        if not self.solvers:
            raise ValidationError("config needs at least one solver")
        if self.wall_time_ns <= 0:
            raise ValidationError("wall_time_ns must be positive")
        self.solvers = [
            s if isinstance(s, SolverSpec) else SolverSpec(**s) for s in self.solvers
        ]
        if self.reference is None:
            self.reference = {"kind": "solver", "id": self._default_reference_id()}

    def _default_reference_id(self) -> str:
        # PT+ICM stands in for the hardware reference when no file is given
        for s in self.solvers:
            if s.kind == "pt-icm":
                return s.id
        return self.solvers[0].id

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known - {"#meta"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in doc.items() if k in known})

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def worker_count() -> int:
    env = os.environ.get("DIVBENCH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def params_hash(params: dict) -> str:
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def cmd_generate(classes, sizes, count: int, seed: int, out_dir,
                 dcl_params: DCLParams = DCLParams()) -> list:
    """Write count seeded instances per (class, size) as problem JSON files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for tag in classes:
        for L in sizes:
            graph = chimera(L)
            for s in range(seed, seed + count):
                problem = generate(tag, graph, s, dcl_params)
                path = out / f"{tag}_L{L}_s{s}.json"
                save_problem(problem, path)
                paths.append(str(path))
    return paths


# ---------------------------------------------------------------------------
# reference import
# ---------------------------------------------------------------------------

def import_reference(path, problem: IsingProblem, strict: bool = True,
                     max_samples: int = None) -> SampleSet:
    """Load a sample file for use as the reference set, revalidating energies.

    In strict mode any sample whose stored energy disagrees with the
    problem is rejected with its line number; otherwise energies are
    corrected in place.
    """
    sample_set, linenos = load_samples_with_lines(path, expected_num_spins=problem.num_spins)
    samples = list(sample_set)
    if max_samples is not None:
        samples, linenos = samples[:max_samples], linenos[:max_samples]
    checked = []
    bad_lines = []
    for sample, lineno in zip(samples, linenos):
        true_energy = energy(problem, sample.config)
        if sample.energy != true_energy:
            if strict:
                bad_lines.append(lineno)
            else:
                sample = replace(sample, energy=true_energy)
        checked.append(sample)
    if bad_lines:
        raise ValidationError(
            f"{path}: stored energies disagree with the problem on lines {bad_lines}"
        )
    return SampleSet(checked, problem_id=sample_set.problem_id or problem.problem_id)


# ---------------------------------------------------------------------------
# solver resolution
# ---------------------------------------------------------------------------

def resolve_solver(problem: IsingProblem, spec: SolverSpec, wall_time_ns: int,
                   tune_seed: int) -> dict:
    """Fix every free solver parameter for one problem.

    Ladders requested via target_rate are tuned here, once per
    (instance, solver); the iteration budget is whatever fits in the wall
    time on the spin-update clock.
    """
    n = problem.num_spins
    p = dict(spec.params)
    resolved = {"id": spec.id, "kind": spec.kind}
    if spec.kind == "sa":
        if "betas" in p:
            schedule = tuple(float(b) for b in p["betas"])
        else:
            schedule = geometric_schedule(p.get("beta_min", 0.1), p.get("beta_max", 5.0),
                                          p.get("num_sweeps", 64))
        num_reads = int(p.get("num_reads", 0)) or max(0, wall_time_ns // (len(schedule) * n))
        resolved.update(betas=list(schedule), num_reads=int(num_reads))
        resolved["t_first_ns"] = len(schedule) * n
        resolved["t_total_ns"] = num_reads * len(schedule) * n
        return resolved

    if "betas" in p:
        ladder = TemperatureLadder(tuple(float(b) for b in p["betas"]))
    elif "target_rate" in p:
        ladder = tune_temperatures(problem, float(p["target_rate"]), seed=tune_seed)
    else:
        ladder = geometric_ladder(p.get("beta_min", 0.1), p.get("beta_max", 5.0),
                                  p.get("num_rungs", 12))
    icm = spec.kind == "pt-icm" or bool(p.get("icm_enabled"))
    num_copies = int(p.get("num_copies", 1))
    between = int(p.get("sweeps_between_samples", 10))
    rows = (2 if icm else 1) * len(ladder)
    max_sweeps = int(p.get("max_sweeps", 0)) or max(0, wall_time_ns // (num_copies * rows * n))
    resolved.update(
        betas=list(ladder.betas),
        num_copies=num_copies,
        sweeps_between_samples=between,
        icm_enabled=icm,
        max_sweeps=max_sweeps,
    )
    resolved["t_first_ns"] = between * rows * n
    resolved["t_total_ns"] = max_sweeps * num_copies * rows * n
    return resolved


def run_resolved(problem: IsingProblem, resolved: dict, seed: int) -> SampleSet:
    if resolved["kind"] == "sa":
        return simulated_annealing(problem, resolved["betas"], resolved["num_reads"], seed)
    config = PTConfig(
        ladder=TemperatureLadder(tuple(resolved["betas"])),
        num_copies=resolved["num_copies"],
        sweeps_between_samples=resolved["sweeps_between_samples"],
        icm_enabled=resolved["icm_enabled"],
        max_sweeps=resolved["max_sweeps"],
        seed=seed,
    )
    return run_pt(problem, config)


def make_time_grid(t_first_ns: int, t_total_ns: int, points: int) -> list:
    """Geometric grid of integer times covering first emission to run end."""
    t_first = max(1, int(t_first_ns))
    t_total = max(t_first, int(t_total_ns))
    grid = np.unique(np.geomspace(t_first, t_total, points).round().astype(np.int64))
    grid[-1] = t_total
    return [int(t) for t in np.unique(grid)]


# ---------------------------------------------------------------------------
# experiments (worker tasks)
# ---------------------------------------------------------------------------

def _experiment_task(task: dict):
    problem = load_problem(task["problem_path"])
    run = run_resolved(problem, task["resolved"], task["run_seed"])
    spec = ApproximationSpec(**task["spec"])
    curve = diversity_over_time(run, spec, task["grid"], task["num_shuffles"],
                                task["curve_seed"])
    return task["key"], [d for _, d in curve]


def _run_tasks(tasks: list, workers: int) -> dict:
    results = {}
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            key, values = _experiment_task(t)
            results[key] = values
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, values in pool.map(_experiment_task, tasks, chunksize=1):
                results[key] = values
    return results


def _derived_seed(*keys) -> int:
    return int(stream(*keys).integers(1 << 62))


def _energy_bounds(problem: IsingProblem, config: ExperimentConfig):
    if config.exact_energy_bounds:
        energies = enumerate_energies(problem)  # guarded at N <= 20
        return float(energies.min()), float(energies.max())
    return min_max_energy_search(
        problem, config.energy_budget, default_searchers(),
        seed=_derived_seed(config.master_seed, "energy-bounds", problem.problem_id),
    )


def _reference_samples(problem: IsingProblem, problem_path: str,
                       config: ExperimentConfig) -> tuple:
    ref = config.reference
    if ref.get("kind") == "file":
        samples = import_reference(ref["path"], problem, strict=ref.get("strict", True),
                                   max_samples=config.max_samples)
        return samples, f"file:{ref['path']}"
    solver_id = ref.get("id")
    spec = next((s for s in config.solvers if s.id == solver_id), None)
    if spec is None:
        raise ValidationError(f"reference solver {solver_id!r} is not in the config")
    resolved = resolve_solver(problem, spec, config.wall_time_ns,
                              _derived_seed(config.master_seed, "tune-ref",
                                            problem.problem_id, spec.id))
    run = run_resolved(problem, resolved,
                       _derived_seed(config.master_seed, "reference",
                                     problem.problem_id, spec.id))
    samples = SampleSet(list(run)[:config.max_samples], run.problem_id)
    return samples, f"solver:{solver_id}"


def evaluate_solver(problem_path: str, problem: IsingProblem, solver: SolverSpec,
                    approx: ApproximationSpec, target: TargetDiversity,
                    config: ExperimentConfig, workers: int) -> dict:
    """One (instance, solver) cell: experiments, success curve, TTD record."""
    resolved = resolve_solver(
        problem, solver, config.wall_time_ns,
        _derived_seed(config.master_seed, "tune", problem.problem_id, solver.id))
    grid = make_time_grid(resolved["t_first_ns"], max(resolved["t_total_ns"], 1),
                          config.grid_points)
    spec_fields = {"alpha": approx.alpha, "e_min": approx.e_min,
                   "e_max": approx.e_max, "radius": approx.radius}
    tasks = []
    for exp in range(config.num_experiments):
        tasks.append({
            "key": exp,
            "problem_path": problem_path,
            "resolved": resolved,
            "run_seed": _derived_seed(config.master_seed, "experiment",
                                      problem.problem_id, solver.id, exp),
            "curve_seed": _derived_seed(config.master_seed, "curve",
                                        problem.problem_id, solver.id, exp),
            "spec": spec_fields,
            "grid": grid,
            "num_shuffles": config.num_shuffles,
        })
    curves = _run_tasks(tasks, workers)
    experiments = [curves[exp] for exp in range(config.num_experiments)]
    success = [
        sum(1 for e in experiments if e[i] >= target.value) / len(experiments)
        for i in range(len(grid))
    ] if target.value > 0 else [1.0] * len(grid)
    record_ttd = ttd_from_success_curve(grid, success, solver.id, problem.problem_id)
    meta = problem.metadata
    return {
        "instance": problem.problem_id,
        "problem_path": str(problem_path),
        "class": str(meta.get("class", "")),
        "L": meta.get("L", ""),
        "solver": solver.id,
        "kind": solver.kind,
        "params": resolved,
        "params_hash": params_hash(resolved),
        "target_diversity": target.value,
        "target_source": target.source,
        "alpha": approx.alpha,
        "radius": approx.radius,
        "e_min": approx.e_min,
        "e_max": approx.e_max,
        "ttd": record_ttd.to_dict(),
        "grid": grid,
        "success": success,
        "experiments": experiments,
        "version": __version__,
    }


def cmd_run_benchmark(config: ExperimentConfig, progress=None) -> list:
    """Run the full benchmark and persist records under config.out_dir."""
    workers = worker_count()
    records = []
    cpu_start = time.process_time()
    for problem_path in config.problems:
        problem = load_problem(problem_path)
        e_min, e_max = _energy_bounds(problem, config)
        approx = ApproximationSpec(config.alpha, e_min, e_max, config.radius)
        reference, source = _reference_samples(problem, problem_path, config)
        target = target_diversity(
            reference, approx,
            num_calculations=config.target_calculations,
            shuffles_per_calc=config.num_shuffles,
            seed=_derived_seed(config.master_seed, "target", problem.problem_id),
            source=source,
        )
        for solver in config.solvers:
            if progress:
                progress(f"{problem.problem_id} / {solver.id}")
            records.append(evaluate_solver(problem_path, problem, solver, approx,
                                           target, config, workers))
    write_records(records, config.out_dir, cpu_seconds=time.process_time() - cpu_start)
    return records


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

def _tuning_subset(config: ExperimentConfig) -> list:
    if config.tuning_problems:
        return list(config.tuning_problems)
    by_group = {}
    for path in config.problems:
        meta = load_problem(path).metadata
        key = (meta.get("class", ""), meta.get("L", ""))
        by_group.setdefault(key, []).append(path)
    subset = []
    for key in sorted(by_group):
        subset.extend(by_group[key][:5])
    return subset


def cmd_grid_search(config: ExperimentConfig, base_solver: str = None, progress=None):
    """Median-TTD table over the parameter grid, and the argmin point.

    Ties are broken toward fewer replicas, then fewer copies; points whose
    median TTD is unbounded are excluded from the argmin.
    """
    if not config.grid:
        raise ValidationError("config.grid is empty")
    base = next((s for s in config.solvers if base_solver in (None, s.id)), None)
    if base is None:
        raise ValidationError(f"base solver {base_solver!r} not found")
    subset = _tuning_subset(config)
    workers = worker_count()
    names = sorted(config.grid)
    rows = []
    for values in itertools.product(*(config.grid[n] for n in names)):
        point = dict(zip(names, values))
        spec = SolverSpec(id=f"{base.id}[{params_hash(point)}]", kind=base.kind,
                          params={**base.params, **point})
        ttds, replica_counts, copy_counts = [], [], []
        for path in subset:
            if progress:
                progress(f"grid {point} / {path}")
            problem = load_problem(path)
            e_min, e_max = _energy_bounds(problem, config)
            approx = ApproximationSpec(config.alpha, e_min, e_max, config.radius)
            reference, source = _reference_samples(problem, path, config)
            target = target_diversity(
                reference, approx, config.target_calculations, config.num_shuffles,
                seed=_derived_seed(config.master_seed, "target", problem.problem_id),
                source=source)
            record = evaluate_solver(path, problem, spec, approx, target, config, workers)
            ttds.append(record["ttd"]["ttd_ns"] if record["ttd"]["ttd_ns"] is not None
                        else math.inf)
            replica_counts.append(len(record["params"]["betas"]))
            copy_counts.append(record["params"].get("num_copies", 1))
        median = float(np.median(ttds)) if ttds else math.inf
        rows.append({**point,
                     "median_ttd_ns": median,
                     "num_replicas": max(replica_counts) if replica_counts else 0,
                     "num_copies": max(copy_counts) if copy_counts else 1})
    finite = [r for r in rows if math.isfinite(r["median_ttd_ns"])]
    best = min(finite, key=lambda r: (r["median_ttd_ns"], r["num_replicas"],
                                      r["num_copies"])) if finite else None
    _write_grid_table(rows, names, best, config.out_dir)
    return best, rows


def _write_grid_table(rows, names, best, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "grid_search.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        # summary columns are prefixed so grid parameter names never collide
        writer.writerow(names + ["median_ttd_ns", "resolved_replicas", "resolved_copies",
                                 "best"])
        for r in rows:
            writer.writerow([r[n] for n in names]
                            + [r["median_ttd_ns"], r["num_replicas"], r["num_copies"],
                               int(best is not None and all(r[n] == best[n] for n in names))])


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def write_records(records: list, out_dir, cpu_seconds: float = None):
    out = Path(out_dir)
    (out / "records").mkdir(parents=True, exist_ok=True)
    with open(out / RESULTS_CSV, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            ttd_ns = r["ttd"]["ttd_ns"]
            writer.writerow([
                r["instance"], r["class"], r["L"], r["solver"], r["params_hash"],
                r["target_diversity"], r["ttd"]["p"], r["ttd"]["n_runs"],
                r["ttd"]["t_a_ns"], "inf" if ttd_ns is None else ttd_ns,
                int(r["ttd"]["censored"]),
            ])
    for r in records:
        name = f"{r['instance']}__{r['solver']}__{r['params_hash']}.json"
        Path(out / "records" / name).write_text(json.dumps(r, sort_keys=True))
    # wall-clock CPU time and timestamps are non-deterministic; they live
    # only in the manifest so records stay byte-identical across runs
    manifest = {"created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
                "cpu_seconds": cpu_seconds, "num_records": len(records),
                "version": __version__}
    Path(out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True))


def read_records_csv(path) -> list:
    """Rows of records.csv with numeric fields restored."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            row["target_diversity"] = int(row["target_diversity"])
            row["p"] = float(row["p"])
            row["n_runs"] = int(row["n_runs"])
            row["t_a_ns"] = float(row["t_a_ns"])
            row["ttd_ns"] = math.inf if row["ttd_ns"] == "inf" else float(row["ttd_ns"])
            row["censored"] = bool(int(row["censored"]))
            rows.append(row)
    return rows


def load_result_records(results_dir) -> list:
    records_dir = Path(results_dir) / "records"
    records = []
    for path in sorted(records_dir.glob("*.json")):
        records.append(json.loads(path.read_text()))
    return records
