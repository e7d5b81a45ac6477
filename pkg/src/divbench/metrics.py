"""Energy thresholds, target diversity, diversity-over-time, and TTD.

A sample is fit when its energy is at most E_alpha = e_min + alpha *
(e_max - e_min). The target diversity is the diversity of a reference
solver's fit set, and TTD is the time a solver needs to reach that target
with 99% confidence.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .core import (
    DegenerateSpectrumError,
    IsingProblem,
    NotBipartiteError,
    SampleSet,
    ValidationError,
    negated,
)
from .diversity import build_distance_graph, lna_best_of_shuffles, shuffle_stream
from .rng import stream
from .topology import EdgeGraph, two_coloring

TTD_UNBOUNDED = math.inf
TTD_CONFIDENCE_CLAMP = 0.99


@dataclass(frozen=True)
class ApproximationSpec:
    """Fitness threshold parameters: ratio alpha, spectrum edges, radius."""

    alpha: float
    e_min: float
    e_max: float
    radius: float

    def __post_init__(self):
        if not 0 <= self.alpha <= 0.5:
            raise ValidationError("alpha must lie in [0, 0.5]")
        if self.e_max == self.e_min:
            raise DegenerateSpectrumError("spectrum has zero width")
        if self.e_max < self.e_min:
            raise ValidationError("e_max must exceed e_min")
        if not 0 < self.radius <= 1:
            raise ValidationError("radius must lie in (0, 1]")


def approximation_ratio(e: float, spec: ApproximationSpec) -> float:
    """(e - e_min) / (e_max - e_min)."""
    return (e - spec.e_min) / (spec.e_max - spec.e_min)


def energy_threshold(spec: ApproximationSpec) -> float:
    """E_alpha = e_min + alpha * (e_max - e_min)."""
    return spec.e_min + spec.alpha * (spec.e_max - spec.e_min)


def filter_fit_unique(samples: SampleSet, threshold: float) -> list:
    """Configurations with energy <= threshold, deduplicated in appearance order."""
    seen = set()
    out = []
    for s in samples:
        if s.energy <= threshold and s.config.packed not in seen:
            seen.add(s.config.packed)
            out.append(s.config)
    return out


@dataclass(frozen=True)
class TargetDiversity:
    """Reference diversity D-hat at fixed (alpha, radius)."""

    value: int
    source: str
    alpha: float
    radius: float

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError("target diversity must be >= 0")


def target_diversity(reference_samples: SampleSet, spec: ApproximationSpec,
                     num_calculations: int = 100, shuffles_per_calc: int = 100,
                     seed: int = 0, source: str = "reference") -> TargetDiversity:
    """Maximum of independently seeded diversity calculations on the reference set.

    Per-calculation seeds are derived independently of num_calculations,
    so raising the calculation count can only raise the target.
    """
    if num_calculations < 1:
        raise ValidationError("num_calculations must be >= 1")
    fit = filter_fit_unique(reference_samples, energy_threshold(spec))
    if not fit:
        warnings.warn("reference sample set has no fit samples; target diversity is 0")
        return TargetDiversity(0, source, spec.alpha, spec.radius)
    graph = build_distance_graph(fit, spec.radius, fit[0].num_spins)
    best = 0
    for calc in range(num_calculations):
        calc_seed = int(stream(seed, "target-calc", calc).integers(1 << 62))
        best = max(best, lna_best_of_shuffles(graph, shuffles_per_calc, calc_seed))
    return TargetDiversity(best, source, spec.alpha, spec.radius)


class _IncrementalScan:
    """Left-neighbours scan states for all shuffle replicas, fed in batches.

    Replica 0 keeps appearance order; replica s >= 1 shuffles each new
    batch with its own stream. Because a batch only appends vertices, the
    recorded sizes are non-decreasing as more samples arrive.
    """

    def __init__(self, threshold_distance: float, num_shuffles: int, seed: int):
        if num_shuffles < 1:
            raise ValidationError("num_shuffles must be >= 1")
        self.threshold = threshold_distance
        self.members = [[] for _ in range(num_shuffles)]
        self.streams = [None] + [shuffle_stream(seed, s) for s in range(1, num_shuffles)]

    def _insert(self, replica: int, value: int):
        for kept in self.members[replica]:
            if (kept ^ value).bit_count() <= self.threshold:
                return
        self.members[replica].append(value)

    def add_batch(self, configs):
        values = [c.as_int() for c in configs]
        for replica, rng in enumerate(self.streams):
            if rng is None or len(values) < 2:
                order = values
            else:
                order = [values[i] for i in rng.permutation(len(values))]
            for v in order:
                self._insert(replica, v)

    @property
    def best(self) -> int:
        return max(len(m) for m in self.members)


def diversity_over_time(run: SampleSet, spec: ApproximationSpec, time_grid,
                        num_shuffles: int = 100, seed: int = 0) -> list:
    """[(t, diversity of fit unique samples with time_ns <= t)] over the grid.

    Shuffle orders extend batch-by-batch under fixed per-replica streams,
    so the curve is non-decreasing by construction. A burn-in prefix with
    no fit samples reads 0.
    """
    grid = list(time_grid)
    if any(t2 < t1 for t1, t2 in zip(grid, grid[1:])):
        raise ValidationError("time grid must be sorted")
    threshold = energy_threshold(spec)
    ordered = sorted(run, key=lambda s: s.time_ns)  # stable: appearance ties keep order
    scan = _IncrementalScan(spec.radius * _run_num_spins(run), num_shuffles, seed)
    seen = set()
    curve = []
    cursor = 0
    for t in grid:
        batch = []
        while cursor < len(ordered) and ordered[cursor].time_ns <= t:
            s = ordered[cursor]
            cursor += 1
            if s.energy <= threshold and s.config.packed not in seen:
                seen.add(s.config.packed)
                batch.append(s.config)
        if batch:
            scan.add_batch(batch)
        curve.append((t, scan.best))
    return curve


def _run_num_spins(run: SampleSet) -> int:
    return run[0].config.num_spins if len(run) else 0


def curve_value_at(curve, t) -> int:
    """Step-function read-out: value at the largest grid time <= t, else 0."""
    value = 0
    for g, d in curve:
        if g <= t:
            value = d
        else:
            break
    return value


def estimate_success_probability(experiments, target: TargetDiversity, t) -> float:
    """Fraction of experiment curves whose diversity at time t meets the target."""
    if not experiments:
        raise ValidationError("at least one experiment is required")
    hits = sum(1 for curve in experiments if curve_value_at(curve, t) >= target.value)
    return hits / len(experiments)


def ttd(p: float, n_runs: int, t_a: float) -> float:
    """Time to reach the target diversity with 99% confidence.

    n_runs * t_a * log(0.01) / log(1 - p). p = 0 is unbounded; p >= 0.99
    is clamped so one fully executed block is never undercounted.
    """
    if not 0 <= p <= 1:
        raise ValidationError("p must lie in [0, 1]")
    if p == 0:
        return TTD_UNBOUNDED
    if p >= TTD_CONFIDENCE_CLAMP:
        return n_runs * t_a
    return n_runs * t_a * math.log(0.01) / math.log(1.0 - p)


@dataclass(frozen=True)
class TTDRecord:
    solver_id: str
    instance_id: str
    p: float
    n_runs: int
    t_a_ns: float
    ttd_ns: float
    censored: bool

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValidationError("p must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "solver_id": self.solver_id,
            "instance_id": self.instance_id,
            "p": self.p,
            "n_runs": self.n_runs,
            "t_a_ns": self.t_a_ns,
            "ttd_ns": None if math.isinf(self.ttd_ns) else self.ttd_ns,
            "censored": self.censored,
        }


def ttd_from_success_curve(grid, success, solver_id: str, instance_id: str) -> TTDRecord:
    """Best TTD over a (time, success fraction) curve.

    Classical runs are continuous, so each grid time t stands for one
    block with n_runs = 1 and t_a = t; the reported TTD is the grid
    minimum of ttd(p(t), 1, t). Censored means no grid point ever
    succeeded.
    """
    best_ttd, best_p, best_t = TTD_UNBOUNDED, 0.0, float(grid[-1]) if len(grid) else 0.0
    for t, p in zip(grid, success):
        value = ttd(p, 1, t)
        if value < best_ttd:
            best_ttd, best_p, best_t = value, p, float(t)
    return TTDRecord(
        solver_id=solver_id,
        instance_id=instance_id,
        p=best_p,
        n_runs=1,
        t_a_ns=best_t,
        ttd_ns=best_ttd,
        censored=math.isinf(best_ttd),
    )


def min_max_energy_search(problem: IsingProblem, budget_samples: int, solvers,
                          seed: int = 0):
    """(e_min, e_max) from pooled solver candidates.

    e_min is the minimum energy over up to budget_samples candidates split
    across the solver callables (each called as f(problem, num_samples,
    seed)). For zero-field problems on bipartite coupling graphs, e_max =
    -e_min by spectrum symmetry; otherwise the same search runs on the
    sign-flipped problem.
    """
    solvers = list(solvers)
    if budget_samples < 1 or not solvers:
        raise ValidationError("no candidates: need a positive budget and at least one solver")
    share = max(1, budget_samples // len(solvers))

    def pooled_minimum(target_problem, tag):
        best = math.inf
        for idx, solver in enumerate(solvers):
            solver_seed = int(stream(seed, "minmax", tag, idx).integers(1 << 62))
            for sample in solver(target_problem, share, solver_seed):
                if sample.energy < best:
                    best = sample.energy
        if math.isinf(best):
            raise ValidationError("solvers produced no candidates")
        return best

    e_min = pooled_minimum(problem, "min")
    ei, ej, _ = problem.edge_arrays
    coupling_graph = EdgeGraph(problem.num_spins, zip(ei.tolist(), ej.tolist()))
    if problem.zero_field:
        try:
            two_coloring(coupling_graph)
            return e_min, -e_min
        except NotBipartiteError:
            pass
    e_max = -pooled_minimum(negated(problem), "max")
    return e_min, e_max


def sa_searcher(num_sweeps: int = 64, beta_min: float = 0.1, beta_max: float = 5.0):
    """Candidate source for min_max_energy_search backed by annealing reads."""
    from .solvers import geometric_schedule, simulated_annealing

    def search(problem, num_samples, seed):
        return simulated_annealing(
            problem, geometric_schedule(beta_min, beta_max, num_sweeps), num_samples, seed
        )

    return search


def pt_searcher(sweeps_between_samples: int = 5, icm: bool = True):
    """Candidate source backed by a PT (or PT+ICM on zero-field) run."""
    from .solvers import PTConfig, geometric_ladder, run_pt

    def search(problem, num_samples, seed):
        ladder = geometric_ladder()
        use_icm = icm and problem.zero_field
        rows = (2 if use_icm else 1) * len(ladder)
        events = max(1, -(-num_samples // rows))
        config = PTConfig(
            ladder=ladder,
            num_copies=1,
            sweeps_between_samples=sweeps_between_samples,
            icm_enabled=use_icm,
            max_sweeps=sweeps_between_samples * events,
            seed=seed,
        )
        return run_pt(problem, config)

    return search


def default_searchers():
    return [sa_searcher(), pt_searcher()]
