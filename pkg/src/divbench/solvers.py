"""Classical meta-heuristics: simulated annealing, parallel tempering, PT+ICM.

All solvers charge time on a spin-update clock at 1 ns per single-spin
update: a full sweep of one replica advances the clock by N. Runs are
deterministic functions of their seed; replicas are updated with a fixed
site scan order and vectorized across replicas.
"""

from dataclasses import dataclass
import warnings

import numpy as np

from .core import (
    IsingProblem,
    Sample,
    SampleSet,
    SpinConfiguration,
    ValidationError,
)
from .rng import stream

NS_PER_SPIN_UPDATE = 1


@dataclass
class SpinUpdateClock:
    """Monotone counter of single-spin updates; 1 ns each."""

    total_updates: int = 0

    def advance(self, updates: int):
        if updates < 0:
            raise ValidationError("clock cannot run backwards")
        self.total_updates += updates

    @property
    def time_ns(self) -> int:
        return self.total_updates * NS_PER_SPIN_UPDATE


@dataclass(frozen=True)
class TemperatureLadder:
    """Strictly increasing inverse temperatures (a single rung is allowed
    for the degenerate Metropolis case)."""

    betas: tuple

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        if len(betas) < 1:
            raise ValidationError("ladder needs at least one rung")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValidationError("betas must be strictly increasing")
        object.__setattr__(self, "betas", betas)

    def __len__(self):
        return len(self.betas)


def geometric_ladder(beta_min: float = 0.1, beta_max: float = 5.0,
                     num_rungs: int = 12) -> TemperatureLadder:
    return TemperatureLadder(tuple(np.geomspace(beta_min, beta_max, num_rungs)))


def geometric_schedule(beta_min: float = 0.1, beta_max: float = 5.0,
                       num_sweeps: int = 64) -> tuple:
    """Non-decreasing annealing schedule of inverse temperatures."""
    return tuple(np.geomspace(beta_min, beta_max, num_sweeps))


@dataclass(frozen=True)
class PTConfig:
    ladder: TemperatureLadder
    num_copies: int = 1
    sweeps_between_samples: int = 1
    icm_enabled: bool = False
    max_sweeps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_copies < 1:
            raise ValidationError("num_copies must be >= 1")
        if self.sweeps_between_samples < 1:
            raise ValidationError("sweeps_between_samples must be >= 1")
        if self.max_sweeps < 0:
            raise ValidationError("max_sweeps must be >= 0")


def _pack_row(row: np.ndarray) -> SpinConfiguration:
    return SpinConfiguration.from_spins(row.astype(np.int8))


def _matrix_energies(problem: IsingProblem, spins: np.ndarray) -> np.ndarray:
    ei, ej, ev = problem.edge_arrays
    e = spins @ problem.linear
    if len(ev):
        e = e + (spins[:, ei] * spins[:, ej]) @ ev
    return e


def _site_neighbourhoods(problem: IsingProblem):
    indptr, indices, values = problem.adjacency
    return (
        [indices[indptr[i]:indptr[i + 1]] for i in range(problem.num_spins)],
        [values[indptr[i]:indptr[i + 1]] for i in range(problem.num_spins)],
    )


def _sweep(spins, energies, betas, h, site_nbrs, site_vals, uniforms):
    """One Metropolis sweep of every replica row, fixed scan order 0..N-1.

    Acceptance is min(1, exp(-beta * dE)); energies are updated in place
    and stay exactly consistent with the spins for integer couplings.
    """
    num_sites = spins.shape[1]
    for i in range(num_sites):
        nbrs = site_nbrs[i]
        local = spins[:, nbrs] @ site_vals[i] + h[i] if len(nbrs) else np.full(len(spins), h[i])
        d_e = -2.0 * spins[:, i] * local
        accept = uniforms[:, i] < np.exp(np.minimum(-betas * d_e, 0.0))
        energies += np.where(accept, d_e, 0.0)
        spins[:, i] *= np.where(accept, -1.0, 1.0)


def metropolis_sweep(problem: IsingProblem, config: SpinConfiguration, beta: float,
                     rng: np.random.Generator, clock: SpinUpdateClock = None):
    """Sweep a single configuration once; returns (new config, its energy).

    Advances the clock, when given, by exactly N updates.
    """
    if beta < 0:
        raise ValidationError("beta must be non-negative")
    if config.num_spins != problem.num_spins:
        raise ValidationError("configuration length must equal num_spins")
    spins = config.spins.astype(np.float64)[None, :]
    energies = _matrix_energies(problem, spins)
    site_nbrs, site_vals = _site_neighbourhoods(problem)
    _sweep(spins, energies, np.array([beta]), problem.linear, site_nbrs, site_vals,
           rng.random((1, problem.num_spins)))
    if clock is not None:
        clock.advance(problem.num_spins)
    return _pack_row(spins[0]), float(energies[0])


_SA_BATCH = 4096


def simulated_annealing(problem: IsingProblem, schedule, num_reads: int,
                        seed: int = 0) -> SampleSet:
    """Independent annealing restarts; one sweep per schedule entry.

    Each read starts from a fresh random configuration and emits its final
    configuration. Reads are timed sequentially, so read k is stamped
    (k+1) * len(schedule) * N ns.
    """
    schedule = tuple(float(b) for b in schedule)
    if not schedule:
        raise ValidationError("schedule must be non-empty")
    if any(b2 < b1 for b1, b2 in zip(schedule, schedule[1:])):
        raise ValidationError("schedule must be non-decreasing")
    if num_reads < 0:
        raise ValidationError("num_reads must be >= 0")
    n = problem.num_spins
    site_nbrs, site_vals = _site_neighbourhoods(problem)
    read_time = len(schedule) * n

    samples = []
    for batch_start in range(0, num_reads, _SA_BATCH):
        batch = min(_SA_BATCH, num_reads - batch_start)
        rng = stream(seed, "sa", batch_start)
        spins = (1 - 2 * rng.integers(0, 2, size=(batch, n))).astype(np.float64)
        energies = _matrix_energies(problem, spins)
        for beta in schedule:
            _sweep(spins, energies, np.full(batch, beta), problem.linear,
                   site_nbrs, site_vals, rng.random((batch, n)))
        for row in range(batch):
            read = batch_start + row
            samples.append(Sample(_pack_row(spins[row]), float(energies[row]),
                                  (read + 1) * read_time, run_index=read))
    return SampleSet(samples, problem.problem_id)


def _grow_overlap_cluster(site_nbrs, negative_overlap, seed_site):
    """Connected component of q = -1 sites containing seed_site."""
    in_cluster = np.zeros(len(negative_overlap), dtype=bool)
    in_cluster[seed_site] = True
    frontier = [seed_site]
    while frontier:
        i = frontier.pop()
        for j in site_nbrs[i]:
            if negative_overlap[j] and not in_cluster[j]:
                in_cluster[j] = True
                frontier.append(int(j))
    return in_cluster


def _icm_pair(spins, energies, row_a, row_b, site_nbrs, site_vals, rng):
    """Houdayer move between two same-temperature replica rows, in place.

    Flips the connected negative-overlap cluster in both replicas. At zero
    field the energy transfer is antisymmetric, so the pair sum is
    conserved exactly.
    """
    overlap = spins[row_a] * spins[row_b]
    negative = overlap < 0
    candidates = np.nonzero(negative)[0]
    if not len(candidates):
        return
    seed_site = int(candidates[rng.integers(len(candidates))])
    cluster = _grow_overlap_cluster(site_nbrs, negative, seed_site)

    boundary = 0.0
    for i in np.nonzero(cluster)[0]:
        nbrs = site_nbrs[i]
        outside = ~cluster[nbrs]
        if outside.any():
            boundary += spins[row_a, i] * (spins[row_a, nbrs[outside]] @ site_vals[i][outside])
    d_e = -2.0 * boundary
    energies[row_a] += d_e
    energies[row_b] -= d_e
    spins[row_a, cluster] *= -1.0
    spins[row_b, cluster] *= -1.0


def icm_move(problem: IsingProblem, replica_a: SpinConfiguration,
             replica_b: SpinConfiguration, rng: np.random.Generator):
    """Iso-energetic cluster move on a pair of same-temperature replicas.

    Requires zero field; returns the updated pair (a no-op when the
    replicas agree everywhere).
    """
    if not problem.zero_field:
        raise ValidationError("cluster moves are iso-energetic only at zero field")
    for c in (replica_a, replica_b):
        if c.num_spins != problem.num_spins:
            raise ValidationError("replica length must equal num_spins")
    spins = np.stack([replica_a.spins, replica_b.spins]).astype(np.float64)
    energies = _matrix_energies(problem, spins)
    site_nbrs, site_vals = _site_neighbourhoods(problem)
    _icm_pair(spins, energies, 0, 1, site_nbrs, site_vals, rng)
    return _pack_row(spins[0]), _pack_row(spins[1])


def _exchange(spins, energies, betas, base, rungs, parity, rng):
    """Neighbour swap attempts for rows base..base+rungs-1 at one parity."""
    pairs = list(range(parity, rungs - 1, 2))
    if not pairs:
        return 0, ()
    uniforms = rng.random(len(pairs))
    accepted = []
    for t, k in enumerate(pairs):
        a, b = base + k, base + k + 1
        delta = (betas[b] - betas[a]) * (energies[b] - energies[a])
        if delta >= 0 or uniforms[t] < np.exp(delta):
            spins[[a, b]] = spins[[b, a]]
            energies[[a, b]] = energies[[b, a]]
            accepted.append(k)
    return len(pairs), tuple(accepted)


def _run_pt_engine(problem: IsingProblem, config: PTConfig, icm: bool,
                   stop_at_energy=None) -> SampleSet:
    if icm and not problem.zero_field:
        raise ValidationError("PT+ICM requires a zero-field problem")
    rungs = len(config.ladder)
    sets = 2 if icm else 1
    total_rows = sets * rungs
    n = problem.num_spins
    ladder = np.asarray(config.ladder.betas)
    betas = np.concatenate([ladder] * sets)
    site_nbrs, site_vals = _site_neighbourhoods(problem)

    clock = SpinUpdateClock()
    samples = []
    for copy in range(config.num_copies):
        rng = stream(config.seed, "pt-icm" if icm else "pt", copy)
        spins = (1 - 2 * rng.integers(0, 2, size=(total_rows, n))).astype(np.float64)
        energies = _matrix_energies(problem, spins)
        stopped = False
        for iteration in range(1, config.max_sweeps + 1):
            _sweep(spins, energies, betas, problem.linear, site_nbrs, site_vals,
                   rng.random((total_rows, n)))
            clock.advance(total_rows * n)
            if icm:
                for k in range(rungs):
                    _icm_pair(spins, energies, k, rungs + k, site_nbrs, site_vals, rng)
            parity = (iteration - 1) % 2
            for s in range(sets):
                _exchange(spins, energies, betas, s * rungs, rungs, parity, rng)
            emit = iteration % config.sweeps_between_samples == 0
            if stop_at_energy is not None and energies.min() <= stop_at_energy:
                emit, stopped = True, True
            if emit:
                for row in range(total_rows):
                    samples.append(Sample(_pack_row(spins[row]), float(energies[row]),
                                          clock.time_ns, run_index=copy))
            if stopped:
                break
        if stopped:
            break
    return SampleSet(samples, problem.problem_id)


def run_pt(problem: IsingProblem, config: PTConfig, stop_at_energy=None) -> SampleSet:
    """Parallel tempering with sequential copies sharing one clock.

    Each iteration sweeps every replica once, then attempts neighbour
    exchanges on alternating even/odd rung pairs with acceptance
    min(1, exp(d_beta * d_E)). Every sweeps_between_samples iterations all
    replica configurations are emitted, stamped with the cumulative clock.
    With icm_enabled the replica count per rung doubles and a cluster move
    runs at every rung between the two sets, after sweeps and before
    exchanges. stop_at_energy is a diagnostic early-exit: when any replica
    reaches it, everything is emitted once and the run ends.
    """
    return _run_pt_engine(problem, config, config.icm_enabled, stop_at_energy)


def run_pt_icm(problem: IsingProblem, config: PTConfig, stop_at_energy=None) -> SampleSet:
    """run_pt with the iso-energetic cluster moves forced on."""
    return _run_pt_engine(problem, config, True, stop_at_energy)


def measure_exchange_rates(problem: IsingProblem, ladder: TemperatureLadder,
                           iterations: int = 400, burn_in: int = 100,
                           seed: int = 0) -> np.ndarray:
    """Measured swap acceptance per adjacent rung pair over a short PT run."""
    rungs = len(ladder)
    if rungs < 2:
        return np.zeros(0)
    n = problem.num_spins
    betas = np.asarray(ladder.betas)
    site_nbrs, site_vals = _site_neighbourhoods(problem)
    rng = stream(seed, "exchange-measure")
    spins = (1 - 2 * rng.integers(0, 2, size=(rungs, n))).astype(np.float64)
    energies = _matrix_energies(problem, spins)
    attempts = np.zeros(rungs - 1)
    accepts = np.zeros(rungs - 1)
    for iteration in range(burn_in + iterations):
        _sweep(spins, energies, betas, problem.linear, site_nbrs, site_vals,
               rng.random((rungs, n)))
        parity = iteration % 2
        tried, accepted = _exchange(spins, energies, betas, 0, rungs, parity, rng)
        if iteration >= burn_in and tried:
            for k in range(parity, rungs - 1, 2):
                attempts[k] += 1
            for k in accepted:
                accepts[k] += 1
    with np.errstate(invalid="ignore"):
        return np.where(attempts > 0, accepts / np.maximum(attempts, 1), 0.0)


TUNE_TOLERANCE = 0.1
TUNE_MAX_ITERATIONS = 50


def tune_temperatures(problem: IsingProblem, target_exchange_rate: float,
                      seed: int = 0, beta_min: float = 0.1, beta_max: float = 5.0,
                      max_rungs: int = 128) -> TemperatureLadder:
    """Build a ladder whose measured exchange rates sit near the target.

    Starts from a geometric ladder on [beta_min, beta_max] and iteratively
    respaces rungs by equalizing the measured log-acceptance between
    neighbours, adding or removing rungs as needed. Returns the first
    ladder with every rate within +-0.1 of the target, or the best ladder
    found after 50 rounds (with a warning).
    """
    if not 0 < target_exchange_rate < 1:
        raise ValidationError("target exchange rate must lie in (0, 1)")
    ladder = geometric_ladder(beta_min, beta_max, 12)
    best_ladder, best_deviation = ladder, np.inf
    target_difficulty = -np.log(target_exchange_rate)
    for round_idx in range(TUNE_MAX_ITERATIONS):
        # longer measurements on later rounds so noise cannot stall convergence
        rates = measure_exchange_rates(problem, ladder,
                                       iterations=400 + 100 * round_idx,
                                       seed=stream(seed, "tune", round_idx)
                                       .integers(1 << 32))
        if not len(rates):
            deviation = np.inf
        else:
            deviation = np.abs(rates - target_exchange_rate).max()
        if deviation <= TUNE_TOLERANCE:
            return ladder
        if deviation < best_deviation:
            best_ladder, best_deviation = ladder, deviation
        # respace by cumulative log-acceptance: each new gap should carry
        # -log(target) worth of difficulty
        difficulty = -np.log(np.clip(rates, 1e-3, 1 - 1e-9))
        cumulative = np.concatenate([[0.0], np.cumsum(difficulty)])
        total = cumulative[-1]
        num_gaps = int(np.clip(round(total / target_difficulty), 1, max_rungs - 1))
        positions = np.linspace(0.0, total, num_gaps + 1)
        if total > 0:
            new_betas = np.interp(positions, cumulative, ladder.betas)
        else:  # every pair already exchanges freely; widen instead
            new_betas = np.geomspace(ladder.betas[0], ladder.betas[-1], num_gaps + 1)
        new_betas = np.unique(new_betas)
        if len(new_betas) < 2:
            new_betas = np.array([beta_min, beta_max])
        ladder = TemperatureLadder(tuple(new_betas))
    warnings.warn(
        f"exchange-rate tuning did not converge within {TUNE_MAX_ITERATIONS} rounds "
        f"(best deviation {best_deviation:.3f})",
        RuntimeWarning,
    )
    return best_ladder
