"""divbench: diversity and time-to-diversity benchmarking for Ising heuristics."""

__version__ = "0.1.0"

from .core import (
    DimensionError,
    DivbenchError,
    FormatError,
    Gauge,
    GenerationStuckError,
    IsingProblem,
    NotBipartiteError,
    Sample,
    SampleSet,
    SizeGuardError,
    SpinConfiguration,
    ValidationError,
    apply_gauge,
    energies_batch,
    energy,
    enumerate_energies,
    exhaustive_minimum,
    gauge_transform,
    max_energy_bipartite,
)
from .diversity import (
    AdjacencyGraph,
    DistanceGraph,
    DiversityEstimate,
    build_distance_graph,
    estimate_diversity,
    exact_mis_bruteforce,
    greedy_coloring_upper_bound,
    hamming_distance,
    lna_best_of_shuffles,
    lna_lower_bound,
    mis_to_ising,
    tight_bound_via_sa,
)
from .fileio import load_problem, load_samples, save_problem, save_samples
from .metrics import (
    ApproximationSpec,
    TargetDiversity,
    TTDRecord,
    approximation_ratio,
    diversity_over_time,
    energy_threshold,
    estimate_success_probability,
    filter_fit_unique,
    min_max_energy_search,
    target_diversity,
    ttd,
)
from .solvers import (
    PTConfig,
    SpinUpdateClock,
    TemperatureLadder,
    geometric_ladder,
    geometric_schedule,
    icm_move,
    measure_exchange_rates,
    metropolis_sweep,
    run_pt,
    run_pt_icm,
    simulated_annealing,
    tune_temperatures,
)
from .topology import (
    ChimeraGraph,
    DCLParams,
    EdgeGraph,
    chimera,
    chimera_grid,
    gen_ac3,
    gen_dcl,
    gen_ran1,
    two_coloring,
)
