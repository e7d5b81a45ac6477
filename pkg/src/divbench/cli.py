"""divbench command line interface.

Subcommands: generate, solve, diversity, ttd, grid-search, benchmark,
import-reference, report. Exit codes: 0 success, 2 validation error,
3 censored-only results, 4 I/O error.
"""

import argparse
import json
from pathlib import Path
import sys

from .core import DivbenchError, ValidationError
from .diversity import build_distance_graph, estimate_diversity
from .fileio import load_problem, load_samples, save_samples
from .harness import (
    ExperimentConfig,
    SolverSpec,
    cmd_generate,
    cmd_grid_search,
    cmd_run_benchmark,
    import_reference,
    make_time_grid,
    resolve_solver,
    run_resolved,
)
from .metrics import (
    ApproximationSpec,
    default_searchers,
    diversity_over_time,
    energy_threshold,
    estimate_success_probability,
    filter_fit_unique,
    min_max_energy_search,
    target_diversity,
    ttd_from_success_curve,
)
from .topology import DCLParams

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CENSORED_ONLY = 3
EXIT_IO = 4


def _energy_bounds_from_args(problem, args):
    if args.e_min is not None and args.e_max is not None:
        return args.e_min, args.e_max
    return min_max_energy_search(problem, args.energy_budget, default_searchers(),
                                 seed=args.seed)


def _cmd_generate(args):
    paths = cmd_generate(
        [args.cls], [args.size], args.count, args.seed, args.out,
        DCLParams(args.alpha_dcl, args.r_dcl, args.lam),
    )
    print(f"wrote {len(paths)} problem files to {args.out}")
    return EXIT_OK


def _cmd_solve(args):
    problem = load_problem(args.problem)
    params = json.loads(Path(args.params).read_text()) if args.params else {}
    spec = SolverSpec(id=args.solver, kind=args.solver, params=params)
    resolved = resolve_solver(problem, spec, args.wall_time_ns, tune_seed=args.seed)
    samples = run_resolved(problem, resolved, args.seed)
    save_samples(samples, problem.num_spins, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def _cmd_diversity(args):
    problem = load_problem(args.problem)
    samples = load_samples(args.samples, expected_num_spins=problem.num_spins)
    e_min, e_max = _energy_bounds_from_args(problem, args)
    spec = ApproximationSpec(args.alpha, e_min, e_max, args.radius)
    fit = filter_fit_unique(samples, energy_threshold(spec))
    graph = build_distance_graph(fit, args.radius, problem.num_spins)
    estimate = estimate_diversity(graph, args.shuffles, seed=args.seed,
                                  compute_upper=args.upper, compute_exact=args.exact)
    print(json.dumps(estimate.to_dict()))
    return EXIT_OK


def _cmd_ttd(args):
    problem = load_problem(args.problem)
    e_min, e_max = _energy_bounds_from_args(problem, args)
    spec = ApproximationSpec(args.alpha, e_min, e_max, args.radius)
    reference = import_reference(args.target_from, problem, strict=True)
    target = target_diversity(reference, spec, args.target_calcs, args.shuffles,
                              seed=args.seed, source=f"file:{args.target_from}")
    experiment_files = sorted(Path(args.experiments).glob("*.jsonl"))
    if not experiment_files:
        raise ValidationError(f"no .jsonl experiment files under {args.experiments}")
    runs = [load_samples(p, expected_num_spins=problem.num_spins)
            for p in experiment_files]
    t_lo = min((min((s.time_ns for s in r), default=1) for r in runs), default=1)
    t_hi = max((max((s.time_ns for s in r), default=1) for r in runs), default=1)
    grid = make_time_grid(t_lo, t_hi, args.grid_points)
    curves = [diversity_over_time(r, spec, grid, args.shuffles, seed=args.seed + k)
              for k, r in enumerate(runs)]
    success = [estimate_success_probability(curves, target, t) for t in grid]
    record = ttd_from_success_curve(grid, success, "experiments", problem.problem_id)
    doc = {
        "record": record.to_dict(),
        "target_diversity": target.value,
        "alpha": args.alpha,
        "radius": args.radius,
        "e_min": e_min,
        "e_max": e_max,
        "grid": grid,
        "success": success,
    }
    Path(args.out).write_text(json.dumps(doc, sort_keys=True))
    print(json.dumps(doc["record"]))
    return EXIT_CENSORED_ONLY if record.censored else EXIT_OK


def _apply_overrides(config, args):
    if args.out is not None:
        config.out_dir = args.out
    if args.seed is not None:
        config.master_seed = args.seed
    if args.experiments is not None:
        config.num_experiments = args.experiments
    if args.wall_time_ns is not None:
        config.wall_time_ns = args.wall_time_ns
    return config


def _cmd_benchmark(args):
    config = _apply_overrides(ExperimentConfig.from_file(args.config), args)
    records = cmd_run_benchmark(config, progress=_progress(args))
    censored = sum(1 for r in records if r["ttd"]["censored"])
    print(f"wrote {len(records)} records to {config.out_dir} ({censored} censored)")
    if records and censored == len(records):
        return EXIT_CENSORED_ONLY
    return EXIT_OK


def _cmd_grid_search(args):
    config = _apply_overrides(ExperimentConfig.from_file(args.config), args)
    best, rows = cmd_grid_search(config, base_solver=args.solver,
                                 progress=_progress(args))
    print(json.dumps({"best": best, "points": len(rows)}))
    if best is None:
        return EXIT_CENSORED_ONLY
    return EXIT_OK


def _cmd_import_reference(args):
    problem = load_problem(args.problem)
    samples = import_reference(args.samples, problem, strict=not args.lenient)
    below = sum(1 for s in samples if s.energy <= 0)
    print(f"imported {len(samples)} samples "
          f"(problem {problem.problem_id}, {below} at energy <= 0)")
    if args.out:
        save_samples(samples, problem.num_spins, args.out)
    return EXIT_OK


def _cmd_report(args):
    from .report import cmd_report

    written = cmd_report(args.results, args.out)
    print(f"wrote {len(written)} report files")
    return EXIT_OK


def _progress(args):
    if getattr(args, "quiet", False):
        return None
    return lambda msg: print(f"... {msg}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divbench",
                                     description="Ising solver diversity benchmarking")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate problem instances")
    p.add_argument("--class", dest="cls", required=True, choices=["ran1", "ac3", "dcl"])
    p.add_argument("--size", type=int, required=True, help="Chimera grid size L")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha-dcl", dest="alpha_dcl", type=float, default=0.25)
    p.add_argument("--r-dcl", dest="r_dcl", type=int, default=1)
    p.add_argument("--lam", type=float, default=7.0)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("solve", help="run one solver on one problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--solver", required=True, choices=["sa", "pt", "pt-icm"])
    p.add_argument("--params", help="JSON file of solver parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wall-time-ns", dest="wall_time_ns", type=int,
                   default=300_000_000_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("diversity", help="diversity estimate of a sample file")
    p.add_argument("--problem", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--radius", type=float, default=0.25)
    p.add_argument("--shuffles", type=int, default=100)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--upper", action="store_true")
    p.add_argument("--e-min", dest="e_min", type=float)
    p.add_argument("--e-max", dest="e_max", type=float)
    p.add_argument("--energy-budget", dest="energy_budget", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_diversity)

    p = sub.add_parser("ttd", help="TTD of stored experiments against a reference")
    p.add_argument("--problem", required=True)
    p.add_argument("--target-from", dest="target_from", required=True)
    p.add_argument("--experiments", required=True, help="directory of .jsonl runs")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--radius", type=float, default=0.25)
    p.add_argument("--shuffles", type=int, default=100)
    p.add_argument("--target-calcs", dest="target_calcs", type=int, default=100)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=32)
    p.add_argument("--e-min", dest="e_min", type=float)
    p.add_argument("--e-max", dest="e_max", type=float)
    p.add_argument("--energy-budget", dest="energy_budget", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ttd)

    p = sub.add_parser("grid-search", help="hyper-parameter grid search")
    p.add_argument("--config", required=True)
    p.add_argument("--solver", help="base solver id (default: first in config)")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--experiments", type=int)
    p.add_argument("--wall-time-ns", dest="wall_time_ns", type=int)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("benchmark", help="full benchmark from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--experiments", type=int)
    p.add_argument("--wall-time-ns", dest="wall_time_ns", type=int)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("import-reference", help="validate an external sample file")
    p.add_argument("--problem", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--lenient", action="store_true",
                   help="correct mismatched energies instead of rejecting")
    p.add_argument("--out", help="write the validated set back out")
    p.set_defaults(func=_cmd_import_reference)

    p = sub.add_parser("report", help="emit CSV tables and figures for results")
    p.add_argument("--results", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
