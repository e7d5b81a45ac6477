"""Report emission: delimited tables plus rendered figures.

Three views of a results directory, each written as a CSV next to a PNG:
per-class TTD series sorted by increasing TTD, instance-by-instance
solver-vs-solver TTD pairs with censored points flagged, and
diversity-over-time bands between the 5th and 95th percentiles across
experiments. A grid-search table, when present, is rendered as a heatmap.
"""

import csv
import math
from pathlib import Path
import re

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import load_result_records


def _safe(name) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", str(name)) or "none"


def _ttd_of(record) -> float:
    value = record["ttd"]["ttd_ns"]
    return math.inf if value is None else float(value)


def _group_key(record):
    return record["class"], record["L"]


def write_sorted_ttd_series(records, out: Path) -> list:
    """Per (class, L): each solver's TTD values in increasing order."""
    written = []
    groups = {}
    for r in records:
        groups.setdefault(_group_key(r), []).append(r)
    for (cls, size), group in sorted(groups.items(), key=str):
        solvers = sorted({r["solver"] for r in group})
        stem = f"ttd_sorted_{_safe(cls)}_L{_safe(size)}"
        rows = []
        for solver in solvers:
            chosen = sorted((r for r in group if r["solver"] == solver), key=_ttd_of)
            for rank, r in enumerate(chosen):
                rows.append([solver, rank, r["instance"],
                             "inf" if math.isinf(_ttd_of(r)) else _ttd_of(r),
                             int(r["ttd"]["censored"])])
        csv_path = out / f"{stem}.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["solver", "rank", "instance", "ttd_ns", "censored"])
            writer.writerows(rows)
        written.append(csv_path)

        fig, ax = plt.subplots(figsize=(6, 4))
        for solver in solvers:
            values = [_ttd_of(r) for r in group if r["solver"] == solver]
            finite = sorted(v for v in values if math.isfinite(v))
            censored = sum(1 for r in group
                           if r["solver"] == solver and r["ttd"]["censored"])
            label = solver + (f" ({censored} censored)" if censored else "")
            ax.plot(range(len(finite)), finite, marker="o", label=label)
        ax.set_yscale("log")
        ax.set_xlabel("instance rank")
        ax.set_ylabel("TTD [ns]")
        ax.set_title(f"{cls} L={size}: TTD ordered by increasing TTD")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig_path = out / f"{stem}.png"
        fig.savefig(fig_path, dpi=150)
        plt.close(fig)
        written.append(fig_path)
    return written


def write_ttd_pairs(records, out: Path) -> list:
    """Instance-by-instance TTD of one solver against another."""
    written = []
    groups = {}
    for r in records:
        groups.setdefault(_group_key(r), []).append(r)
    for (cls, size), group in sorted(groups.items(), key=str):
        solvers = sorted({r["solver"] for r in group})
        for a_idx in range(len(solvers)):
            for b_idx in range(a_idx + 1, len(solvers)):
                sa, sb = solvers[a_idx], solvers[b_idx]
                by_instance = {}
                for r in group:
                    if r["solver"] in (sa, sb):
                        by_instance.setdefault(r["instance"], {})[r["solver"]] = r
                pairs = [(inst, d[sa], d[sb]) for inst, d in sorted(by_instance.items())
                         if sa in d and sb in d]
                if not pairs:
                    continue
                stem = f"ttd_pairs_{_safe(cls)}_L{_safe(size)}__{_safe(sa)}__vs__{_safe(sb)}"
                csv_path = out / f"{stem}.csv"
                with open(csv_path, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["instance", f"ttd_ns_{sa}", f"ttd_ns_{sb}",
                                     f"censored_{sa}", f"censored_{sb}"])
                    for inst, ra, rb in pairs:
                        writer.writerow([
                            inst,
                            "inf" if math.isinf(_ttd_of(ra)) else _ttd_of(ra),
                            "inf" if math.isinf(_ttd_of(rb)) else _ttd_of(rb),
                            int(ra["ttd"]["censored"]), int(rb["ttd"]["censored"]),
                        ])
                written.append(csv_path)

                fig, ax = plt.subplots(figsize=(4.5, 4.5))
                finite = [(_ttd_of(ra), _ttd_of(rb)) for _, ra, rb in pairs
                          if math.isfinite(_ttd_of(ra)) and math.isfinite(_ttd_of(rb))]
                if finite:
                    xs, ys = zip(*finite)
                    ax.scatter(xs, ys, s=18)
                    lo, hi = min(min(xs), min(ys)), max(max(xs), max(ys))
                    ax.plot([lo, hi], [lo, hi], "k--", linewidth=0.8)
                    ax.set_xscale("log")
                    ax.set_yscale("log")
                n_censored = len(pairs) - len(finite)
                ax.set_xlabel(f"TTD {sa} [ns]")
                ax.set_ylabel(f"TTD {sb} [ns]")
                title = f"{cls} L={size}"
                if n_censored:
                    title += f" ({n_censored} censored pairs not shown)"
                ax.set_title(title, fontsize=9)
                fig.tight_layout()
                fig_path = out / f"{stem}.png"
                fig.savefig(fig_path, dpi=150)
                plt.close(fig)
                written.append(fig_path)
    return written


def write_diversity_bands(records, out: Path) -> list:
    """Per record: 5th/50th/95th percentile of diversity across experiments."""
    written = []
    for r in sorted(records, key=lambda r: (r["instance"], r["solver"], r["params_hash"])):
        grid = np.asarray(r["grid"], dtype=float)
        curves = np.asarray(r["experiments"], dtype=float)
        if curves.size == 0:
            continue
        p5, p50, p95 = np.percentile(curves, [5, 50, 95], axis=0)
        stem = f"diversity_bands_{_safe(r['instance'])}__{_safe(r['solver'])}__{r['params_hash']}"
        csv_path = out / f"{stem}.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_ns", "p5", "p50", "p95", "target"])
            for k in range(len(grid)):
                writer.writerow([int(grid[k]), p5[k], p50[k], p95[k],
                                 r["target_diversity"]])
        written.append(csv_path)

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.fill_between(grid, p5, p95, alpha=0.3, label="5th-95th percentile")
        ax.plot(grid, p50, label="median")
        ax.axhline(r["target_diversity"], color="k", linewidth=1.0,
                   label=f"target D = {r['target_diversity']}")
        ax.set_xscale("log")
        ax.set_xlabel("time [ns]")
        ax.set_ylabel("diversity (lower bound)")
        ax.set_title(f"{r['instance']} / {r['solver']}", fontsize=9)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig_path = out / f"{stem}.png"
        fig.savefig(fig_path, dpi=150)
        plt.close(fig)
        written.append(fig_path)
    return written


def write_grid_heatmap(results_dir: Path, out: Path) -> list:
    """Render grid_search.csv as a heatmap when it varies exactly two parameters."""
    table = results_dir / "grid_search.csv"
    if not table.exists():
        return []
    with open(table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return []
    fixed = {"median_ttd_ns", "resolved_replicas", "resolved_copies", "best"}
    params = [c for c in rows[0] if c not in fixed]
    if len(params) != 2:
        return []
    xs = sorted({r[params[0]] for r in rows}, key=float)
    ys = sorted({r[params[1]] for r in rows}, key=float)
    grid = np.full((len(ys), len(xs)), np.nan)
    for r in rows:
        x = xs.index(r[params[0]])
        y = ys.index(r[params[1]])
        value = float(r["median_ttd_ns"])
        grid[y, x] = math.log10(value) if math.isfinite(value) and value > 0 else np.nan
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis_r")
    ax.set_xticks(range(len(xs)), xs)
    ax.set_yticks(range(len(ys)), ys)
    ax.set_xlabel(params[0])
    ax.set_ylabel(params[1])
    best = [r for r in rows if r.get("best") == "1"]
    if best:
        ax.plot(xs.index(best[0][params[0]]), ys.index(best[0][params[1]]),
                "rx", markersize=12)
    fig.colorbar(im, label="log10 median TTD [ns]")
    fig.tight_layout()
    fig_path = out / "grid_search_heatmap.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [fig_path]


def cmd_report(results_dir, out_dir=None) -> list:
    """Emit every report artifact for a results directory; returns the paths."""
    results = Path(results_dir)
    out = Path(out_dir) if out_dir else results / "report"
    out.mkdir(parents=True, exist_ok=True)
    records = load_result_records(results)
    written = []
    written += write_sorted_ttd_series(records, out)
    written += write_ttd_pairs(records, out)
    written += write_diversity_bands(records, out)
    written += write_grid_heatmap(results, out)
    return [str(p) for p in written]
