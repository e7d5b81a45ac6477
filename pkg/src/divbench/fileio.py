"""Problem JSON and sample JSONL serialization (format version "1").

Problem files are a single JSON object:

    {"#meta": {"version": "1"}, "num_spins": N, "h": [...],
     "j": [[i, j, value], ...], "metadata": {...}}

Sample files are JSON Lines, a meta header followed by one object per
sample; spins are the packed bits as a hex string, little-endian within
bytes:

    {"#meta": {"version": "1", "num_spins": N, "problem_id": "..."}}
    {"run": k, "time_ns": t, "energy": e, "spins": "a3f0..."}
"""

import json
from pathlib import Path

from .core import FormatError, IsingProblem, Sample, SampleSet, SpinConfiguration

FORMAT_VERSION = "1"


def _check_version(meta, path):
    if not isinstance(meta, dict) or meta.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: expected format version {FORMAT_VERSION!r}")


def save_problem(problem: IsingProblem, path):
    doc = {
        "#meta": {"version": FORMAT_VERSION},
        "num_spins": problem.num_spins,
        "h": problem.linear.tolist(),
        "j": [[i, j, v] for i, j, v in problem.couplings],
        "metadata": problem.metadata,
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n")


def load_problem(path) -> IsingProblem:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    _check_version(doc.get("#meta"), path)
    try:
        return IsingProblem(
            doc["num_spins"],
            doc["h"],
            [(i, j, v) for i, j, v in doc["j"]],
            doc.get("metadata", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed problem object ({exc})") from exc


def save_samples(sample_set: SampleSet, num_spins: int, path):
    lines = [
        json.dumps(
            {
                "#meta": {
                    "version": FORMAT_VERSION,
                    "num_spins": num_spins,
                    "problem_id": sample_set.problem_id,
                }
            },
            sort_keys=True,
        )
    ]
    for s in sample_set:
        lines.append(
            json.dumps(
                {
                    "run": s.run_index,
                    "time_ns": s.time_ns,
                    "energy": s.energy,
                    "spins": s.config.to_hex(),
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_samples(path, expected_num_spins=None) -> SampleSet:
    """Parse a sample JSONL file, validating lengths and canonical padding."""
    return load_samples_with_lines(path, expected_num_spins)[0]


def load_samples_with_lines(path, expected_num_spins=None):
    """As load_samples, also returning each sample's 1-based line number."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty sample file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:1: invalid JSON ({exc})") from exc
    if "#meta" not in header:
        raise FormatError(f"{path}: first line must carry the #meta header")
    meta = header["#meta"]
    _check_version(meta, path)
    num_spins = meta.get("num_spins")
    if not isinstance(num_spins, int) or num_spins < 1:
        raise FormatError(f"{path}: #meta.num_spins missing or invalid")
    if expected_num_spins is not None and num_spins != expected_num_spins:
        raise FormatError(
            f"{path}: file holds {num_spins}-spin samples, expected {expected_num_spins}"
        )

    samples = []
    linenos = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            config = SpinConfiguration.from_hex(num_spins, obj["spins"])
            samples.append(
                Sample(
                    config=config,
                    energy=float(obj["energy"]),
                    time_ns=int(obj["time_ns"]),
                    run_index=int(obj["run"]),
                )
            )
            linenos.append(lineno)
        except Exception as exc:
            raise FormatError(f"{path}:{lineno}: bad sample line ({exc})") from exc
    return SampleSet(samples, problem_id=str(meta.get("problem_id", ""))), linenos
