"""Round-trip and validation tests for the problem/sample file formats."""

import json

import pytest

from divbench.core import FormatError, Sample, SampleSet, SpinConfiguration
from divbench.fileio import load_problem, load_samples, save_problem, save_samples
from divbench.topology import chimera, gen_ac3


def test_problem_roundtrip(tmp_path):
    p = gen_ac3(chimera(2), seed=4)
    path = tmp_path / "p.json"
    save_problem(p, path)
    q = load_problem(path)
    assert q.num_spins == p.num_spins
    assert q.couplings == p.couplings
    assert q.metadata == p.metadata
    # a second save is byte-identical
    save_problem(q, tmp_path / "p2.json")
    assert (tmp_path / "p.json").read_bytes() == (tmp_path / "p2.json").read_bytes()


def test_problem_version_checked(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"#meta": {"version": "2"}, "num_spins": 2, "h": [0, 0], "j": []}))
    with pytest.raises(FormatError):
        load_problem(path)
    path.write_text(json.dumps({"num_spins": 2, "h": [0, 0], "j": []}))
    with pytest.raises(FormatError):
        load_problem(path)


def test_problem_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(FormatError):
        load_problem(path)
    path.write_text(json.dumps({"#meta": {"version": "1"}, "num_spins": 2}))
    with pytest.raises(FormatError):
        load_problem(path)


def _sample_set(rng, n=10, count=5):
    samples = [
        Sample(SpinConfiguration.random(n, rng), float(k), time_ns=100 * (k + 1), run_index=k)
        for k in range(count)
    ]
    return SampleSet(samples, problem_id="test-problem")


def test_samples_roundtrip(tmp_path, rng):
    original = _sample_set(rng)
    path = tmp_path / "s.jsonl"
    save_samples(original, 10, path)
    loaded = load_samples(path, expected_num_spins=10)
    assert loaded.problem_id == "test-problem"
    assert list(loaded) == list(original)
    # byte-identical on re-save
    save_samples(loaded, 10, tmp_path / "s2.jsonl")
    assert path.read_bytes() == (tmp_path / "s2.jsonl").read_bytes()


def test_samples_wrong_num_spins(tmp_path, rng):
    path = tmp_path / "s.jsonl"
    save_samples(_sample_set(rng), 10, path)
    with pytest.raises(FormatError):
        load_samples(path, expected_num_spins=12)


def test_samples_missing_header(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text('{"run": 0, "time_ns": 1, "energy": 0.0, "spins": "00"}\n')
    with pytest.raises(FormatError):
        load_samples(path)


def test_samples_bad_hex_length(tmp_path):
    path = tmp_path / "s.jsonl"
    header = json.dumps({"#meta": {"version": "1", "num_spins": 10, "problem_id": "x"}})
    body = json.dumps({"run": 0, "time_ns": 1, "energy": 0.0, "spins": "00"})
    path.write_text(header + "\n" + body + "\n")
    with pytest.raises(FormatError) as err:
        load_samples(path)
    assert ":2:" in str(err.value)


def test_samples_noncanonical_padding_rejected(tmp_path):
    path = tmp_path / "s.jsonl"
    header = json.dumps({"#meta": {"version": "1", "num_spins": 4, "problem_id": "x"}})
    body = json.dumps({"run": 0, "time_ns": 1, "energy": 0.0, "spins": "ff"})
    path.write_text(header + "\n" + body + "\n")
    with pytest.raises(FormatError):
        load_samples(path)


def test_samples_empty_file(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text("")
    with pytest.raises(FormatError):
        load_samples(path)
