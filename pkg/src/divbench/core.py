"""Ising problems, bit-packed spin configurations, samples, and energy.

Energy convention: E(s) = sum_i h_i s_i + sum_{i<j} J_ij s_i s_j with spins
s_i in {+1, -1}. Under this sign a negative coupling is ferromagnetic.
Spins are stored bit-packed, bit b_i = (1 - s_i) / 2, little-endian within
bytes, so Hamming distances reduce to popcounts of XORed words.
"""

from dataclasses import dataclass, field
from functools import cached_property
import hashlib

import numpy as np


class DivbenchError(Exception):
    """Base class for package errors."""


class DimensionError(DivbenchError):
    """Vector length does not match the problem size."""


class ValidationError(DivbenchError):
    """Input violates a documented precondition or invariant."""


class NotBipartiteError(ValidationError):
    """Graph contains an odd cycle."""


class SizeGuardError(ValidationError):
    """Exact computation requested above its size guard."""


class GenerationStuckError(DivbenchError):
    """Instance generation exceeded its rejection budget."""


class DegenerateSpectrumError(ValidationError):
    """Energy spectrum has zero width (e_max == e_min)."""


class FormatError(DivbenchError):
    """File does not conform to the documented schema."""


def _pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(bits.astype(np.uint8), bitorder="little").tobytes()


@dataclass(frozen=True)
class SpinConfiguration:
    """Immutable bit-packed vector of N spins.

    Bit 0 encodes spin +1, bit 1 encodes spin -1. Padding bits past
    num_spins are zero (canonical form), so equality and hashing work on
    the raw bytes.
    """

    num_spins: int
    packed: bytes

    def __post_init__(self):
        nbytes = (self.num_spins + 7) // 8
        if self.num_spins < 0 or len(self.packed) != nbytes:
            raise DimensionError(
                f"packed length {len(self.packed)} does not hold {self.num_spins} spins"
            )
        if self.num_spins % 8 and self.packed:
            pad_mask = 0xFF << (self.num_spins % 8) & 0xFF
            if self.packed[-1] & pad_mask:
                raise ValidationError("padding bits beyond num_spins must be zero")

    @classmethod
    def from_spins(cls, spins) -> "SpinConfiguration":
        """Build from a +-1 vector."""
        s = np.asarray(spins)
        if not np.all(np.abs(s) == 1):
            raise ValidationError("spins must be +-1")
        return cls(len(s), _pack_bits((1 - s) // 2))

    @classmethod
    def from_bits(cls, bits) -> "SpinConfiguration":
        b = np.asarray(bits)
        return cls(len(b), _pack_bits(b))

    @classmethod
    def from_int(cls, num_spins: int, value: int) -> "SpinConfiguration":
        """Bits taken from the little-endian binary expansion of value."""
        if value < 0 or value >> num_spins:
            raise ValidationError("value has bits beyond num_spins")
        return cls(num_spins, value.to_bytes((num_spins + 7) // 8, "little"))

    @classmethod
    def from_hex(cls, num_spins: int, hex_string: str) -> "SpinConfiguration":
        return cls(num_spins, bytes.fromhex(hex_string))

    @classmethod
    def random(cls, num_spins: int, rng: np.random.Generator) -> "SpinConfiguration":
        return cls.from_bits(rng.integers(0, 2, size=num_spins))

    @property
    def spins(self) -> np.ndarray:
        """The configuration as a +-1 int8 vector."""
        bits = np.unpackbits(
            np.frombuffer(self.packed, dtype=np.uint8),
            count=self.num_spins,
            bitorder="little",
        )
        return (1 - 2 * bits.astype(np.int8)).astype(np.int8)

    def as_int(self) -> int:
        return int.from_bytes(self.packed, "little")

    def to_hex(self) -> str:
        return self.packed.hex()

    def __len__(self) -> int:
        return self.num_spins


@dataclass(frozen=True)
class Gauge:
    """Spin-reversal transformation: a vector of signs alpha_i in {+-1}."""

    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs, dtype=np.int8)
        if not np.all(np.abs(s) == 1):
            raise ValidationError("gauge entries must be +-1")
        s.flags.writeable = False
        object.__setattr__(self, "signs", s)

    def __len__(self) -> int:
        return len(self.signs)

    @classmethod
    def random(cls, num_spins: int, rng: np.random.Generator) -> "Gauge":
        return cls(1 - 2 * rng.integers(0, 2, size=num_spins).astype(np.int8))


class IsingProblem:
    """Immutable zero-field-capable Ising problem over an explicit graph.

    Parameters
    ----------
    num_spins : int
        Number of spins N >= 1.
    linear : array-like or None
        Fields h_i, length N. None means all zero.
    couplings : iterable of (i, j, value)
        Sparse couplings with 0 <= i < j < N, each pair at most once.
        Zero values are omitted rather than stored.
    metadata : dict
        Free-form tags (instance class, seed, grid size, ...).
    """

    def __init__(self, num_spins, linear=None, couplings=(), metadata=None):
        if num_spins < 1:
            raise ValidationError(f"num_spins must be >= 1, got {num_spins}")
        self._n = int(num_spins)

        h = np.zeros(self._n) if linear is None else np.asarray(linear, dtype=np.float64)
        if h.shape != (self._n,):
            raise DimensionError(f"linear terms must have length {self._n}")
        h = h.copy()
        h.flags.writeable = False
        self._h = h

        triples = [(int(i), int(j), float(v)) for i, j, v in couplings if v != 0.0]
        seen = set()
        for i, j, _ in triples:
            if not (0 <= i < j < self._n):
                raise ValidationError(f"coupling ({i}, {j}) must satisfy 0 <= i < j < N")
            if (i, j) in seen:
                raise ValidationError(f"duplicate coupling ({i}, {j})")
            seen.add((i, j))
        self._edge_i = np.array([t[0] for t in triples], dtype=np.int32)
        self._edge_j = np.array([t[1] for t in triples], dtype=np.int32)
        self._edge_val = np.array([t[2] for t in triples], dtype=np.float64)
        for a in (self._edge_i, self._edge_j, self._edge_val):
            a.flags.writeable = False

        self.metadata = dict(metadata) if metadata else {}

    @property
    def num_spins(self) -> int:
        return self._n

    @property
    def linear(self) -> np.ndarray:
        return self._h

    @property
    def couplings(self) -> list:
        """Couplings as a list of (i, j, value) triples."""
        return list(zip(self._edge_i.tolist(), self._edge_j.tolist(), self._edge_val.tolist()))

    @property
    def num_couplings(self) -> int:
        return len(self._edge_val)

    @property
    def edge_arrays(self):
        """(edge_i, edge_j, edge_val) as read-only arrays."""
        return self._edge_i, self._edge_j, self._edge_val

    @cached_property
    def adjacency(self):
        """CSR neighbour structure (indptr, indices, values), both directions.

        values[k] is the coupling on the edge to indices[k]; used by sweep
        kernels and cluster growth.
        """
        n = self._n
        deg = np.zeros(n, dtype=np.int64)
        np.add.at(deg, self._edge_i, 1)
        np.add.at(deg, self._edge_j, 1)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        indices = np.zeros(indptr[-1], dtype=np.int32)
        values = np.zeros(indptr[-1], dtype=np.float64)
        cursor = indptr[:-1].copy()
        for i, j, v in zip(self._edge_i, self._edge_j, self._edge_val):
            indices[cursor[i]], values[cursor[i]] = j, v
            cursor[i] += 1
            indices[cursor[j]], values[cursor[j]] = i, v
            cursor[j] += 1
        for a in (indptr, indices, values):
            a.flags.writeable = False
        return indptr, indices, values

    @property
    def zero_field(self) -> bool:
        return not self._h.any()

    @cached_property
    def problem_id(self) -> str:
        """Stable identifier: metadata['id'] if set, else a content hash."""
        if "id" in self.metadata:
            return str(self.metadata["id"])
        digest = hashlib.sha256()
        digest.update(np.int64(self._n).tobytes())
        digest.update(self._h.tobytes())
        digest.update(self._edge_i.tobytes())
        digest.update(self._edge_j.tobytes())
        digest.update(self._edge_val.tobytes())
        return digest.hexdigest()[:12]

    def __repr__(self):
        return (
            f"IsingProblem(num_spins={self._n}, couplings={self.num_couplings}, "
            f"id={self.problem_id!r})"
        )


@dataclass(frozen=True)
class Sample:
    """One solver emission: configuration, its energy, and the clock stamp."""

    config: SpinConfiguration
    energy: float
    time_ns: int
    run_index: int = 0

    def __post_init__(self):
        if self.time_ns < 0:
            raise ValidationError("time_ns must be non-negative")


@dataclass(frozen=True)
class SampleSet:
    """Ordered samples from one solver run.

    Order of appearance is preserved; it defines the default labelling used
    by the diversity scan.
    """

    samples: tuple
    problem_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, idx):
        return self.samples[idx]

    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.samples], dtype=np.float64)


def _check_length(problem: IsingProblem, config: SpinConfiguration):
    if config.num_spins != problem.num_spins:
        raise DimensionError(
            f"configuration has {config.num_spins} spins, problem has {problem.num_spins}"
        )


def energy(problem: IsingProblem, config: SpinConfiguration) -> float:
    """E(s) = sum h_i s_i + sum J_ij s_i s_j, evaluated exactly."""
    _check_length(problem, config)
    s = config.spins.astype(np.float64)
    ei, ej, ev = problem.edge_arrays
    return float(problem.linear @ s + np.dot(ev, s[ei] * s[ej]))


def energies_batch(problem: IsingProblem, configs) -> np.ndarray:
    """Energies of many configurations at once; elementwise equal to energy()."""
    configs = list(configs)
    if not configs:
        return np.zeros(0)
    for c in configs:
        _check_length(problem, c)
    s = np.stack([c.spins for c in configs]).astype(np.float64)
    ei, ej, ev = problem.edge_arrays
    return s @ problem.linear + (s[:, ei] * s[:, ej]) @ ev


def gauge_transform(problem: IsingProblem, gauge: Gauge) -> IsingProblem:
    """New problem with h_i -> a_i h_i and J_ij -> a_i a_j J_ij; graph unchanged."""
    if len(gauge) != problem.num_spins:
        raise DimensionError("gauge length must equal num_spins")
    a = gauge.signs.astype(np.float64)
    ei, ej, ev = problem.edge_arrays
    new_couplings = zip(ei.tolist(), ej.tolist(), (a[ei] * a[ej] * ev).tolist())
    return IsingProblem(
        problem.num_spins, problem.linear * a, new_couplings, problem.metadata
    )


def apply_gauge(config: SpinConfiguration, gauge: Gauge) -> SpinConfiguration:
    """Flip spin i wherever alpha_i = -1."""
    if len(gauge) != config.num_spins:
        raise DimensionError("gauge length must equal configuration length")
    flip = _pack_bits((gauge.signs == -1).astype(np.uint8))
    flipped = int.from_bytes(config.packed, "little") ^ int.from_bytes(flip, "little")
    return SpinConfiguration(config.num_spins, flipped.to_bytes(len(config.packed), "little"))


def negated(problem: IsingProblem) -> IsingProblem:
    """Problem with all signs flipped; its minima are the original's maxima."""
    ei, ej, ev = problem.edge_arrays
    return IsingProblem(
        problem.num_spins,
        -problem.linear,
        zip(ei.tolist(), ej.tolist(), (-ev).tolist()),
        problem.metadata,
    )


def max_energy_bipartite(problem: IsingProblem, coloring, e_min: float) -> float:
    """Return E_max = -e_min, valid for zero-field problems on bipartite graphs.

    Flipping one colour class negates every coupling term, so the spectrum
    is symmetric about zero and the maximum is minus the minimum. The
    coloring must be a proper two-coloring of the coupling graph.
    """
    if not problem.zero_field:
        raise ValidationError("spectrum symmetry requires all h_i = 0")
    col = np.asarray(coloring)
    if col.shape != (problem.num_spins,):
        raise DimensionError("coloring length must equal num_spins")
    if not np.all((col == 0) | (col == 1)):
        raise ValidationError("coloring must be two colours, 0 and 1")
    ei, ej, _ = problem.edge_arrays
    if np.any(col[ei] == col[ej]):
        raise ValidationError("coloring is not proper: a coupling joins equal colours")
    return -e_min


ENUMERATION_GUARD = 20


def enumerate_energies(problem: IsingProblem) -> np.ndarray:
    """Energies of all 2^N states, indexed by the packed-bit integer.

    Exact oracle for small problems; guarded at N <= 20.
    """
    n = problem.num_spins
    if n > ENUMERATION_GUARD:
        raise SizeGuardError(f"enumeration guarded at N <= {ENUMERATION_GUARD}, got {n}")
    idx = np.arange(1 << n, dtype=np.uint32)
    energies = np.zeros(1 << n)
    for i in np.nonzero(problem.linear)[0]:
        energies += problem.linear[i] * (1.0 - 2.0 * ((idx >> int(i)) & 1))
    ei, ej, ev = problem.edge_arrays
    for i, j, v in zip(ei, ej, ev):
        energies += v * (1.0 - 2.0 * (((idx >> int(i)) ^ (idx >> int(j))) & 1))
    return energies


def exhaustive_minimum(problem: IsingProblem):
    """(e_min, argmin configuration) by full enumeration. Guarded at N <= 20."""
    energies = enumerate_energies(problem)
    best = int(np.argmin(energies))
    return float(energies[best]), SpinConfiguration.from_int(problem.num_spins, best)
