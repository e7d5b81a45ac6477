"""Hamming-distance diversity: distance graphs and independence-number bounds.

Diversity of a sample set is the independence number of the graph whose
vertices are the unique fit samples and whose edges join pairs at Hamming
distance <= R*N. It is bracketed from below by a sequential
left-neighbours scan over shuffled vertex orders and from above by greedy
coloring of the complement graph; an exact branch-and-bound and an
SA-backed bound on the equivalent Ising formulation serve as small-scale
oracles.
"""

from collections import namedtuple
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import (
    DimensionError,
    DivbenchError,
    IsingProblem,
    SizeGuardError,
    SpinConfiguration,
    ValidationError,
)
from .rng import stream

# popcount of a byte, for vectorized Hamming distances
_POPCOUNT8 = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1)

MIS_BRUTEFORCE_GUARD = 30


def hamming_distance(a: SpinConfiguration, b: SpinConfiguration) -> int:
    """Number of positions where the spins differ."""
    if a.num_spins != b.num_spins:
        raise DimensionError("configurations differ in length")
    return (a.as_int() ^ b.as_int()).bit_count()


@dataclass(frozen=True)
class AdjacencyGraph:
    """Explicit undirected graph over vertices 0..m-1 (test and oracle input)."""

    num_vertices: int
    edges: tuple

    def __post_init__(self):
        edges = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j or not (0 <= i < self.num_vertices and 0 <= j < self.num_vertices):
                raise ValidationError(f"bad edge ({i}, {j})")
            edges.append((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(set(edges))))

    @cached_property
    def _matrix(self) -> np.ndarray:
        m = np.zeros((self.num_vertices, self.num_vertices), dtype=bool)
        for i, j in self.edges:
            m[i, j] = m[j, i] = True
        m.flags.writeable = False
        return m

    def is_edge(self, a: int, b: int) -> bool:
        return bool(self._matrix[a, b])

    def edge_mask_row(self, v: int) -> np.ndarray:
        return self._matrix[v]


@dataclass(frozen=True)
class DistanceGraph:
    """Unique configurations with edges where Hamming distance <= radius * N.

    Vertices keep their first-appearance order, which is the default
    labelling of the sequential scan. Adjacency is derived from distances
    on demand; the full edge list is only materialized when asked for.
    """

    vertices: tuple
    radius: float
    num_spins: int

    def __post_init__(self):
        if not 0 < self.radius <= 1:
            raise ValidationError("radius must lie in (0, 1]")
        for v in self.vertices:
            if v.num_spins != self.num_spins:
                raise DimensionError("all configurations must have num_spins spins")
        if len({v.packed for v in self.vertices}) != len(self.vertices):
            raise ValidationError("vertices must be pairwise distinct")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def threshold(self) -> float:
        return self.radius * self.num_spins

    @cached_property
    def _ints(self) -> tuple:
        return tuple(v.as_int() for v in self.vertices)

    @cached_property
    def _bytes(self) -> np.ndarray:
        if not self.vertices:
            return np.zeros((0, 0), dtype=np.uint8)
        mat = np.frombuffer(b"".join(v.packed for v in self.vertices), dtype=np.uint8)
        mat = mat.reshape(len(self.vertices), -1)
        mat.flags.writeable = False
        return mat

    def distance(self, a: int, b: int) -> int:
        return (self._ints[a] ^ self._ints[b]).bit_count()

    def distance_row(self, v: int) -> np.ndarray:
        return _POPCOUNT8[self._bytes ^ self._bytes[v]].sum(axis=1)

    def is_edge(self, a: int, b: int) -> bool:
        return a != b and self.distance(a, b) <= self.threshold

    def edge_mask_row(self, v: int) -> np.ndarray:
        mask = self.distance_row(v) <= self.threshold
        mask[v] = False
        return mask

    @cached_property
    def edges(self) -> tuple:
        out = []
        for a in range(self.num_vertices):
            row = self.edge_mask_row(a)
            out.extend((a, int(b)) for b in np.nonzero(row[a + 1:])[0] + a + 1)
        return tuple(out)


def build_distance_graph(samples, radius: float, num_spins: int) -> DistanceGraph:
    """Deduplicate configurations (first occurrence wins) and wrap them."""
    seen = set()
    unique = []
    for c in samples:
        if c.packed not in seen:
            seen.add(c.packed)
            unique.append(c)
    return DistanceGraph(tuple(unique), radius, num_spins)


LNAResult = namedtuple("LNAResult", "size vertices edge_checks")


def lna_lower_bound(graph, order) -> LNAResult:
    """Left-neighbours aggregation scan: a lower bound on the independence number.

    Scans vertices in the given order and keeps a vertex iff none of the
    previously kept vertices is its neighbour. edge_checks counts the
    pairwise adjacency queries made, which is at most m times the final
    set size.
    """
    m = graph.num_vertices
    order = [int(v) for v in order]
    if sorted(order) != list(range(m)):
        raise ValidationError("order must be a permutation of the vertices")
    members = []
    checks = 0
    for v in order:
        conflict = False
        for u in members:
            checks += 1
            if graph.is_edge(u, v):
                conflict = True
                break
        if not conflict:
            members.append(v)
    for k, a in enumerate(members):  # returned set is verified independent
        for b in members[k + 1:]:
            if graph.is_edge(a, b):
                raise DivbenchError("scan produced a dependent set")
    return LNAResult(len(members), tuple(members), checks)


def shuffle_stream(seed: int, shuffle_index: int) -> np.random.Generator:
    """Stream feeding the permutations of one shuffle replica.

    Keyed per shuffle so a replica's orders do not depend on how many
    other replicas run, which makes best-of-shuffles monotone in the
    shuffle count and lets time curves extend orders incrementally.
    """
    return stream(seed, "lna-shuffle", shuffle_index)


def lna_best_of_shuffles(graph, num_shuffles: int = 100, seed: int = 0) -> int:
    """Best scan result over the identity order plus num_shuffles - 1 random orders."""
    if num_shuffles < 1:
        raise ValidationError("num_shuffles must be >= 1")
    m = graph.num_vertices
    best = lna_lower_bound(graph, range(m)).size
    for s in range(1, num_shuffles):
        order = shuffle_stream(seed, s).permutation(m)
        best = max(best, lna_lower_bound(graph, order).size)
    return best


def greedy_coloring_upper_bound(graph) -> int:
    """Greedy colour count of the complement graph: an upper bound on diversity.

    Vertices are taken in label order and placed in the first colour class
    containing none of their complement-graph neighbours, i.e. a class
    where every member is a distance-graph neighbour.
    """
    classes = []
    for v in range(graph.num_vertices):
        mask = graph.edge_mask_row(v)
        for cls in classes:
            if mask[cls].all():
                cls.append(v)
                break
        else:
            classes.append([v])
    return len(classes)


def _neighbor_masks(graph) -> list:
    masks = []
    for v in range(graph.num_vertices):
        row = graph.edge_mask_row(v)
        masks.append(int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little"))
    return masks


def exact_mis_bruteforce(graph) -> int:
    """Exact independence number by branch and bound; guarded at 30 vertices."""
    m = graph.num_vertices
    if m > MIS_BRUTEFORCE_GUARD:
        raise SizeGuardError(f"exact MIS guarded at {MIS_BRUTEFORCE_GUARD} vertices, got {m}")
    if m == 0:
        return 0
    masks = _neighbor_masks(graph)
    best = 0

    def solve(candidates: int, size: int):
        nonlocal best
        if size > best:
            best = size
        if size + candidates.bit_count() <= best:
            return
        # pivot on the highest-degree candidate to shrink the branching
        pivot, pivot_deg = -1, -1
        c = candidates
        while c:
            v = (c & -c).bit_length() - 1
            c &= c - 1
            deg = (masks[v] & candidates).bit_count()
            if deg > pivot_deg:
                pivot, pivot_deg = v, deg
        solve(candidates & ~(masks[pivot] | (1 << pivot)), size + 1)
        if pivot_deg:
            solve(candidates & ~(1 << pivot), size)

    solve((1 << m) - 1, 0)
    return best


def mis_to_ising(graph, penalty: float = 2.0) -> IsingProblem:
    """Map maximum-independent-set to an Ising problem in +-1 spins.

    Selecting vertex v is encoded by bit 1 (spin -1). Each selected vertex
    contributes reward -1 and each selected edge pair costs penalty, so
    for penalty > 1 the ground state is a maximum independent set. The
    objective equals the Ising energy plus metadata["offset"].
    """
    if penalty <= 1:
        raise ValidationError("penalty must exceed the unit vertex reward")
    m = graph.num_vertices
    if m == 0:
        raise ValidationError("cannot map an empty graph")
    edges = [(a, b) for a in range(m) for b in np.nonzero(graph.edge_mask_row(a)[a + 1:])[0] + a + 1]
    deg = np.zeros(m)
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    h = 0.5 - (penalty / 4.0) * deg
    couplings = [(int(a), int(b), penalty / 4.0) for a, b in edges]
    offset = -m / 2.0 + penalty * len(edges) / 4.0
    return IsingProblem(m, h, couplings, {"source": "mis", "offset": offset, "penalty": penalty})


def tight_bound_via_sa(graph, penalty: float = 2.0, num_reads: int = 32,
                       num_sweeps: int = 64, seed: int = 0) -> int:
    """Heuristic (tight in practice) lower bound: anneal the MIS Ising mapping.

    Each read is decoded to a vertex selection; selections violating edges
    are repaired by dropping one endpoint per violation before counting.
    """
    from .solvers import geometric_schedule, simulated_annealing

    m = graph.num_vertices
    if m == 0:
        return 0
    problem = mis_to_ising(graph, penalty)
    schedule = geometric_schedule(0.1, 8.0, num_sweeps)
    result = simulated_annealing(problem, schedule, num_reads, seed)
    best = 0
    for sample in result:
        bits = (1 - sample.config.spins) // 2
        selected = set(np.nonzero(bits)[0].tolist())
        while True:
            violations = {}
            for v in selected:
                row = graph.edge_mask_row(int(v))
                count = sum(1 for u in selected if u != v and row[u])
                if count:
                    violations[v] = count
            if not violations:
                break
            worst = max(violations, key=lambda v: (violations[v], v))
            selected.remove(worst)
        best = max(best, len(selected))
    return best


@dataclass(frozen=True)
class DiversityEstimate:
    """Diversity bounds for one distance graph."""

    lower: int
    upper: int = None
    exact: int = None
    num_shuffles_used: int = 0

    def __post_init__(self):
        if self.exact is not None:
            if self.lower > self.exact:
                raise ValidationError("lower bound exceeds exact diversity")
            if self.upper is not None and self.exact > self.upper:
                raise ValidationError("exact diversity exceeds upper bound")

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "exact": self.exact,
            "num_shuffles_used": self.num_shuffles_used,
        }


def estimate_diversity(graph, num_shuffles: int = 100, seed: int = 0,
                       compute_upper: bool = False, compute_exact: bool = False) -> DiversityEstimate:
    """Bundle the diversity bounds requested for a graph."""
    lower = lna_best_of_shuffles(graph, num_shuffles, seed) if graph.num_vertices else 0
    upper = greedy_coloring_upper_bound(graph) if compute_upper else None
    exact = exact_mis_bruteforce(graph) if compute_exact else None
    return DiversityEstimate(lower, upper, exact, num_shuffles)
