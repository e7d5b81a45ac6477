"""Chimera graphs and the RAN1 / AC3 / DCL instance generators.

A Chimera grid is an array of K_{4,4} unit cells. Node ids follow the
row-major layout

    node = 8 * (row * cols + col) + 4 * side + index

with side 0 the left shore and side 1 the right shore of the cell.
Inter-cell couplers join same-index left qubits of vertically adjacent
cells and same-index right qubits of horizontally adjacent cells. The
graph is bipartite.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import GenerationStuckError, IsingProblem, NotBipartiteError, ValidationError
from .rng import stream

LEFT, RIGHT = 0, 1


@dataclass(frozen=True)
class EdgeGraph:
    """Minimal undirected graph: node count plus an edge list."""

    num_nodes: int
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))


@dataclass(frozen=True)
class ChimeraGraph:
    rows: int
    cols: int
    edges: tuple = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return 8 * self.rows * self.cols

    @property
    def L(self) -> int:
        """Grid size for square grids (rows == cols)."""
        if self.rows != self.cols:
            raise ValidationError("L is only defined for square Chimera grids")
        return self.rows

    def cell_of(self, node: int):
        """(row, col, side, index) of a node."""
        cell, within = divmod(node, 8)
        row, col = divmod(cell, self.cols)
        return row, col, within // 4, within % 4

    def node_id(self, row: int, col: int, side: int, index: int) -> int:
        return 8 * (row * self.cols + col) + 4 * side + index

    def is_intercell(self, i: int, j: int) -> bool:
        return i // 8 != j // 8


def chimera_grid(rows: int, cols: int) -> ChimeraGraph:
    """Chimera graph on a rows x cols array of unit cells.

    Edge order is fixed: intra-cell couplers cell by cell (row-major),
    then vertical inter-cell couplers, then horizontal ones. Generators
    rely on this order being deterministic.
    """
    if rows < 1 or cols < 1:
        raise ValidationError("grid must have at least one cell")
    edges = []

    def nid(r, c, side, k):
        return 8 * (r * cols + c) + 4 * side + k

    for r in range(rows):
        for c in range(cols):
            for a in range(4):
                for b in range(4):
                    edges.append((nid(r, c, LEFT, a), nid(r, c, RIGHT, b)))
    for r in range(rows - 1):
        for c in range(cols):
            for k in range(4):
                edges.append((nid(r, c, LEFT, k), nid(r + 1, c, LEFT, k)))
    for r in range(rows):
        for c in range(cols - 1):
            for k in range(4):
                edges.append((nid(r, c, RIGHT, k), nid(r, c + 1, RIGHT, k)))
    return ChimeraGraph(rows, cols, tuple(edges))


def chimera(L: int) -> ChimeraGraph:
    """Square Chimera graph C_L: 8*L^2 nodes, 16*L^2 + 8*L*(L-1) edges."""
    return chimera_grid(L, L)


def two_coloring(graph) -> np.ndarray:
    """Proper two-coloring of any graph with num_nodes and edges attributes.

    Breadth-first over each component; raises NotBipartiteError on the
    first odd cycle found.
    """
    n = graph.num_nodes
    adj = [[] for _ in range(n)]
    for i, j in graph.edges:
        adj[i].append(j)
        adj[j].append(i)
    colors = np.full(n, -1, dtype=np.int8)
    for start in range(n):
        if colors[start] >= 0:
            continue
        colors[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if colors[v] < 0:
                    colors[v] = 1 - colors[u]
                    queue.append(v)
                elif colors[v] == colors[u]:
                    raise NotBipartiteError(f"odd cycle through edge ({u}, {v})")
    return colors


def _grid_label(graph) -> dict:
    if isinstance(graph, ChimeraGraph) and graph.rows == graph.cols:
        return {"L": graph.rows}
    if isinstance(graph, ChimeraGraph):
        return {"rows": graph.rows, "cols": graph.cols}
    return {}


def _instance_id(tag: str, graph, seed: int) -> str:
    if isinstance(graph, ChimeraGraph):
        size = f"L{graph.rows}" if graph.rows == graph.cols else f"{graph.rows}x{graph.cols}"
        return f"{tag}_{size}_s{seed}"
    return f"{tag}_n{graph.num_nodes}_s{seed}"


def _ran1_signs(num_edges: int, seed: int) -> np.ndarray:
    # Shared by RAN1 and AC3 so both classes agree sign-by-sign at a seed.
    draws = stream(seed, "ran1").integers(0, 2, size=num_edges)
    return (1 - 2 * draws).astype(np.float64)


def gen_ran1(graph, seed: int) -> IsingProblem:
    """Bimodal spin glass: zero field, each coupling +-1 with equal probability."""
    signs = _ran1_signs(len(graph.edges), seed)
    couplings = [(i, j, signs[k]) for k, (i, j) in enumerate(graph.edges)]
    meta = {"class": "ran1", "seed": seed, **_grid_label(graph),
            "id": _instance_id("ran1", graph, seed)}
    return IsingProblem(graph.num_nodes, None, couplings, meta)


def gen_ac3(graph: ChimeraGraph, seed: int) -> IsingProblem:
    """Anti-cluster inputs: a RAN1 draw with inter-cell couplings times 3."""
    if not hasattr(graph, "is_intercell"):
        raise ValidationError("AC3 generation needs a Chimera graph with cell structure")
    signs = _ran1_signs(len(graph.edges), seed)
    couplings = [
        (i, j, signs[k] * (3.0 if graph.is_intercell(i, j) else 1.0))
        for k, (i, j) in enumerate(graph.edges)
    ]
    meta = {"class": "ac3", "seed": seed, **_grid_label(graph),
            "id": _instance_id("ac3", graph, seed)}
    return IsingProblem(graph.num_nodes, None, couplings, meta)


@dataclass(frozen=True)
class DCLParams:
    """Deceptive-cluster-loop parameters: loop ratio, ruggedness cap, intra scale."""

    alpha_dcl: float = 0.25
    r_dcl: int = 1
    lam: float = 7.0

    def __post_init__(self):
        if self.alpha_dcl <= 0:
            raise ValidationError("alpha_dcl must be positive")
        if self.r_dcl < 1:
            raise ValidationError("r_dcl must be >= 1")
        if self.lam < 1:
            raise ValidationError("lam must be >= 1")


MAX_LOOP_REJECTIONS = 10**6


def _draw_loop(rows, cols, rng):
    """One closed self-avoiding random walk on the cell grid, or None if stuck.

    Returns the loop as a list of logical edges (cell, cell) with cells as
    (row, col) tuples; minimum cycle length is 4.
    """
    start = (int(rng.integers(rows)), int(rng.integers(cols)))
    path = [start]
    visited = {start}
    while True:
        r, c = path[-1]
        neighbors = [
            (r + dr, c + dc)
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
            if 0 <= r + dr < rows and 0 <= c + dc < cols
        ]
        candidates = [n for n in neighbors if n not in visited]
        if len(path) >= 4 and start in neighbors:
            candidates.append(start)
        if not candidates:
            return None
        step = candidates[int(rng.integers(len(candidates)))]
        if step == start:
            cells = path
            return [
                tuple(sorted((cells[k], cells[(k + 1) % len(cells)])))
                for k in range(len(cells))
            ]
        path.append(step)
        visited.add(step)


def gen_dcl(graph: ChimeraGraph, seed: int, params: DCLParams = DCLParams(),
            max_rejections: int = MAX_LOOP_REJECTIONS) -> IsingProblem:
    """Deceptive cluster loops on the logical cell grid, expanded onto Chimera.

    round(alpha_dcl * cells) frustrated loops are accumulated on the
    logical 4-neighbour cell lattice: each loop carries -1 on its edges
    except one random +1. Loops that would push any accumulated logical
    |J| above r_dcl are rejected and redrawn. The logical instance is
    expanded with every intra-cell coupling set to -lam and each logical
    coupling copied onto the four physical inter-cell edges it covers.
    """
    if not isinstance(graph, ChimeraGraph):
        raise ValidationError("DCL generation needs a Chimera graph")
    rng = stream(seed, "dcl")
    rows, cols = graph.rows, graph.cols
    num_loops = int(round(params.alpha_dcl * rows * cols))

    logical = {}
    placed = 0
    failures = 0
    while placed < num_loops:
        loop = _draw_loop(rows, cols, rng)
        if loop is not None:
            frustrated = int(rng.integers(len(loop)))
            signs = [1.0 if k == frustrated else -1.0 for k in range(len(loop))]
            if all(abs(logical.get(e, 0.0) + s) <= params.r_dcl for e, s in zip(loop, signs)):
                for e, s in zip(loop, signs):
                    logical[e] = logical.get(e, 0.0) + s
                placed += 1
                failures = 0
                continue
        failures += 1
        if failures >= max_rejections:
            raise GenerationStuckError(
                f"{failures} consecutive loop rejections at loop {placed + 1}/{num_loops}"
            )

    couplings = []
    for (r, c) in ((r, c) for r in range(rows) for c in range(cols)):
        for a in range(4):
            for b in range(4):
                couplings.append(
                    (graph.node_id(r, c, LEFT, a), graph.node_id(r, c, RIGHT, b), -params.lam)
                )
    for (cell_a, cell_b), value in sorted(logical.items()):
        if value == 0.0:
            continue
        (ra, ca), (rb, cb) = cell_a, cell_b
        side = LEFT if ca == cb else RIGHT  # vertical pairs share left qubits
        for k in range(4):
            i = graph.node_id(ra, ca, side, k)
            j = graph.node_id(rb, cb, side, k)
            couplings.append((min(i, j), max(i, j), float(value)))

    meta = {"class": "dcl", "seed": seed, **_grid_label(graph),
            "params": {"alpha_dcl": params.alpha_dcl, "r_dcl": params.r_dcl, "lam": params.lam},
            "id": _instance_id("dcl", graph, seed)}
    return IsingProblem(graph.num_nodes, None, couplings, meta)


GENERATORS = {"ran1": gen_ran1, "ac3": gen_ac3, "dcl": gen_dcl}


def generate(class_tag: str, graph, seed: int, dcl_params: DCLParams = DCLParams()):
    """Dispatch to one of the three input classes by tag."""
    if class_tag not in GENERATORS:
        raise ValidationError(f"unknown instance class {class_tag!r}")
    if class_tag == "dcl":
        return gen_dcl(graph, seed, dcl_params)
    return GENERATORS[class_tag](graph, seed)
