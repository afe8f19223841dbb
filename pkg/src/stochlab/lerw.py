"""Weighted-network walks, loop erasure, and nonintersection determinants.

A finite undirected network with sub-critical edge weights has a finite
total walk weight between any two vertices, computable as a linear solve.
The determinant of that walk matrix over two boundary tuples equals the
total weight of walk tuples in which each later walk avoids the
loop-erased part of every earlier one.  The brute-force oracle computes
the same truncated sum exactly by grouping walks over their loop-erasure
fibers: a walk erasing to a given self-avoiding path decomposes into the
path's steps plus excursions rooted at each path vertex that stay inside
the progressively shrinking allowed domain, so a length-budget
convolution over excursion tables reproduces the explicit enumeration
without listing walks one by one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_numerics import DomainError, NumericError, RngStream, StochlabError

__all__ = [
    "DivergenceError",
    "Walk",
    "WalkNetwork",
    "parse_network",
    "network_to_text",
    "loop_erase",
    "walk_matrix",
    "neumann_partial",
    "fomin_determinant",
    "erasure_class_weight",
    "brute_force_fomin",
    "hitting_weights",
    "sample_lerw",
    "example_networks",
]


class DivergenceError(StochlabError):
    """The step matrix keeps too much mass for walk sums to converge."""


@dataclass(frozen=True)
class Walk:
    """Vertex sequence; adjacency is checked against a network on use."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if len(self.vertices) < 1:
            raise DomainError("a walk has at least one vertex")

    @property
    def first(self):
        return self.vertices[0]

    @property
    def last(self):
        return self.vertices[-1]

    def __len__(self):
        return len(self.vertices) - 1


@dataclass(frozen=True)
class WalkNetwork:
    """Undirected edge-weighted graph with two marked boundary tuples.

    The step matrix must keep total walk weight finite: max row sum < 1
    is accepted outright; otherwise the spectral radius is computed and
    must be < 1.
    """

    vertices: tuple
    edges: tuple
    boundary_a: tuple
    boundary_b: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "boundary_a", tuple(self.boundary_a))
        object.__setattr__(self, "boundary_b", tuple(self.boundary_b))
        if len(set(self.vertices)) != len(self.vertices) or not self.vertices:
            raise DomainError("vertices must be distinct and nonempty")
        index = {v: i for i, v in enumerate(self.vertices)}
        n = len(self.vertices)
        q = np.zeros((n, n))
        seen = set()
        for e in self.edges:
            if len(e) != 3:
                raise DomainError("edges are (u, v, weight) triples")
            u, v, w = e
            if u not in index or v not in index or u == v:
                raise DomainError(f"bad edge endpoints {u!r}, {v!r}")
            if not float(w) > 0.0:
                raise DomainError("edge weights must be positive")
            key = frozenset((u, v))
            if key in seen:
                raise DomainError(f"duplicate edge {u!r}-{v!r}")
            seen.add(key)
            q[index[u], index[v]] = q[index[v], index[u]] = float(w)
        for side in (self.boundary_a, self.boundary_b):
            if len(set(side)) != len(side) or not side:
                raise DomainError("boundary tuples must be nonempty and duplicate-free")
            for v in side:
                if v not in index:
                    raise DomainError(f"boundary vertex {v!r} not in the network")
        if len(self.boundary_a) != len(self.boundary_b):
            raise DomainError("boundary tuples must have equal length")
        if set(self.boundary_a) & set(self.boundary_b):
            raise DomainError("boundary tuples must be disjoint")
        row_bound = float(q.sum(axis=1).max())
        if row_bound >= 1.0:
            radius = float(np.max(np.abs(np.linalg.eigvals(q))))
            if radius >= 1.0:
                raise DivergenceError(
                    f"walk sums diverge: max row sum {row_bound:.6f}, "
                    f"spectral radius {radius:.6f} >= 1")
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_q", q)
        object.__setattr__(self, "_row_bound", row_bound)

    @property
    def n_pairs(self) -> int:
        return len(self.boundary_a)

    @property
    def row_sum_bound(self) -> float:
        return self._row_bound

    def vertex_index(self, v) -> int:
        if v not in self._index:
            raise DomainError(f"unknown vertex {v!r}")
        return self._index[v]

    def step_matrix(self) -> np.ndarray:
        return self._q.copy()

    def edge_weight(self, u, v) -> float:
        w = self._q[self.vertex_index(u), self.vertex_index(v)]
        if w == 0.0:
            raise DomainError(f"no edge {u!r}-{v!r}")
        return float(w)

    def walk_weight(self, walk: Walk) -> float:
        out = 1.0
        for u, v in zip(walk.vertices, walk.vertices[1:]):
            out *= self.edge_weight(u, v)
        return out


def parse_network(text: str) -> WalkNetwork:
    """Edge list "u v weight" plus "A: ..." and "B: ..." boundary lines;
    '#' starts a comment."""
    edges = []
    names = []
    seen_names = set()
    boundary = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith(("A:", "B:")):
            side = line[0]
            if side in boundary:
                raise DomainError(f"duplicate boundary line {side}:")
            boundary[side] = tuple(line[2:].split())
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DomainError(f"bad network line: {raw!r}")
        u, v, w = parts[0], parts[1], float(parts[2])
        for name in (u, v):
            if name not in seen_names:
                seen_names.add(name)
                names.append(name)
        edges.append((u, v, w))
    if "A" not in boundary or "B" not in boundary:
        raise DomainError("need both 'A:' and 'B:' boundary lines")
    for side in boundary.values():
        for v in side:
            if v not in seen_names:
                seen_names.add(v)
                names.append(v)
    return WalkNetwork(tuple(names), tuple(edges), boundary["A"], boundary["B"])


def network_to_text(net: WalkNetwork) -> str:
    lines = [f"{u} {v} {w:.17g}" for u, v, w in net.edges]
    lines.append("A: " + " ".join(str(v) for v in net.boundary_a))
    lines.append("B: " + " ".join(str(v) for v in net.boundary_b))
    return "\n".join(lines) + "\n"


def loop_erase(walk: Walk) -> Walk:
    """Chronological erasure: hitting an already-kept vertex cuts the
    kept path back to it, which removes loops first-come-first-served."""
    kept = []
    for v in walk.vertices:
        if v in kept:
            del kept[kept.index(v) + 1:]
        else:
            kept.append(v)
    return Walk(tuple(kept))


def _green(q: np.ndarray) -> np.ndarray:
    n = q.shape[0]
    try:
        return np.linalg.solve(np.eye(n) - q, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise NumericError("walk-sum solve failed") from exc


def walk_matrix(net: WalkNetwork) -> np.ndarray:
    """Total walk weight from each first-tuple vertex to each second-tuple
    vertex, as rows x columns of the resolvent."""
    g = _green(net.step_matrix())
    rows = [net.vertex_index(a) for a in net.boundary_a]
    cols = [net.vertex_index(b) for b in net.boundary_b]
    return g[np.ix_(rows, cols)]


def _tail_factor(net: WalkNetwork, l_max: int, walks: int) -> float:
    q = net.row_sum_bound
    if q == 0.0:
        return 0.0
    if q >= 1.0:
        raise NumericError(
            "no elementary tail bound: max row sum is not below one")
    return walks * q ** (l_max + 1) / (1.0 - q) * (1.0 / (1.0 - q)) ** (walks - 1)


def neumann_partial(net: WalkNetwork, l_max: int) -> dict:
    """Length-truncated walk sums with the geometric tail bound."""
    if l_max < 0:
        raise DomainError("l_max must be nonnegative")
    q = net.step_matrix()
    acc = np.eye(q.shape[0])
    power = np.eye(q.shape[0])
    for _ in range(l_max):
        power = power @ q
        acc += power
    rows = [net.vertex_index(a) for a in net.boundary_a]
    cols = [net.vertex_index(b) for b in net.boundary_b]
    return {
        "matrix": acc[np.ix_(rows, cols)],
        "tail_bound": _tail_factor(net, l_max, 1),
        "l_max": l_max,
    }


def fomin_determinant(net: WalkNetwork) -> float:
    """Determinant of the boundary walk matrix.  Its interpretation as a
    nonintersecting-tuple weight needs the boundary tuples interleaved
    along the planar boundary so that crossing pairs of walks must meet;
    that placement is the caller's responsibility."""
    return float(np.linalg.det(walk_matrix(net)))


def _truncated_pair_sum(q: np.ndarray, a: int, b: int, l_max: int) -> float:
    # sum over walks a -> b of length <= l_max
    vec = np.zeros(q.shape[0])
    vec[a] = 1.0
    acc = vec[b]
    for _ in range(l_max):
        vec = vec @ q
        acc += vec[b]
    return float(acc)


def _loop_table(q: np.ndarray, active: np.ndarray, v: int, budget: int) -> np.ndarray:
    # weights of closed walks at v staying inside the active set, by length
    sub = q[np.ix_(active, active)]
    pos = int(np.searchsorted(np.flatnonzero(active), v))
    vec = np.zeros(sub.shape[0])
    vec[pos] = 1.0
    out = np.empty(budget + 1)
    out[0] = 1.0
    for m in range(1, budget + 1):
        vec = vec @ sub
        out[m] = vec[pos]
    return out


def _saw_paths(q: np.ndarray, active: np.ndarray, a: int, b: int):
    path = [a]
    on_path = np.zeros(q.shape[0], dtype=bool)
    on_path[a] = True

    def recurse():
        tip = path[-1]
        if tip == b:
            yield tuple(path)
            return
        for nxt in np.flatnonzero(q[tip] > 0.0):
            if active[nxt] and not on_path[nxt]:
                path.append(int(nxt))
                on_path[nxt] = True
                yield from recurse()
                path.pop()
                on_path[nxt] = False

    yield from recurse()


def _fiber_weight(q: np.ndarray, active: np.ndarray, saw, l_max: int) -> float:
    # truncated weight of walks inside the active set erasing to the saw
    steps = len(saw) - 1
    budget = l_max - steps
    if budget < 0:
        return 0.0
    step_weight = 1.0
    for u, v in zip(saw, saw[1:]):
        step_weight *= q[u, v]
    remaining = active.copy()
    conv = None
    for v in saw:
        table = _loop_table(q, remaining, v, budget)
        conv = table if conv is None else np.convolve(conv, table)[: budget + 1]
        remaining[v] = False
    return step_weight * float(np.sum(conv))


def erasure_class_weight(net: WalkNetwork, saw: Walk, l_max: int) -> float:
    """Truncated total weight of walks whose loop erasure is the given
    self-avoiding walk."""
    if l_max < 0:
        raise DomainError("l_max must be nonnegative")
    seq = [net.vertex_index(v) for v in saw.vertices]
    if len(set(seq)) != len(seq):
        raise DomainError("the reference walk must be self-avoiding")
    q = net.step_matrix()
    for u, v in zip(seq, seq[1:]):
        if q[u, v] == 0.0:
            raise DomainError("reference walk leaves the edge set")
    return _fiber_weight(q, np.ones(len(net.vertices), dtype=bool), seq, l_max)


def brute_force_fomin(net: WalkNetwork, l_max: int, tolerance: float = 1e-8) -> dict:
    """Truncated-enumeration value of the nonintersecting tuple weight.

    Sums over all tuples of walks of length <= l_max in which walk j
    avoids the loop-erased part of walk i for i < j; walks are grouped by
    loop-erasure fiber so the sum is exact without explicit listing.  The
    dropped mass is bounded by the geometric tail of the row-sum norm; if
    that bound exceeds the tolerance the record says so rather than
    failing.
    """
    if l_max < 0:
        raise DomainError("l_max must be nonnegative")
    q = net.step_matrix()
    n_pairs = net.n_pairs
    a_idx = [net.vertex_index(v) for v in net.boundary_a]
    b_idx = [net.vertex_index(v) for v in net.boundary_b]

    def tuple_sum(active: np.ndarray, k: int) -> float:
        if k == n_pairs - 1:
            sub = q.copy()
            sub[~active] = 0.0
            sub[:, ~active] = 0.0
            return _truncated_pair_sum(sub, a_idx[k], b_idx[k], l_max)
        total = 0.0
        for saw in _saw_paths(q, active, a_idx[k], b_idx[k]):
            fw = _fiber_weight(q, active, saw, l_max)
            if fw == 0.0:
                continue
            rest = active.copy()
            rest[list(saw)] = False
            total += fw * tuple_sum(rest, k + 1)
        return total

    active0 = np.ones(len(net.vertices), dtype=bool)
    for k, (a, b) in enumerate(zip(a_idx, b_idx)):
        if not active0[a] or not active0[b]:
            raise DomainError("boundary vertices overlap")
    value = tuple_sum(active0, 0)
    tail = _tail_factor(net, l_max, n_pairs)
    return {
        "value": value,
        "tail_bound": tail,
        "l_max": l_max,
        "tolerance": tolerance,
        "conclusive": bool(tail <= tolerance),
    }


def hitting_weights(net: WalkNetwork, start, absorb=None) -> dict:
    """Total weight of walks from start whose first absorbing-set visit
    is their endpoint, per absorbing vertex."""
    absorb = tuple(absorb) if absorb is not None else net.boundary_b
    if not absorb:
        raise DomainError("need a nonempty absorbing set")
    targets = [net.vertex_index(v) for v in absorb]
    s = net.vertex_index(start)
    if s in targets:
        return {v: (1.0 if v == start else 0.0) for v in absorb}
    q = net.step_matrix()
    interior = np.ones(q.shape[0], dtype=bool)
    interior[targets] = False
    inner = q[np.ix_(interior, interior)]
    cross = q[np.ix_(interior, targets)]
    pos = int(np.searchsorted(np.flatnonzero(interior), s))
    vec = np.zeros(inner.shape[0])
    vec[pos] = 1.0
    try:
        green_row = np.linalg.solve(np.eye(inner.shape[0]) - inner.T, vec)
    except np.linalg.LinAlgError as exc:
        raise NumericError("hitting solve failed") from exc
    w = green_row @ cross
    return {v: float(w[i]) for i, v in enumerate(absorb)}


def sample_lerw(
    net: WalkNetwork,
    start,
    rng: RngStream,
    *,
    absorb=None,
    max_steps: int = 100_000,
    max_attempts: int = 10_000,
) -> Walk:
    """Loop erasure of a killed random walk run until it hits the
    absorbing set; killed attempts are retried."""
    absorb = set(absorb) if absorb is not None else set(net.boundary_b)
    if not absorb:
        raise DomainError("need a nonempty absorbing set")
    for v in absorb:
        net.vertex_index(v)
    s = net.vertex_index(start)
    q = net.step_matrix()
    names = net.vertices
    neighbors = []
    cums = []
    for i in range(q.shape[0]):
        nz = np.flatnonzero(q[i] > 0.0)
        neighbors.append(nz)
        cums.append(np.concatenate([np.cumsum(q[i, nz]), [1.0]]))
    absorb_idx = {net.vertex_index(v) for v in absorb}
    for _ in range(max_attempts):
        path = [s]
        cur = s
        alive = True
        for _ in range(max_steps):
            if cur in absorb_idx:
                break
            pick = rng.choice_index(cums[cur])
            if pick == len(neighbors[cur]):
                alive = False
                break
            cur = int(neighbors[cur][pick])
            path.append(cur)
        else:
            raise NumericError("walk exceeded the step budget")
        if alive and cur in absorb_idx:
            return loop_erase(Walk(tuple(names[i] for i in path)))
    raise NumericError("all attempts were killed before absorption")


def _grid_network(rows: int, cols: int, weight: float, a_names, b_names) -> WalkNetwork:
    names = [f"v{r}{c}" for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((f"v{r}{c}", f"v{r}{c + 1}", weight))
            if r + 1 < rows:
                edges.append((f"v{r}{c}", f"v{r + 1}{c}", weight))
    return WalkNetwork(tuple(names), tuple(edges), tuple(a_names), tuple(b_names))


def example_networks() -> dict:
    """Small fixtures with boundary tuples placed by hand so that walks
    pairing a_i with a later b_j must cross walks pairing a later a with
    an earlier b (corner-to-corner diagonals of planar grids, opposite
    arcs of a cycle).  Row sums stay at or below one half so the
    brute-force tail bound is small at modest lengths."""
    grid3_pair = _grid_network(3, 3, 0.125, ("v00", "v02"), ("v20", "v22"))
    return {
        "two-vertex": WalkNetwork(("a", "b"), (("a", "b", 0.25),), ("a",), ("b",)),
        "path": WalkNetwork(
            ("a", "m", "b"), (("a", "m", 0.25), ("m", "b", 0.25)), ("a",), ("b",)),
        "grid3-single": _grid_network(3, 3, 0.125, ("v00",), ("v22",)),
        "grid3-pair": grid3_pair,
        "grid2x3-pair": _grid_network(2, 3, 0.125, ("v00", "v10"), ("v02", "v12")),
        "cycle-pair": WalkNetwork(
            ("p", "q", "r", "s"),
            (("p", "q", 0.25), ("q", "r", 0.25), ("r", "s", 0.25), ("s", "p", 0.25)),
            ("p", "q"), ("s", "r")),
        "grid3x4-pair": _grid_network(3, 4, 0.125, ("v00", "v20"), ("v03", "v23")),
    }
