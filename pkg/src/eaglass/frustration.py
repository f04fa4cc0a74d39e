"""Unsatisfied-edge subgraphs of the dual lattice and their clusters.

An edge {x, y} is unsatisfied under (w, sigma) iff w_e * s_x * s_y < 0;
a zero product counts as satisfied.  The unsatisfied set is carried on
the dual lattice (one dual edge per primal edge), where frustration
theory lives: a plaquette is frustrated iff the product of its four
edge weights is negative, which happens iff an odd number of the four
dual edges at that dual vertex are unsatisfied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .disorder import Couplings
from .errors import ContractViolationError
from .lattice import TorusGeometry


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def connected(self, a, b):
        return self.find(a) == self.find(b)


@dataclass
class DualSubgraph:
    """A set of dual edges on a torus, stored as a membership bitmap.

    Component labels and sizes are computed on demand and cached; any
    mutation of `member` must go through `replace_members` so the cache
    stays consistent.
    """

    geometry: TorusGeometry
    member: np.ndarray
    _components: "ComponentStats | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.member.shape != (self.geometry.n_dual_edges,):
            raise ValueError("membership bitmap does not match geometry dual-edge count")
        if self.member.dtype != np.bool_:
            self.member = self.member.astype(np.bool_)

    def edge_ids(self) -> np.ndarray:
        return np.flatnonzero(self.member)

    @property
    def n_edges(self) -> int:
        return int(self.member.sum())

    def contains(self, de: int) -> bool:
        return bool(self.member[de])

    def replace_members(self, member: np.ndarray) -> "DualSubgraph":
        return DualSubgraph(self.geometry, member.copy())

    def components(self) -> "ComponentStats":
        if self._components is None:
            self._components = components(self)
        return self._components

    def adjacency(self) -> dict[int, list[tuple[int, int]]]:
        """dual vertex -> [(neighbor dual vertex, via dual edge id)]."""
        adj: dict[int, list[tuple[int, int]]] = {}
        for de in self.edge_ids():
            a, b = self.geometry.dual_edge_endpoints(int(de))
            adj.setdefault(a, []).append((b, int(de)))
            adj.setdefault(b, []).append((a, int(de)))
        return adj


def empty_subgraph(geom: TorusGeometry) -> DualSubgraph:
    return DualSubgraph(geom, np.zeros(geom.n_dual_edges, dtype=np.bool_))


def unsatisfied_edge_bits(w: Couplings, spins: np.ndarray) -> np.ndarray:
    """Boolean array over primal edge ids: w_e * s_x * s_y < 0 (strict)."""
    geom = w.geometry
    spins = np.asarray(spins)
    if spins.shape != (geom.n_vertices,):
        raise ContractViolationError(
            f"spin vector of length {spins.size} does not fit geometry "
            f"with {geom.n_vertices} vertices"
        )
    U, V = geom.edge_endpoint_arrays
    prod = w.weights * spins[U] * spins[V]
    return prod < 0.0


def unsatisfied_set(w: Couplings, spins: np.ndarray) -> DualSubgraph:
    """The unsatisfied edges of (w, spins), mapped to their dual edges."""
    geom = w.geometry
    if not isinstance(geom, TorusGeometry):
        raise ValueError("unsatisfied_set expects couplings on a torus")
    bits = unsatisfied_edge_bits(w, spins)
    member = np.zeros(geom.n_dual_edges, dtype=np.bool_)
    member[geom.dual_edge_of[bits]] = True
    return DualSubgraph(geom, member)


def plaquette_frustrated(w: Couplings, p: int) -> bool:
    """True iff the product of the four boundary edge weights is negative."""
    edges = w.geometry.plaquette_edges(p)
    return bool(np.prod(w.weights[edges]) < 0.0)


def frustrated_plaquettes(w: Couplings) -> np.ndarray:
    """Boolean array over plaquette ids (vectorized plaquette_frustrated)."""
    table = w.geometry.plaquette_edge_table
    signs = np.signbit(w.weights)[table]
    return signs.sum(axis=1) % 2 == 1


@dataclass
class ComponentStats:
    """Connected components of a dual subgraph.

    Only dual vertices incident to at least one member edge are
    labeled; `label_of` maps those to component ids 0..n_components-1.
    """

    n_components: int
    label_of: dict[int, int]
    vertex_sizes: list[int]
    edge_sizes: list[int]

    def histogram(self, by: str = "vertices") -> dict[int, int]:
        sizes = self.vertex_sizes if by == "vertices" else self.edge_sizes
        hist: dict[int, int] = {}
        for s in sizes:
            hist[s] = hist.get(s, 0) + 1
        return dict(sorted(hist.items()))

    @property
    def largest_vertices(self) -> int:
        return max(self.vertex_sizes, default=0)

    @property
    def largest_edges(self) -> int:
        return max(self.edge_sizes, default=0)


def components(g: DualSubgraph) -> ComponentStats:
    """Union-find clustering of the member edges of g."""
    edges = g.edge_ids()
    geom = g.geometry
    uf = UnionFind(geom.n_plaquettes)
    touched = set()
    for de in edges:
        a, b = geom.dual_edge_endpoints(int(de))
        uf.union(a, b)
        touched.add(a)
        touched.add(b)
    roots: dict[int, int] = {}
    label_of: dict[int, int] = {}
    vertex_sizes: list[int] = []
    for v in sorted(touched):
        r = uf.find(v)
        if r not in roots:
            roots[r] = len(roots)
            vertex_sizes.append(0)
        label_of[v] = roots[r]
        vertex_sizes[roots[r]] += 1
    edge_sizes = [0] * len(roots)
    for de in edges:
        a, _ = geom.dual_edge_endpoints(int(de))
        edge_sizes[label_of[a]] += 1
    return ComponentStats(
        n_components=len(roots),
        label_of=label_of,
        vertex_sizes=vertex_sizes,
        edge_sizes=edge_sizes,
    )


def write_component_histogram(path, stats: ComponentStats, by: str = "vertices") -> None:
    """CSV histogram: columns (size, count)."""
    hist = stats.histogram(by=by)
    with open(path, "w") as fh:
        fh.write("# format eaglass-cluster-histogram v1\n")
        fh.write("size,count\n")
        for size, count in hist.items():
            fh.write(f"{size},{count}\n")
