"""Windowed forest analysis: bridges, regions, colorings, and batched flips.

A window is an N x N block of dual vertices on a host torus.  Restricting
a dual forest to the window and pruning every dangling branch leaves the
*bridges*: the union of simple paths whose endpoints both sit on the
window's boundary ring.  Each bridge path cuts the block of primal
vertices enclosed by the window into pieces; the pieces (plus the
implicit exterior) form a planar region graph, which is colored with at
most five colors.  Flipping the best color class then lowers the energy
whenever the bridge weight dominates the boundary weight, because every
bridge edge is counted twice in the summed class deltas while boundary
edges are counted once.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .disorder import Couplings
from .errors import ConfigurationError, ContractViolationError
from .frustration import DualSubgraph, UnionFind
from .gibbs import SpinConfig, flip_region_delta
from .lattice import TorusGeometry

EXTERIOR = -1

MAX_COLORS = 5


@dataclass(frozen=True)
class Window:
    """N x N block of dual vertices anchored at plaquette (ax, ay).

    The anchor may sit anywhere on the torus (coordinates wrap), but the
    window itself must not: side <= host.side - 2 keeps the block, its
    enclosed primal vertices and their exterior neighbours all distinct,
    so the planar picture inside the window is faithful.
    """

    host: TorusGeometry
    side: int
    anchor: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.side < 2:
            raise ConfigurationError(f"window side must be >= 2, got {self.side}")
        if self.side > self.host.side - 2:
            raise ConfigurationError(
                f"window side {self.side} too large for host side {self.host.side}"
            )
        ax, ay = self.anchor
        if not (0 <= ax < self.host.side and 0 <= ay < self.host.side):
            raise ConfigurationError(f"anchor {self.anchor} outside host torus")

    def dual_vertex(self, i: int, j: int) -> int:
        """Host plaquette id of the window-local dual vertex (i, j)."""
        if not (0 <= i < self.side and 0 <= j < self.side):
            raise IndexError(f"({i}, {j}) outside {self.side} x {self.side} window")
        ax, ay = self.anchor
        return self.host.vertex_id(ax + i, ay + j)

    def dual_vertices(self) -> list[int]:
        return [self.dual_vertex(i, j)
                for j in range(self.side) for i in range(self.side)]

    def boundary_dual_vertices(self) -> set[int]:
        """The outermost ring of the dual block."""
        n = self.side
        out = set()
        for i in range(n):
            for j in range(n):
                if i in (0, n - 1) or j in (0, n - 1):
                    out.add(self.dual_vertex(i, j))
        return out

    def dual_edges_inside(self) -> list[int]:
        """Dual edges with both endpoints in the window, sorted."""
        inside = set(self.dual_vertices())
        out = set()
        for p in inside:
            for de in self.host.dual_incident_edges(p):
                a, b = self.host.dual_edge_endpoints(de)
                if a in inside and b in inside:
                    out.add(de)
        return sorted(out)

    def interior_vertices(self) -> list[int]:
        """Primal vertices strictly inside the dual hull: (side-1)^2 of them."""
        ax, ay = self.anchor
        return sorted(
            self.host.vertex_id(ax + 1 + u, ay + 1 + v)
            for v in range(self.side - 1) for u in range(self.side - 1)
        )

    def boundary_cut_edges(self) -> list[int]:
        """Primal edges with exactly one endpoint in the interior block.

        This is the full edge boundary of the enclosed vertex set,
        4 * (side - 1) edges for a square block.
        """
        inside = set(self.interior_vertices())
        out = []
        for v in inside:
            for e, u in zip(self.host.incident_edges(v), self.host.neighbors(v)):
                if u not in inside:
                    out.append(e)
        return sorted(out)


def _window_restriction(f: DualSubgraph, window: Window) -> dict[int, dict[int, int]]:
    """Adjacency {dual vertex: {neighbour: dual edge}} of f inside the window.

    Rejects subgraphs whose window restriction contains a cycle; the
    pruning and region logic below rely on the forest property.
    """
    inside = set(window.dual_vertices())
    adj: dict[int, dict[int, int]] = {}
    uf = UnionFind(window.side * window.side)
    local = {p: k for k, p in enumerate(window.dual_vertices())}
    for de in f.edge_ids():
        de = int(de)
        a, b = f.geometry.dual_edge_endpoints(de)
        if a in inside and b in inside:
            if uf.connected(local[a], local[b]):
                raise ContractViolationError(
                    f"window restriction is not a forest (cycle at dual edge {de})"
                )
            uf.union(local[a], local[b])
            adj.setdefault(a, {})[b] = de
            adj.setdefault(b, {})[a] = de
    return adj


def find_bridges(f: DualSubgraph, window: Window) -> DualSubgraph:
    """Prune f inside the window down to its boundary-to-boundary paths.

    Leaves not on the window's boundary ring are removed iteratively.
    In a forest this keeps exactly the edges that lie on a simple path
    between two boundary dual vertices.
    """
    adj = _window_restriction(f, window)
    boundary = window.boundary_dual_vertices()
    queue = deque(v for v, nb in adj.items() if len(nb) == 1 and v not in boundary)
    while queue:
        v = queue.popleft()
        if v not in adj or len(adj[v]) != 1:
            continue
        (u,) = adj[v]
        del adj[v]
        del adj[u][v]
        if not adj[u]:
            del adj[u]
        elif len(adj[u]) == 1 and u not in boundary:
            queue.append(u)
    member = np.zeros(f.geometry.n_edges, dtype=bool)
    for v, nb in adj.items():
        for de in nb.values():
            member[de] = True
    return DualSubgraph(f.geometry, member)


# -- regions and coloring -----------------------------------------------------


@dataclass
class RegionDecomposition:
    """Pieces of the window's interior vertex block cut out by the bridges.

    region_of maps every enclosed primal vertex to its region index;
    adjacency is the region graph (two regions are adjacent when a
    bridge edge separates them), with the exterior tracked separately.
    """

    window: Window
    bridges: DualSubgraph
    region_of: dict[int, int]
    regions: list[list[int]]
    adjacency: list[set[int]]
    exterior_regions: set[int]
    n_nonseparating: int

    @property
    def n_regions(self) -> int:
        return len(self.regions)


def decompose_regions(bridges: DualSubgraph, window: Window) -> RegionDecomposition:
    """Split the enclosed primal block along the bridge edges."""
    host = window.host
    interior = window.interior_vertices()
    inside = {v: k for k, v in enumerate(interior)}
    blocked = {host.primal_edge(int(de)) for de in bridges.edge_ids()}
    uf = UnionFind(len(interior))
    for v in interior:
        for e, u in zip(host.incident_edges(v), host.neighbors(v)):
            if u in inside and e not in blocked:
                uf.union(inside[v], inside[u])
    by_root: dict[int, list[int]] = {}
    for v in interior:
        by_root.setdefault(uf.find(inside[v]), []).append(v)
    regions = sorted(by_root.values())
    region_of = {v: r for r, verts in enumerate(regions) for v in verts}
    adjacency: list[set[int]] = [set() for _ in regions]
    exterior_regions: set[int] = set()
    n_nonseparating = 0
    for de in bridges.edge_ids():
        e = host.primal_edge(int(de))
        a, b = host.edge_endpoints(e)
        ra = region_of.get(a, EXTERIOR)
        rb = region_of.get(b, EXTERIOR)
        if ra == rb:
            n_nonseparating += 1
        elif ra == EXTERIOR:
            exterior_regions.add(rb)
        elif rb == EXTERIOR:
            exterior_regions.add(ra)
        else:
            adjacency[ra].add(rb)
            adjacency[rb].add(ra)
    return RegionDecomposition(window, bridges, region_of, regions,
                               adjacency, exterior_regions, n_nonseparating)


def _two_color(adjacency: list[set[int]]) -> list[int] | None:
    n = len(adjacency)
    color = [-1] * n
    for s in range(n):
        if color[s] >= 0:
            continue
        color[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for u in adjacency[v]:
                if color[u] < 0:
                    color[u] = 1 - color[v]
                    queue.append(u)
                elif color[u] == color[v]:
                    return None
    return color


def _five_color(adjacency: list[set[int]]) -> list[int]:
    """Proper coloring of a planar graph with at most five colors.

    Reduce: repeatedly delete a vertex of degree <= 4, or, failing that,
    take a degree-5 vertex, delete it and merge two of its non-adjacent
    neighbours.  Unwind: merged vertices share a color, so a deleted
    vertex always sees at most four colors and a fifth is free.
    """
    adj = {v: set(nb) for v, nb in enumerate(adjacency)}
    ops = []
    while adj:
        v = min(adj, key=lambda u: (len(adj[u]), u))
        if len(adj[v]) <= 4:
            ops.append(("drop", v, sorted(adj[v])))
            for u in adj[v]:
                adj[u].discard(v)
            del adj[v]
            continue
        if len(adj[v]) != 5:
            raise ContractViolationError("region graph is not planar")
        nbrs = sorted(adj[v])
        pair = next(((a, b) for i, a in enumerate(nbrs) for b in nbrs[i + 1:]
                     if b not in adj[a]), None)
        if pair is None:
            raise ContractViolationError("region graph is not planar")
        a, b = pair
        ops.append(("merge", v, nbrs, a, b))
        for u in adj[v]:
            adj[u].discard(v)
        del adj[v]
        for u in adj[b]:
            adj[u].discard(b)
            if u != a:
                adj[u].add(a)
                adj[a].add(u)
        del adj[b]
    colors = [-1] * len(adjacency)
    for op in reversed(ops):
        if op[0] == "drop":
            _, v, nbrs = op
            used = {colors[u] for u in nbrs}
            colors[v] = next(c for c in range(MAX_COLORS) if c not in used)
        else:
            _, v, nbrs, a, b = op
            colors[b] = colors[a]
            used = {colors[u] for u in nbrs}
            colors[v] = next(c for c in range(MAX_COLORS) if c not in used)
    return colors


def color_regions(dec: RegionDecomposition) -> list[int]:
    """Proper region coloring, two colors when possible, never more than five.

    Color indices are compacted to 0..k-1 in order of first use.
    """
    colors = _two_color(dec.adjacency)
    if colors is None:
        colors = _five_color(dec.adjacency)
    for v, nb in enumerate(dec.adjacency):
        for u in nb:
            if colors[u] == colors[v]:
                raise ContractViolationError("coloring is not proper")
    remap: dict[int, int] = {}
    for c in colors:
        remap.setdefault(c, len(remap))
    return [remap[c] for c in colors]


# -- class flips --------------------------------------------------------------


@dataclass
class FlipOutcome:
    """Energy deltas of flipping each color class of the region coloring.

    The identity residual checks the exact bookkeeping
        sum_c delta_c = 2 * (signed free boundary - 2 * Y_int - Y_ext)
    which holds whenever every bridge edge separates distinct pieces:
    bridges between two regions are cut by both classes, bridges against
    the exterior by one.  With every bridge unsatisfied the right side
    is at most 2 * (|w|(boundary) - 2 * Y), so the best class obeys
        min_c delta_c <= (2 / k) * (|w|(boundary) - 2 * Y)
    and is strictly negative whenever 2 * Y exceeds the boundary weight.
    """

    deltas: list[float]
    best_class: int
    best_delta: float
    y_total: float
    y_interior: float
    y_exterior: float
    boundary_abs: float
    boundary_signed_free: float
    identity_residual: float
    guaranteed_bound: float
    class_sizes: list[int] = field(default_factory=list)


def best_color_class_flip(dec: RegionDecomposition, colors: list[int],
                          w: Couplings, sigma: SpinConfig) -> FlipOutcome:
    """Evaluate flipping each color class; requires all bridges unsatisfied."""
    host = dec.window.host
    if len(colors) != dec.n_regions:
        raise ContractViolationError("one color per region expected")
    spins = sigma.spins
    y_int = 0.0
    y_ext = 0.0
    for de in dec.bridges.edge_ids():
        e = host.primal_edge(int(de))
        a, b = host.edge_endpoints(e)
        if w.weights[e] * spins[a] * spins[b] >= 0:
            raise ContractViolationError(
                f"bridge dual edge {int(de)} crosses a satisfied primal edge"
            )
        ra = dec.region_of.get(a, EXTERIOR)
        rb = dec.region_of.get(b, EXTERIOR)
        if EXTERIOR in (ra, rb):
            y_ext += abs(w.weights[e])
        else:
            y_int += abs(w.weights[e])
    n_classes = max(colors) + 1 if colors else 1
    members: list[list[int]] = [[] for _ in range(n_classes)]
    for r, verts in enumerate(dec.regions):
        members[colors[r]].extend(verts)
    deltas = [flip_region_delta(w, sigma, m) if m else 0.0 for m in members]
    cut = dec.window.boundary_cut_edges()
    cut_idx = np.asarray(cut, dtype=np.int64)
    u, v = host.edge_endpoint_arrays
    terms = w.weights[cut_idx] * spins[u[cut_idx]] * spins[v[cut_idx]]
    boundary_abs = float(np.abs(w.weights[cut_idx]).sum())
    blocked = {host.primal_edge(int(de)) for de in dec.bridges.edge_ids()}
    free = np.array([e not in blocked for e in cut])
    signed_free = float(terms[free].sum())
    y_total = y_int + y_ext
    residual = sum(deltas) - 2.0 * (signed_free - 2.0 * y_int - y_ext)
    best = min(range(n_classes), key=lambda c: (deltas[c], c))
    bound = (2.0 / n_classes) * (boundary_abs - 2.0 * y_total)
    return FlipOutcome(deltas, best, deltas[best], y_total, y_int, y_ext,
                       boundary_abs, signed_free, residual, bound,
                       [len(m) for m in members])


# -- tree shapes and encounter points ----------------------------------------


@dataclass
class TreeTypeReport:
    """Shapes of the forest components seen through a window.

    arm_counts[k] counts components touching the boundary ring with k
    pruned path endpoints (k = 1 marks contact without any through
    path).  Encounter points are dual vertices from which at least three
    disjoint branches reach the ring; a tree can only branch toward the
    boundary so few times, hence the 4N - 4 bound.
    """

    n_components: int
    n_finite: int
    arm_counts: dict[int, int]
    encounter_vertices: list[int]
    encounter_bound: int

    @property
    def n_encounter(self) -> int:
        return len(self.encounter_vertices)

    @property
    def within_bound(self) -> bool:
        return self.n_encounter <= self.encounter_bound


def count_encounter_points(f: DualSubgraph, window: Window) -> TreeTypeReport:
    adj = _window_restriction(f, window)
    boundary = window.boundary_dual_vertices()

    def side_reaches_boundary(start, avoid):
        seen = {avoid, start}
        queue = deque([start])
        while queue:
            p = queue.popleft()
            if p in boundary:
                return True
            for q in adj[p]:
                if q not in seen:
                    seen.add(q)
                    queue.append(q)
        return False

    encounters = []
    for v, nb in adj.items():
        if len(nb) < 3:
            continue
        branches = sum(side_reaches_boundary(u, v) for u in nb)
        if branches >= 3:
            encounters.append(v)

    # component shapes, classified on the pruned (bridge) subgraph
    pruned = find_bridges(f, window)
    pruned_deg: dict[int, int] = {}
    for de in pruned.edge_ids():
        a, b = f.geometry.dual_edge_endpoints(int(de))
        pruned_deg[a] = pruned_deg.get(a, 0) + 1
        pruned_deg[b] = pruned_deg.get(b, 0) + 1
    seen: set[int] = set()
    n_components = 0
    n_finite = 0
    arm_counts: dict[int, int] = {}
    for s in adj:
        if s in seen:
            continue
        n_components += 1
        comp = [s]
        seen.add(s)
        queue = deque([s])
        while queue:
            p = queue.popleft()
            for q in adj[p]:
                if q not in seen:
                    seen.add(q)
                    comp.append(q)
                    queue.append(q)
        touched = [p for p in comp if p in boundary]
        if not touched:
            n_finite += 1
            continue
        arms = sum(1 for p in touched if pruned_deg.get(p, 0) == 1)
        if arms == 0:
            arms = 1  # boundary contact but no through path
        arm_counts[arms] = arm_counts.get(arms, 0) + 1
    return TreeTypeReport(n_components, n_finite, arm_counts,
                          sorted(encounters), 4 * window.side - 4)


# -- writers ------------------------------------------------------------------


def write_region_grid(path, dec: RegionDecomposition,
                      colors: list[int] | None = None) -> None:
    """Row-major CSV of the enclosed block: local coords, vertex, region."""
    window = dec.window
    n = window.side - 1
    ax, ay = window.anchor
    with open(path, "w") as fh:
        fh.write("# format eaglass-region-grid v1\n")
        fh.write("x,y,vertex,region,color\n")
        for v in range(n):
            for u in range(n):
                vid = window.host.vertex_id(ax + 1 + u, ay + 1 + v)
                r = dec.region_of[vid]
                c = colors[r] if colors is not None else -1
                fh.write(f"{u},{v},{vid},{r},{c}\n")


def bridge_weight(bridges: DualSubgraph, w: Couplings) -> float:
    """Total absolute weight of the primal edges the bridges cross (Y)."""
    host = bridges.geometry
    return float(sum(abs(w.weights[host.primal_edge(int(de))])
                     for de in bridges.edge_ids()))


def write_bridge_stats(path, rows) -> None:
    """CSV of (window side, bridge edge count, bridge weight) rows.

    Rows accumulate across window sizes so the bridge-count growth can
    be inspected against N log N.
    """
    with open(path, "w") as fh:
        fh.write("# format eaglass-bridge-stats v1\n")
        fh.write("N,bridge_edges,bridge_weight\n")
        for n, e_n, y_n in rows:
            fh.write(f"{n},{e_n},{y_n!r}\n")
