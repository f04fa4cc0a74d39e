"""Square-lattice geometry: torus and box index spaces.

Everything downstream addresses vertices, edges, plaquettes and dual
edges through the dense integer ids defined here, so the id layout is
part of the package contract:

* vertex (x, y)            -> id  x + side * y          (row-major)
* edge (d, x, y)           -> id  2 * vertex + d        (d = 0 east, 1 north)
* plaquette (x, y)         -> id  x + side * y          (corner = lower-left vertex)
* dual vertex              == plaquette id (the dual site sits at (x+1/2, y+1/2))
* dual edge (d, x, y)      -> id  2 * dual vertex + d

Neighbor lists are always ordered east, north, west, south.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import NonContractibleCycleError

EAST, NORTH, WEST, SOUTH = 0, 1, 2, 3

# unit steps in (E, N, W, S) order
_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))


class TorusGeometry:
    """Side x side square lattice with periodic boundary in both directions.

    Immutable after construction; instances can be shared freely between
    threads and processes.
    """

    def __init__(self, side: int):
        if not isinstance(side, (int, np.integer)) or side < 2:
            raise ValueError(f"torus side must be an integer >= 2, got {side!r}")
        self.side = int(side)
        self.n_vertices = self.side * self.side
        self.n_edges = 2 * self.n_vertices
        self.n_plaquettes = self.n_vertices
        self.n_dual_edges = self.n_edges

    def __repr__(self):
        return f"TorusGeometry(side={self.side})"

    def __eq__(self, other):
        return isinstance(other, TorusGeometry) and other.side == self.side

    def __hash__(self):
        return hash(("torus", self.side))

    # -- vertices ----------------------------------------------------------

    def vertex_id(self, x: int, y: int) -> int:
        L = self.side
        return (x % L) + L * (y % L)

    def vertex_coord(self, v: int) -> tuple[int, int]:
        self._check_vertex(v)
        return v % self.side, v // self.side

    def neighbors(self, v: int) -> list[int]:
        """The four neighbors of v in (E, N, W, S) order."""
        x, y = self.vertex_coord(v)
        return [self.vertex_id(x + dx, y + dy) for dx, dy in _STEPS]

    def incident_edges(self, v: int) -> list[int]:
        """Edges at v in (E, N, W, S) order; entry k joins v to neighbors(v)[k]."""
        x, y = self.vertex_coord(v)
        return [
            self.edge_id(EAST, x, y),
            self.edge_id(NORTH, x, y),
            self.edge_id(EAST, x - 1, y),
            self.edge_id(NORTH, x, y - 1),
        ]

    # -- edges -------------------------------------------------------------

    def edge_id(self, d: int, x: int, y: int) -> int:
        if d not in (0, 1):
            raise IndexError(f"edge direction must be 0 or 1, got {d}")
        return 2 * self.vertex_id(x, y) + d

    def edge_parts(self, e: int) -> tuple[int, int, int]:
        self._check_edge(e)
        v, d = divmod(e, 2)
        return d, v % self.side, v // self.side

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        d, x, y = self.edge_parts(e)
        if d == 0:
            return self.vertex_id(x, y), self.vertex_id(x + 1, y)
        return self.vertex_id(x, y), self.vertex_id(x, y + 1)

    # -- plaquettes and the dual lattice ------------------------------------

    def plaquette_edges(self, p: int) -> list[int]:
        """The four boundary edges of plaquette p (bottom, right, top, left)."""
        self._check_plaquette(p)
        x, y = p % self.side, p // self.side
        return [
            self.edge_id(EAST, x, y),
            self.edge_id(NORTH, x + 1, y),
            self.edge_id(EAST, x, y + 1),
            self.edge_id(NORTH, x, y),
        ]

    def dual_edge(self, e: int) -> int:
        """Id of the dual edge crossing primal edge e (orientations swap)."""
        d, x, y = self.edge_parts(e)
        if d == 0:
            # horizontal edge -> vertical dual edge below/above it
            return 2 * self.vertex_id(x, y - 1) + 1
        return 2 * self.vertex_id(x - 1, y) + 0

    def primal_edge(self, de: int) -> int:
        """Inverse of dual_edge."""
        self._check_edge(de)
        p, d = divmod(de, 2)
        x, y = p % self.side, p // self.side
        if d == 1:
            return 2 * self.vertex_id(x, y + 1) + 0
        return 2 * self.vertex_id(x + 1, y) + 1

    def dual_edge_endpoints(self, de: int) -> tuple[int, int]:
        """The two dual vertices (plaquette ids) joined by dual edge de."""
        self._check_edge(de)
        p, d = divmod(de, 2)
        x, y = p % self.side, p // self.side
        if d == 0:
            return p, self.vertex_id(x + 1, y)
        return p, self.vertex_id(x, y + 1)

    def dual_neighbors(self, p: int) -> list[int]:
        self._check_plaquette(p)
        x, y = p % self.side, p // self.side
        return [self.vertex_id(x + dx, y + dy) for dx, dy in _STEPS]

    def dual_incident_edges(self, p: int) -> list[int]:
        """Dual edges at dual vertex p, (E, N, W, S) order."""
        self._check_plaquette(p)
        x, y = p % self.side, p // self.side
        return [
            2 * p + 0,
            2 * p + 1,
            2 * self.vertex_id(x - 1, y) + 0,
            2 * self.vertex_id(x, y - 1) + 1,
        ]

    # -- vectorized id tables (cached, read-only) ----------------------------

    @cached_property
    def edge_endpoint_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(U, V) with U[e], V[e] the endpoints of every edge id e."""
        L = self.side
        v = np.arange(self.n_vertices)
        x, y = v % L, v // L
        east = ((x + 1) % L) + L * y
        north = x + L * ((y + 1) % L)
        U = np.repeat(v, 2)
        V = np.empty(self.n_edges, dtype=np.int64)
        V[0::2] = east
        V[1::2] = north
        U.flags.writeable = False
        V.flags.writeable = False
        return U, V

    @cached_property
    def plaquette_edge_table(self) -> np.ndarray:
        """Shape (n_plaquettes, 4) table of boundary edge ids."""
        t = np.array([self.plaquette_edges(p) for p in range(self.n_plaquettes)])
        t.flags.writeable = False
        return t

    @cached_property
    def dual_edge_of(self) -> np.ndarray:
        """dual_edge as a lookup array over all edge ids."""
        t = np.array([self.dual_edge(e) for e in range(self.n_edges)])
        t.flags.writeable = False
        return t

    # -- dual cycles ---------------------------------------------------------

    def cycle_interior(self, cycle: "list[int] | tuple[int, ...]") -> list[int]:
        """Primal vertices enclosed by a contractible simple dual cycle.

        `cycle` is a collection of dual-edge ids forming one simple closed
        loop.  The loop is unwrapped to the plane, so it must not wind
        around the torus (NonContractibleCycleError otherwise).  Returns
        sorted vertex ids of the finite region bounded by the loop.
        """
        walk = self._dual_cycle_walk(cycle)
        lifted = _lift_walk(walk)
        inside = _even_odd_interior(lifted)
        return sorted({self.vertex_id(px, py) for px, py in inside})

    def _dual_cycle_walk(self, cycle) -> list[tuple[int, int]]:
        """Validate 2-regularity/connectivity; return the walk as (d, dual vertex) steps."""
        edges = list(cycle)
        if len(edges) != len(set(edges)) or len(edges) < 4:
            raise ValueError("dual cycle must be a set of >= 4 distinct dual edges")
        incidence: dict[int, list[int]] = {}
        for de in edges:
            a, b = self.dual_edge_endpoints(de)
            incidence.setdefault(a, []).append(de)
            incidence.setdefault(b, []).append(de)
        for p, inc in incidence.items():
            if len(inc) != 2:
                raise ValueError(f"dual vertex {p} has degree {len(inc)}, cycle must be 2-regular")
        # walk the loop from the smallest dual vertex
        start = min(incidence)
        walk = []
        prev_edge = None
        cur = start
        for _ in range(len(edges)):
            de = next(d for d in incidence[cur] if d != prev_edge)
            a, b = self.dual_edge_endpoints(de)
            nxt = b if a == cur else a
            walk.append((de, cur, nxt))
            prev_edge, cur = de, nxt
        if cur != start or len({v for _, v, _ in walk}) != len(edges):
            raise ValueError("dual edges do not form a single simple cycle")
        # express each step as a signed unit move
        steps = []
        for de, a, _b in walk:
            d = de % 2
            forward = self.dual_edge_endpoints(de)[0] == a
            if d == 0:
                steps.append((1, 0) if forward else (-1, 0))
            else:
                steps.append((0, 1) if forward else (0, -1))
        x0, y0 = start % self.side, start // self.side
        return [(x0, y0)] + steps

    def _check_vertex(self, v):
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex id {v} out of range [0, {self.n_vertices})")

    def _check_edge(self, e):
        if not 0 <= e < self.n_edges:
            raise IndexError(f"edge id {e} out of range [0, {self.n_edges})")

    def _check_plaquette(self, p):
        if not 0 <= p < self.n_plaquettes:
            raise IndexError(f"plaquette id {p} out of range [0, {self.n_plaquettes})")


def _lift_walk(walk) -> list[tuple[int, int]]:
    """Unwrap a torus walk ((x0, y0), step, step, ...) to plane coordinates."""
    (x, y), steps = walk[0], walk[1:]
    coords = [(x, y)]
    for dx, dy in steps:
        x, y = x + dx, y + dy
        coords.append((x, y))
    if coords[-1] != coords[0]:
        raise NonContractibleCycleError(
            "cycle winds around the torus; it bounds no finite region"
        )
    return coords[:-1]


def _even_odd_interior(dual_coords) -> list[tuple[int, int]]:
    """Even-odd interior of a closed dual loop given in plane coordinates.

    Dual vertex (X, Y) sits at (X + 1/2, Y + 1/2).  A primal point (px, py)
    is inside iff a ray cast in +x crosses the loop an odd number of times;
    only vertical loop segments at x = X + 1/2 >= px crossing height py
    count.
    """
    n = len(dual_coords)
    rows: dict[int, list[int]] = {}
    for i in range(n):
        x1, y1 = dual_coords[i]
        x2, y2 = dual_coords[(i + 1) % n]
        if x1 == x2 and abs(y2 - y1) == 1:
            rows.setdefault(max(y1, y2), []).append(x1)
    inside = []
    for py, xs in rows.items():
        xs.sort()
        # crossings at x >= px come in sorted order; parity flips between them
        lo = min(xs)
        for px in range(lo, max(xs) + 2):
            count = len(xs) - np.searchsorted(xs, px, side="left")
            if count % 2 == 1:
                inside.append((px, py))
    return inside


class BoxGeometry:
    """Side x side box, optionally embedded in a host torus.

    Standalone boxes have free boundary: corner vertices have two
    neighbors, edge vertices three.  An embedded box maps its vertices
    onto a window of the host torus anchored at `anchor`; the host must
    satisfy host.side >= side + 2 so that every box vertex keeps all
    four host neighbors and the box does not wrap onto itself.
    """

    def __init__(self, side: int, host: TorusGeometry | None = None,
                 anchor: tuple[int, int] = (0, 0)):
        if not isinstance(side, (int, np.integer)) or side < 1:
            raise ValueError(f"box side must be a positive integer, got {side!r}")
        self.side = int(side)
        self.n_vertices = self.side * self.side
        self.host = host
        self.anchor = (int(anchor[0]), int(anchor[1]))
        if host is not None and host.side < self.side + 2:
            raise ValueError(
                f"host torus side {host.side} too small for embedded box of side {side}"
            )

    def __repr__(self):
        if self.host is None:
            return f"BoxGeometry(side={self.side})"
        return f"BoxGeometry(side={self.side}, host={self.host!r}, anchor={self.anchor})"

    # -- local indexing ------------------------------------------------------

    def vertex_id(self, x: int, y: int) -> int:
        if not (0 <= x < self.side and 0 <= y < self.side):
            raise IndexError(f"box coordinate {(x, y)} out of range")
        return x + self.side * y

    def vertex_coord(self, v: int) -> tuple[int, int]:
        self._check_vertex(v)
        return v % self.side, v // self.side

    def neighbors(self, v: int) -> list[int]:
        """In-box neighbors in (E, N, W, S) order; missing directions skipped."""
        x, y = self.vertex_coord(v)
        out = []
        for dx, dy in _STEPS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < self.side and 0 <= ny < self.side:
                out.append(x + dx + self.side * (y + dy))
        return out

    def boundary_vertices(self) -> list[int]:
        s = self.side
        return [v for v in range(self.n_vertices)
                if v % s in (0, s - 1) or v // s in (0, s - 1)]

    def interior_vertices(self) -> list[int]:
        s = self.side
        return [v for v in range(self.n_vertices)
                if 0 < v % s < s - 1 and 0 < v // s < s - 1]

    def edge_ids(self) -> list[int]:
        """Dense-arithmetic edge ids 2*vertex+d, listing only in-box edges."""
        out = []
        for v in range(self.n_vertices):
            x, y = v % self.side, v // self.side
            if x < self.side - 1:
                out.append(2 * v + 0)
            if y < self.side - 1:
                out.append(2 * v + 1)
        return out

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        v, d = divmod(e, 2)
        x, y = self.vertex_coord(v)
        if d == 0:
            return v, self.vertex_id(x + 1, y)
        return v, self.vertex_id(x, y + 1)

    # -- host embedding ------------------------------------------------------

    def to_host_vertex(self, v: int) -> int:
        self._require_host()
        x, y = self.vertex_coord(v)
        return self.host.vertex_id(self.anchor[0] + x, self.anchor[1] + y)

    def host_vertices(self) -> list[int]:
        return [self.to_host_vertex(v) for v in range(self.n_vertices)]

    def exterior_boundary(self) -> list[int]:
        """Host vertices outside the box adjacent to it (sorted)."""
        self._require_host()
        inside = set(self.host_vertices())
        ring = set()
        for hv in inside:
            for u in self.host.neighbors(hv):
                if u not in inside:
                    ring.add(u)
        return sorted(ring)

    def closure_vertices(self) -> list[int]:
        """Host vertices of the box together with its exterior boundary."""
        return sorted(set(self.host_vertices()) | set(self.exterior_boundary()))

    def closure_edges(self) -> list[int]:
        """Host edges with both endpoints in the closure, each once (sorted)."""
        self._require_host()
        closure = set(self.closure_vertices())
        edges = set()
        for hv in closure:
            for k, u in enumerate(self.host.neighbors(hv)):
                if u in closure:
                    edges.add(self.host.incident_edges(hv)[k])
        return sorted(edges)

    def _require_host(self):
        if self.host is None:
            raise ValueError("operation requires a box embedded in a host torus")

    def _check_vertex(self, v):
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex id {v} out of range [0, {self.n_vertices})")
