"""Exact enumeration of lattice animals, cycles and weight-ratio tables.

Counts here feed the combinatorial sanity checks: the number of
connected subgraphs on n vertices (or edges) containing the origin must
sit between 2^(n-1) and 32^n, and small-cycle tables anchor the
unsatisfied-cycle census.  Two independent counting routes are kept
deliberately: breadth-first growth with set deduplication, and a
transfer-style recursive count of translation classes.  Do not collapse
them; tests compare one against the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .disorder import Couplings, graph_weight
from .errors import SizeLimitError
from .lattice import TorusGeometry, _STEPS

VERTEX_MODE = "vertex"
EDGE_MODE = "edge"

# hard caps; growth enumeration beyond these does not fit in memory
_VERTEX_N_CAP = 12
_EDGE_N_CAP = 10
_CYCLE_LEN_CAP = 16

LOWER_BASE = 2.0  # count(n) >= 2^(n-1)
UPPER_BASE = 32.0  # count(n) <= 32^n


@dataclass
class CountTable:
    """Exact counts by size for one enumeration mode."""

    mode: str
    counts: dict[int, int]

    def __post_init__(self):
        if self.mode not in (VERTEX_MODE, EDGE_MODE, "cycle"):
            raise ValueError(f"unknown count mode {self.mode!r}")

    def count(self, n: int) -> int:
        return self.counts[n]


def enumerate_animals(mode: str, n_max: int) -> CountTable:
    """Count connected origin-containing animals of each size 1..n_max.

    mode "vertex": connected vertex sets of Z^2 containing the origin.
    mode "edge": connected edge sets whose vertex set contains the origin.
    Growth enumeration: every animal of size n is reached by adding one
    element to an animal of size n-1; deduplication by the sorted
    element set makes each animal count once.
    """
    cap = _VERTEX_N_CAP if mode == VERTEX_MODE else _EDGE_N_CAP
    if not 1 <= n_max <= cap:
        raise SizeLimitError(f"n_max for {mode} animals must be in [1, {cap}], got {n_max}")
    if mode == VERTEX_MODE:
        counts = _grow_vertex_animals(n_max)
    elif mode == EDGE_MODE:
        counts = _grow_edge_animals(n_max)
    else:
        raise ValueError(f"unknown animal mode {mode!r}")
    return CountTable(mode=mode, counts=counts)


def _grow_vertex_animals(n_max: int) -> dict[int, int]:
    # cells encoded as ints in a (2R+1)^2 window, R = n_max
    R = n_max
    W = 2 * R + 1

    def enc(x, y):
        return (x + R) * W + (y + R)

    nbr_steps = [enc(dx, dy) - enc(0, 0) for dx, dy in _STEPS]
    origin = enc(0, 0)
    level = {frozenset((origin,))}
    counts = {1: 1}
    for n in range(2, n_max + 1):
        nxt = set()
        for s in level:
            for c in s:
                for step in nbr_steps:
                    d = c + step
                    if d not in s:
                        nxt.add(s | {d})
        counts[n] = len(nxt)
        level = nxt
    return counts


def _grow_edge_animals(n_max: int) -> dict[int, int]:
    # an edge is the frozenset of its two encoded endpoints
    R = n_max + 1
    W = 2 * R + 1

    def enc(x, y):
        return (x + R) * W + (y + R)

    def cell_neighbors(c):
        return (c + W, c + 1, c - W, c - 1)

    origin = enc(0, 0)
    seeds = {frozenset((frozenset((origin, d)),)) for d in cell_neighbors(origin)}
    level = seeds
    counts = {1: len(seeds)}
    for n in range(2, n_max + 1):
        nxt = set()
        for s in level:
            endpoints = set()
            for e in s:
                endpoints |= e
            for v in endpoints:
                for u in cell_neighbors(v):
                    e = frozenset((v, u))
                    if e not in s:
                        nxt.add(s | {e})
        counts[n] = len(nxt)
        level = nxt
    return counts


def count_fixed_polyominoes(n_max: int) -> dict[int, int]:
    """Fixed polyominoes (translation classes of vertex animals) by size.

    Independent of the growth enumerator: recursive counting over the
    half-plane canonical placement, never materializing the animals.
    """
    if not 1 <= n_max <= _VERTEX_N_CAP:
        raise SizeLimitError(f"n_max must be in [1, {_VERTEX_N_CAP}], got {n_max}")
    counts = [0] * (n_max + 1)
    reached = {(0, 0)}

    def rec(untried: list, size: int):
        while untried:
            cx, cy = untried.pop()
            counts[size + 1] += 1
            if size + 1 < n_max:
                new = []
                for dx, dy in _STEPS:
                    d = (cx + dx, cy + dy)
                    if (d[1] > 0 or (d[1] == 0 and d[0] >= 0)) and d not in reached:
                        new.append(d)
                        reached.add(d)
                rec(untried + new, size + 1)
                for d in new:
                    reached.remove(d)

    rec([(0, 0)], 0)
    return {n: counts[n] for n in range(1, n_max + 1)}


def independent_animal_counts(n_max: int) -> CountTable:
    """Origin-containing vertex-animal counts via translation classes.

    Every translation class of size n contains the origin in exactly n
    of its placements, so count(n) = n * fixed(n).
    """
    fixed = count_fixed_polyominoes(n_max)
    return CountTable(mode=VERTEX_MODE, counts={n: n * f for n, f in fixed.items()})


@dataclass
class BoundsRow:
    n: int
    count: int
    lower: float
    upper: float
    ok: bool


@dataclass
class BoundsVerdict:
    passed: bool
    rows: list[BoundsRow]


def check_animal_bounds(table: CountTable) -> BoundsVerdict:
    """Verify 2^(n-1) <= count(n) <= 32^n for every row of the table."""
    rows = []
    for n in sorted(table.counts):
        c = table.counts[n]
        lo, hi = LOWER_BASE ** (n - 1), UPPER_BASE ** n
        rows.append(BoundsRow(n=n, count=c, lower=lo, upper=hi, ok=lo <= c <= hi))
    return BoundsVerdict(passed=all(r.ok for r in rows), rows=rows)


def write_count_table(path, table: CountTable) -> None:
    """CSV: columns (n, count, lower_bound, upper_bound).

    Animal modes carry the proven two-sided bounds; cycle counts only
    have the 32^n upper bound, so their lower column is 0.
    """
    if table.mode == "cycle":
        rows = [BoundsRow(n=n, count=c, lower=0.0, upper=UPPER_BASE ** n,
                          ok=c <= UPPER_BASE ** n)
                for n, c in sorted(table.counts.items())]
    else:
        rows = check_animal_bounds(table).rows
    with open(path, "w") as fh:
        fh.write("# format eaglass-count-table v1\n")
        fh.write("n,count,lower_bound,upper_bound\n")
        for r in rows:
            fh.write(f"{r.n},{r.count},{r.lower:.6g},{r.upper:.6g}\n")


def cycle_count_table(len_max: int) -> CountTable:
    """Counts of simple dual cycles through a fixed vertex, by length.

    Enumerated on a torus wide enough (side = len_max + 2) that no
    cycle can wrap, so the counts match the infinite planar lattice.
    """
    geom = TorusGeometry(len_max + 2)
    x = geom.vertex_id(len_max // 2 + 1, len_max // 2 + 1)
    counts: dict[int, int] = {}
    for cyc in enumerate_cycles_through(geom, x, len_max):
        counts[len(cyc)] = counts.get(len(cyc), 0) + 1
    return CountTable(mode="cycle", counts=counts)


# -- simple dual cycles -------------------------------------------------------


def dual_edge_between(geom: TorusGeometry, a: int, b: int) -> int:
    """The dual edge joining adjacent dual vertices a and b."""
    for k, v in enumerate(geom.dual_neighbors(a)):
        if v == b:
            return geom.dual_incident_edges(a)[k]
    raise ValueError(f"dual vertices {a} and {b} are not adjacent")


def enumerate_cycles_through(geom: TorusGeometry, x: int, len_max: int) -> list[tuple[int, ...]]:
    """All simple dual cycles through dual vertex x with <= len_max edges.

    Each cycle appears once, independent of starting point and
    direction; cycles are returned as tuples of dual-edge ids in walk
    order starting from x.  Minimum length is 4 (the four unit squares
    at x).
    """
    if not 1 <= len_max <= _CYCLE_LEN_CAP:
        raise SizeLimitError(f"len_max must be in [1, {_CYCLE_LEN_CAP}], got {len_max}")
    geom._check_plaquette(x)
    if len_max < 4:  # bipartite lattice: shortest cycle is a unit square
        return []
    L = geom.side

    def dist(a: int, b: int) -> int:
        ax, ay = a % L, a // L
        bx, by = b % L, b // L
        dx = abs(ax - bx)
        dy = abs(ay - by)
        return min(dx, L - dx) + min(dy, L - dy)

    cycles = []
    path = [x]
    on_path = {x}

    def extend(cur: int, first: int):
        # after stepping to nxt, len(path) edges are used; closing needs dist(nxt, x) more
        budget = len_max - len(path)
        for nxt in geom.dual_neighbors(cur):
            if nxt == x and len(path) >= 4:
                # direction dedup: keep cycles whose first step has the smaller id
                if first < cur:
                    cycles.append(tuple(path))
                continue
            if nxt in on_path:
                continue
            if dist(nxt, x) > budget:
                continue
            path.append(nxt)
            on_path.add(nxt)
            extend(nxt, first)
            on_path.remove(nxt)
            path.pop()

    for first in geom.dual_neighbors(x):
        if dist(first, x) > len_max - 1:
            continue
        path.append(first)
        on_path.add(first)
        extend(first, first)
        on_path.remove(first)
        path.pop()

    out = []
    for verts in cycles:
        edges = [dual_edge_between(geom, verts[i], verts[(i + 1) % len(verts)])
                 for i in range(len(verts))]
        out.append(tuple(edges))
    return out


# -- connected subsets of a finite torus (used by dynamics and checks) --------


def connected_vertex_subsets(geom: TorusGeometry, max_size: int) -> list[frozenset[int]]:
    """Every connected vertex subset of the torus with 1..max_size vertices."""
    if not 1 <= max_size <= 8:
        raise SizeLimitError(f"max_size must be in [1, 8], got {max_size}")
    level = {frozenset((v,)) for v in range(geom.n_vertices)}
    out = sorted(level, key=sorted)
    for _ in range(max_size - 1):
        nxt = set()
        for s in level:
            for v in s:
                for u in geom.neighbors(v):
                    if u not in s:
                        nxt.add(s | {u})
        out.extend(sorted(nxt, key=sorted))
        level = nxt
    return out


def random_connected_subset(geom: TorusGeometry, size: int, rng: np.random.Generator) -> frozenset[int]:
    """Random growth: start anywhere, repeatedly absorb a uniform boundary vertex."""
    v = int(rng.integers(geom.n_vertices))
    cells = {v}
    boundary = set(geom.neighbors(v))
    while len(cells) < size:
        pick = sorted(boundary)[int(rng.integers(len(boundary)))]
        cells.add(pick)
        boundary.discard(pick)
        boundary |= {u for u in geom.neighbors(pick) if u not in cells}
    return frozenset(cells)


def induced_edges(geom: TorusGeometry, cells: frozenset[int]) -> list[int]:
    """Host edges with both endpoints in the vertex set, each once."""
    edges = set()
    for v in cells:
        inc = geom.incident_edges(v)
        for k, u in enumerate(geom.neighbors(v)):
            if u in cells:
                edges.add(inc[k])
    return sorted(edges)


# -- weight-to-size ratio statistics ------------------------------------------


@dataclass
class WeightRatioStats:
    """Sampled |w|(G) / |E(G)| ratios over animals, grouped by vertex count."""

    ratios_by_size: dict[int, np.ndarray]
    exhaustive_sizes: list[int] = field(default_factory=list)

    def all_ratios(self) -> np.ndarray:
        if not self.ratios_by_size:
            return np.empty(0)
        return np.concatenate([self.ratios_by_size[n] for n in sorted(self.ratios_by_size)])

    def violation_frequency(self, lam_hi: float, lam_lo: float) -> float:
        """Fraction of animals with |w|(G) outside [lam_lo * |E|, lam_hi * |E|]."""
        r = self.all_ratios()
        if r.size == 0:
            return 0.0
        return float(np.mean((r > lam_hi) | (r < lam_lo)))

    def suggested_thresholds(self, q: float = 1e-3) -> tuple[float, float]:
        r = self.all_ratios()
        return float(np.quantile(r, 1 - q)), float(np.quantile(r, q))


def weight_ratio_stats(w: Couplings, n_min: int, samples: int,
                       rng: np.random.Generator, max_size: int | None = None,
                       exhaustive_cap: int = 4) -> WeightRatioStats:
    """Ratio table over animals of size >= n_min on the torus of w.

    Sizes up to exhaustive_cap are enumerated completely as subsets
    containing a fixed anchor vertex; larger sizes (up to max_size,
    default n_min + 10) are sampled by random growth, `samples` draws
    per size.
    """
    geom = w.geometry
    if not isinstance(geom, TorusGeometry):
        raise ValueError("weight_ratio_stats expects couplings on a torus")
    if max_size is None:
        max_size = n_min + 10
    ratios: dict[int, list[float]] = {}
    exhaustive = []
    if n_min <= exhaustive_cap:
        anchor = geom.vertex_id(geom.side // 2, geom.side // 2)
        for cells in _subsets_containing(geom, anchor, exhaustive_cap):
            n = len(cells)
            if n < n_min or n < 2:
                continue
            edges = induced_edges(geom, cells)
            ratios.setdefault(n, []).append(
                graph_weight(w, edges, absolute=True) / len(edges))
        exhaustive = [n for n in ratios]
    for n in range(max(n_min, exhaustive_cap + 1, 2), max_size + 1):
        vals = []
        for _ in range(samples):
            cells = random_connected_subset(geom, n, rng)
            edges = induced_edges(geom, cells)
            vals.append(graph_weight(w, edges, absolute=True) / len(edges))
        ratios[n] = vals
    return WeightRatioStats(
        ratios_by_size={n: np.asarray(v) for n, v in sorted(ratios.items())},
        exhaustive_sizes=sorted(exhaustive),
    )


def _subsets_containing(geom: TorusGeometry, anchor: int, max_size: int):
    level = {frozenset((anchor,))}
    yield from level
    for _ in range(max_size - 1):
        nxt = set()
        for s in level:
            for v in s:
                for u in geom.neighbors(v):
                    if u not in s:
                        nxt.add(s | {u})
        yield from nxt
        level = nxt
