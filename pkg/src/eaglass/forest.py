"""Loop-erasing clock process: thin a dual subgraph down to a forest.

Every simple cycle of the input graph carries an exponential clock of
rate exp(-rate_decay * length) and one uniformly chosen candidate edge,
fixed for the whole run.  Time is cut into theta-intervals; within an
interval the ringing surviving cycles are processed in ring order, and
a cycle's candidate edge is removed unless the cycle shares an edge
with an earlier selected cycle of the same interval.  Surviving cycles
keep ringing until they lose an edge.  The result is acyclic and has
exactly the same dual-vertex component partition as the input.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundedRunError, ConfigurationError, SizeLimitError
from .frustration import DualSubgraph

DEFAULT_RATE_DECAY = 3.0
DEFAULT_THETA = 1.0
_CYCLE_CAP = 10 ** 6
_RING_CHUNK = 32


def simple_cycles_of(g: DualSubgraph, cap: int = _CYCLE_CAP,
                     length_bound: int | None = None) -> list[tuple[int, ...]]:
    """All simple cycles of the dual subgraph, as tuples of dual-edge ids.

    Each cycle is reported once (anchored at its smallest dual vertex,
    one fixed direction).  Raises SizeLimitError past `cap` cycles.
    """
    if g.geometry.side < 3:
        raise ConfigurationError("cycle enumeration requires torus side >= 3")
    adj = g.adjacency()
    cycles: list[tuple[int, ...]] = []
    for s in sorted(adj):
        path_edges: list[int] = []
        on_path = {s}

        def extend(cur: int, first: int):
            for nxt, de in adj[cur]:
                if nxt == s:
                    if len(path_edges) >= 2 and first < cur:
                        cycles.append(tuple(path_edges + [de]))
                        if len(cycles) > cap:
                            raise SizeLimitError(
                                f"more than {cap} simple cycles; graph too dense to erase")
                    continue
                if nxt < s or nxt in on_path:
                    continue
                if length_bound is not None and len(path_edges) + 2 > length_bound:
                    continue
                on_path.add(nxt)
                path_edges.append(de)
                extend(nxt, first)
                path_edges.pop()
                on_path.remove(nxt)

        for first, de0 in adj[s]:
            if first < s:
                continue
            on_path.add(first)
            path_edges.append(de0)
            extend(first, first)
            path_edges.pop()
            on_path.remove(first)
    return cycles


@dataclass
class CycleClockSystem:
    """Clocks, rates and candidate edges for every cycle of one graph.

    ring_times holds realized Poisson arrival times per cycle; the
    arrays are extended on demand (memorylessness makes the lazy
    continuation equivalent to realizing everything upfront) but never
    past `horizon`.  All realized times are pairwise distinct.
    """

    cycles: list[tuple[int, ...]]
    rates: np.ndarray
    chosen_edge: np.ndarray
    ring_times: list[list[float]]
    theta: float
    horizon: float
    rate_decay: float
    _rng: np.random.Generator = field(repr=False, default=None)
    _seen_times: set = field(repr=False, default_factory=set)

    def rings_in_interval(self, k: int) -> list[tuple[float, int]]:
        """(time, cycle index) pairs with k*theta <= time < (k+1)*theta."""
        lo, hi = k * self.theta, (k + 1) * self.theta
        out = [(t, i) for i, ts in enumerate(self.ring_times)
               for t in ts if lo <= t < hi]
        out.sort()
        return out

    def extend_rings(self, i: int) -> bool:
        """Realize the next chunk of cycle i's clock; False if horizon hit."""
        ts = self.ring_times[i]
        t = ts[-1] if ts else 0.0
        if t >= self.horizon:
            return False
        rate = float(self.rates[i])
        added = False
        for _ in range(_RING_CHUNK):
            t += float(self._rng.exponential(1.0 / rate))
            while t in self._seen_times:  # ties redrawn, a.s. never loops
                t += float(self._rng.exponential(1.0 / rate))
            if t >= self.horizon:
                break
            self._seen_times.add(t)
            ts.append(t)
            added = True
        return added


def theta_edge_mass(g: DualSubgraph, cycles, rates) -> float:
    """max over member edges of sum over cycles through it of rate * length."""
    mass: dict[int, float] = {}
    for cyc, r in zip(cycles, rates):
        contribution = float(r) * len(cyc)
        for de in cyc:
            mass[de] = mass.get(de, 0.0) + contribution
    return max(mass.values(), default=0.0)


def build_clock_system(g: DualSubgraph, rng: np.random.Generator,
                       rate_decay: float = DEFAULT_RATE_DECAY,
                       theta: float = DEFAULT_THETA,
                       horizon: float | None = None,
                       max_cycles: int = _CYCLE_CAP) -> CycleClockSystem:
    """Enumerate cycles, check the rate condition, realize the clocks.

    The batching parameter must satisfy theta * (edge rate mass) < 1;
    the mass is computed exactly from the enumerated cycles and the
    check fails loudly.  Default horizon gives every cycle around 40
    expected rings, far more than extraction ever consumes.
    """
    if theta <= 0:
        raise ConfigurationError("theta must be positive")
    cycles = simple_cycles_of(g, cap=max_cycles)
    rates = np.array([math.exp(-rate_decay * len(c)) for c in cycles])
    if cycles:
        mass = theta_edge_mass(g, cycles, rates)
        if theta * mass >= 1.0:
            raise ConfigurationError(
                f"theta {theta} * edge rate mass {mass:.4g} >= 1; "
                f"raise rate_decay or lower theta")
        if horizon is None:
            horizon = 40.0 / float(rates.min())
    elif horizon is None:
        horizon = 1.0
    chosen = np.array([c[int(rng.integers(len(c)))] for c in cycles], dtype=np.int64) \
        if cycles else np.empty(0, dtype=np.int64)
    sys = CycleClockSystem(
        cycles=cycles, rates=rates, chosen_edge=chosen,
        ring_times=[[] for _ in cycles], theta=theta, horizon=float(horizon),
        rate_decay=rate_decay, _rng=rng)
    for i in range(len(cycles)):
        sys.extend_rings(i)
    return sys


def _alive(member: np.ndarray, cycle) -> bool:
    return all(member[de] for de in cycle)


def _process_interval(member: np.ndarray, sys: CycleClockSystem,
                      rings: list[tuple[float, int]]) -> np.ndarray:
    """Apply the selection rule to one interval's rings; returns new bitmap.

    rings must be time-sorted.  A cycle that rings several times in the
    interval acts only through its first ring.
    """
    selected_edges: set[int] = set()
    removal: set[int] = set()
    seen: set[int] = set()
    for _t, i in rings:
        if i in seen:
            continue
        seen.add(i)
        cyc = sys.cycles[i]
        if not _alive(member, cyc):
            continue
        if any(de in selected_edges for de in cyc):
            continue
        selected_edges.update(cyc)
        removal.add(int(sys.chosen_edge[i]))
    out = member.copy()
    for de in removal:
        out[de] = False
    return out


def erase_step(g: DualSubgraph, sys: CycleClockSystem, interval_index: int) -> DualSubgraph:
    """One theta-interval of the erasure process applied to g."""
    rings = sys.rings_in_interval(interval_index)
    member = _process_interval(g.member, sys, rings)
    return DualSubgraph(g.geometry, member)


def is_acyclic(g: DualSubgraph) -> bool:
    stats = g.components()
    touched = len(stats.label_of)
    return g.n_edges == touched - stats.n_components


def extract_forest(g: DualSubgraph, rng: np.random.Generator,
                   rate_decay: float = DEFAULT_RATE_DECAY,
                   theta: float = DEFAULT_THETA,
                   horizon: float | None = None,
                   max_intervals: int = 10 ** 6,
                   max_cycles: int = _CYCLE_CAP) -> DualSubgraph:
    """Run the clock process to completion; returns the acyclic remainder.

    Intervals with no ring are skipped in one jump, so sparse clocks
    cost nothing.  Raises BoundedRunError (with the partial graph
    attached) if max_intervals pass or every clock goes silent while
    cycles remain; retry with a larger horizon in that case.
    """
    sys = build_clock_system(g, rng, rate_decay=rate_decay, theta=theta,
                             horizon=horizon, max_cycles=max_cycles)
    member = g.member.copy()
    alive = {i for i in range(len(sys.cycles)) if _alive(member, sys.cycles[i])}
    # (time, cycle, pointer) heap over each alive cycle's next ring
    heap: list[tuple[float, int, int]] = []
    for i in alive:
        if sys.ring_times[i]:
            heapq.heappush(heap, (sys.ring_times[i][0], i, 0))
    intervals_done = 0
    while alive:
        if not heap:
            raise BoundedRunError(
                "clocks exhausted the horizon while cycles remain; retry with larger horizon",
                partial=DualSubgraph(g.geometry, member))
        k = int(heap[0][0] // sys.theta)
        rings: list[tuple[float, int]] = []
        while heap and int(heap[0][0] // sys.theta) == k:
            t, i, ptr = heapq.heappop(heap)
            if i in alive:
                rings.append((t, i))
            nxt = ptr + 1
            if nxt >= len(sys.ring_times[i]) and i in alive:
                sys.extend_rings(i)
            if nxt < len(sys.ring_times[i]):
                heapq.heappush(heap, (sys.ring_times[i][nxt], i, nxt))
        if rings:
            member = _process_interval(member, sys, rings)
            alive = {i for i in alive if _alive(member, sys.cycles[i])}
        intervals_done += 1
        if intervals_done > max_intervals:
            raise BoundedRunError(
                f"{max_intervals} intervals processed while cycles remain; "
                f"retry with larger horizon",
                partial=DualSubgraph(g.geometry, member))
    return DualSubgraph(g.geometry, member)


def same_partition(a: DualSubgraph, b: DualSubgraph) -> bool:
    """Do a and b induce identical dual-vertex component partitions?"""
    ca, cb = a.components(), b.components()
    if set(ca.label_of) != set(cb.label_of):
        return False
    pair_map: dict[int, int] = {}
    rev_map: dict[int, int] = {}
    for v, la in ca.label_of.items():
        lb = cb.label_of[v]
        if pair_map.setdefault(la, lb) != lb or rev_map.setdefault(lb, la) != la:
            return False
    return True


def write_dual_edge_list(path, g: DualSubgraph) -> None:
    """CSV edge list: one dual edge id + its two dual endpoints per row."""
    with open(path, "w") as fh:
        fh.write("# format eaglass-dual-edges v1\n")
        fh.write("dual_edge,dual_u,dual_v\n")
        for de in g.edge_ids():
            a, b = g.geometry.dual_edge_endpoints(int(de))
            fh.write(f"{int(de)},{a},{b}\n")
