"""Boltzmann-Gibbs measures for the Edwards-Anderson model.

The restricted Hamiltonian of a box C inside a host torus sums
-w_xy s_x s_y over every host edge with both endpoints in the closure
of C (the box plus its exterior vertex boundary), each edge once.
Exact tables on small boxes, heat-bath (Glauber) dynamics, region-flip
energetics, zero-temperature descent and the finite-size ground-state
certificate all live here.

Inverse temperature is a plain nonnegative float; math.inf is the
distinguished zero-temperature value and every routine accepts it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .disorder import Couplings, sample_couplings
from .enumeration import connected_vertex_subsets, count_fixed_polyominoes
from .errors import (
    BoundedRunError,
    ConfigurationError,
    ContractViolationError,
    SizeLimitError,
)
from .lattice import BoxGeometry, TorusGeometry

ZERO_TEMPERATURE = math.inf

_EXACT_STATE_CAP = 25  # exact tables enumerate 2^k states
_STATE_BLOCK = 1 << 20


def validate_beta(beta: float) -> float:
    beta = float(beta)
    if math.isnan(beta) or beta < 0.0:
        raise ConfigurationError(f"inverse temperature must be >= 0 or inf, got {beta}")
    return beta


@dataclass
class SpinConfig:
    """A +-1 spin assignment on every vertex of a geometry."""

    geometry: TorusGeometry | BoxGeometry
    spins: np.ndarray

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if self.spins.shape != (self.geometry.n_vertices,):
            raise ValueError("spin vector length does not match geometry")
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be +1 or -1")

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.geometry, self.spins.copy())


def random_spins(geom, rng: np.random.Generator) -> SpinConfig:
    s = (rng.integers(0, 2, geom.n_vertices, dtype=np.int8) * 2 - 1).astype(np.int8)
    return SpinConfig(geom, s)


def torus_hamiltonian(w: Couplings, sigma: SpinConfig) -> float:
    """Full H on the torus: -sum over all edges of w_e s_x s_y."""
    U, V = w.geometry.edge_endpoint_arrays
    s = sigma.spins
    return float(-(w.weights * s[U] * s[V]).sum())


def restricted_hamiltonian(w: Couplings, box: BoxGeometry, sigma: SpinConfig,
                           tau: dict[int, int]) -> float:
    """H of the box given boundary condition tau on its exterior ring.

    sigma is a full host configuration; it must agree with tau on the
    ring.  Edges with both endpoints outside the closure do not enter.
    """
    ring = box.exterior_boundary()
    missing = [v for v in ring if v not in tau]
    if missing:
        raise ContractViolationError(f"boundary condition missing vertices {missing[:4]}...")
    for v in ring:
        t = int(tau[v])
        if t not in (-1, 1):
            raise ContractViolationError(f"boundary spin at {v} must be +-1, got {t}")
        if int(sigma.spins[v]) != t:
            raise ContractViolationError(f"sigma disagrees with tau at boundary vertex {v}")
    host = box.host
    total = 0.0
    for e in box.closure_edges():
        u, v = host.edge_endpoints(e)
        total -= float(w.weights[e]) * int(sigma.spins[u]) * int(sigma.spins[v])
    return total


@dataclass
class BoltzmannTable:
    """Exact Boltzmann distribution of a conditioned box.

    State k encodes the box spins in local vertex order: bit i of k is 1
    iff local vertex i carries spin +1.
    """

    box: BoxGeometry
    beta: float
    energies: np.ndarray
    log_probs: np.ndarray
    probs: np.ndarray

    def state_spins(self, k: int) -> np.ndarray:
        n = self.box.n_vertices
        bits = (k >> np.arange(n)) & 1
        return (2 * bits - 1).astype(np.int8)

    def state_index(self, spins) -> int:
        bits = (np.asarray(spins) > 0).astype(np.int64)
        return int((bits << np.arange(bits.size)).sum())


def exact_boltzmann(w: Couplings, box: BoxGeometry, tau: dict[int, int],
                    beta: float) -> BoltzmannTable:
    """Enumerate all box states and normalize exp(-beta H) exactly.

    Uses the restricted Hamiltonian, so the table equals the host
    measure conditioned on tau up to the shared normalization.  At
    beta = inf mass is uniform on the exact energy minimizers.
    """
    beta = validate_beta(beta)
    n = box.n_vertices
    if n > _EXACT_STATE_CAP:
        raise SizeLimitError(f"box has {n} vertices; exact tables support at most {_EXACT_STATE_CAP}")
    host = box.host
    ring = box.exterior_boundary()
    for v in ring:
        if v not in tau:
            raise ContractViolationError(f"boundary condition missing vertex {v}")
    host_of = box.host_vertices()
    col_of = {hv: i for i, hv in enumerate(host_of)}

    # split closure edges by how many endpoints are free
    free_edges = []   # (weight, col_u, col_v)
    cross_edges = []  # (weight * tau_v, col_u)
    const_energy = 0.0
    for e in box.closure_edges():
        u, v = host.edge_endpoints(e)
        wu, wv = u in col_of, v in col_of
        we = float(w.weights[e])
        if wu and wv:
            free_edges.append((we, col_of[u], col_of[v]))
        elif wu:
            cross_edges.append((we * int(tau[v]), col_of[u]))
        elif wv:
            cross_edges.append((we * int(tau[u]), col_of[v]))
        else:
            const_energy -= we * int(tau[u]) * int(tau[v])

    n_states = 1 << n
    energies = np.empty(n_states)
    for lo in range(0, n_states, _STATE_BLOCK):
        hi = min(lo + _STATE_BLOCK, n_states)
        ks = np.arange(lo, hi, dtype=np.int64)
        s = ((ks[:, None] >> np.arange(n)[None, :]) & 1) * 2 - 1  # (block, n)
        e_block = np.full(hi - lo, const_energy)
        for we, cu, cv in free_edges:
            e_block -= we * s[:, cu] * s[:, cv]
        for wt, cu in cross_edges:
            e_block -= wt * s[:, cu]
        energies[lo:hi] = e_block

    if math.isinf(beta):
        emin = energies.min()
        mask = energies == emin
        probs = mask / mask.sum()
        log_probs = np.where(mask, -math.log(mask.sum()), -math.inf)
    else:
        logw = -beta * energies
        shift = logw.max()
        log_z = shift + math.log(np.exp(logw - shift).sum())
        log_probs = logw - log_z
        probs = np.exp(log_probs)
    return BoltzmannTable(box=box, beta=beta, energies=energies,
                          log_probs=log_probs, probs=probs)


def torus_boltzmann_table(w: Couplings, beta: float) -> np.ndarray:
    """Exact state probabilities on a whole small torus (<= 20 vertices).

    State encoding matches BoltzmannTable: bit i of the index is vertex
    i's spin.
    """
    beta = validate_beta(beta)
    geom = w.geometry
    n = geom.n_vertices
    if n > 20:
        raise SizeLimitError(f"whole-torus enumeration supports <= 20 vertices, got {n}")
    U, V = geom.edge_endpoint_arrays
    ks = np.arange(1 << n, dtype=np.int64)
    s = ((ks[:, None] >> np.arange(n)[None, :]) & 1) * 2 - 1
    energies = -(s[:, U] * s[:, V] * w.weights[None, :]).sum(axis=1)
    if math.isinf(beta):
        mask = energies == energies.min()
        return mask / mask.sum()
    logw = -beta * energies
    logw -= logw.max()
    z = np.exp(logw)
    return z / z.sum()


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


# -- Glauber heat-bath dynamics ----------------------------------------------


def heat_bath_prob_up(w: Couplings, sigma: SpinConfig, v: int, beta: float) -> float:
    """Exact conditional P(s_v = +1 | rest) under the torus measure."""
    beta = validate_beta(beta)
    geom = w.geometry
    h = 0.0
    for k, u in enumerate(geom.neighbors(v)):
        h += float(w.weights[geom.incident_edges(v)[k]]) * int(sigma.spins[u])
    if math.isinf(beta):
        return 1.0 if h > 0 else (0.0 if h < 0 else 0.5)
    t = 2.0 * beta * h
    if t > 700.0:
        return 1.0
    if t < -700.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(-t))


def _site_tables(w: Couplings):
    geom = w.geometry
    nbrs, wts = [], []
    for v in range(geom.n_vertices):
        nbrs.append(geom.neighbors(v))
        wts.append([float(w.weights[e]) for e in geom.incident_edges(v)])
    return nbrs, wts


def glauber_chain(w: Couplings, sigma: SpinConfig, beta: float, sweeps: int,
                  rng: np.random.Generator, callback=None) -> SpinConfig:
    """Run `sweeps` sequential heat-bath sweeps; returns the final state.

    One sweep updates every vertex once, in vertex-id order, drawing the
    new spin from its exact conditional.  `callback(k, spins_list)` is
    invoked after sweep k with the live Python list of spins (read
    only).
    """
    beta = validate_beta(beta)
    geom = w.geometry
    n = geom.n_vertices
    nbrs, wts = _site_tables(w)
    s = [int(x) for x in sigma.spins]
    infinite = math.isinf(beta)
    exp = math.exp
    for k in range(sweeps):
        u = rng.random(n).tolist()
        for v in range(n):
            nv = nbrs[v]
            wv = wts[v]
            h = wv[0] * s[nv[0]] + wv[1] * s[nv[1]] + wv[2] * s[nv[2]] + wv[3] * s[nv[3]]
            if infinite:
                p = 1.0 if h > 0 else (0.0 if h < 0 else 0.5)
            else:
                t = 2.0 * beta * h
                if t > 700.0:
                    p = 1.0
                elif t < -700.0:
                    p = 0.0
                else:
                    p = 1.0 / (1.0 + exp(-t))
            s[v] = 1 if u[v] < p else -1
        if callback is not None:
            callback(k, s)
    return SpinConfig(geom, np.array(s, dtype=np.int8))


def glauber_sweep(w: Couplings, sigma: SpinConfig, beta: float,
                  rng: np.random.Generator) -> SpinConfig:
    """A single sequential heat-bath sweep."""
    return glauber_chain(w, sigma, beta, 1, rng)


def checkerboard_chain(w: Couplings, sigma: SpinConfig, beta: float, sweeps: int,
                       rng: np.random.Generator, callback=None) -> SpinConfig:
    """Vectorized heat-bath sweeps in two-color (even/odd) order.

    Each sweep still updates every vertex exactly once from its exact
    conditional; only the scan order differs from glauber_chain, so the
    stationary law is the same.  Much faster on large tori.  Requires an
    even side: on an odd torus the two-coloring is not proper across the
    wrap, so same-color neighbours would update together.
    """
    beta = validate_beta(beta)
    geom = w.geometry
    L = geom.side
    if L % 2:
        raise ConfigurationError(
            f"checkerboard sweeps need an even torus side, got {L}")
    s = sigma.spins.astype(np.float64).reshape(L, L)  # [y][x]
    wE = w.weights[0::2].reshape(L, L)
    wN = w.weights[1::2].reshape(L, L)
    yy, xx = np.mgrid[0:L, 0:L]
    masks = [(xx + yy) % 2 == c for c in (0, 1)]
    infinite = math.isinf(beta)
    for k in range(sweeps):
        for mask in masks:
            h = (wE * np.roll(s, -1, axis=1)
                 + np.roll(wE * s, 1, axis=1)
                 + wN * np.roll(s, -1, axis=0)
                 + np.roll(wN * s, 1, axis=0))
            if infinite:
                p = np.where(h > 0, 1.0, np.where(h < 0, 0.0, 0.5))
            else:
                t = np.clip(2.0 * beta * h, -700.0, 700.0)
                p = 1.0 / (1.0 + np.exp(-t))
            u = rng.random((L, L))
            s[mask] = np.where(u < p, 1.0, -1.0)[mask]
        if callback is not None:
            callback(k, s)
    return SpinConfig(geom, s.reshape(-1).astype(np.int8))


def sample_ea_pair(side: int, seed: int, beta: float, sweeps: int | None = None,
                   spin_seed: int = 0, scheme: str = "auto"):
    """Draw couplings from `seed` and an approximate Gibbs spin sample.

    Spins start uniform and relax through `sweeps` heat-bath sweeps
    (default 1000 * side).  scheme "auto" runs the sequential sweep on
    tori with at most 144 vertices and the checkerboard sweep above
    that; fixing all arguments fixes the output bit for bit.
    """
    geom = TorusGeometry(side)
    w = sample_couplings(geom, seed)
    if sweeps is None:
        sweeps = 1000 * side
    rng = np.random.default_rng(np.random.SeedSequence([seed % (2 ** 63), spin_seed % (2 ** 63), 17]))
    sigma = random_spins(geom, rng)
    if scheme == "auto":
        small = geom.n_vertices <= 144
        scheme = "sequential" if small or side % 2 else "checkerboard"
    if scheme == "sequential":
        sigma = glauber_chain(w, sigma, beta, sweeps, rng)
    elif scheme == "checkerboard":
        sigma = checkerboard_chain(w, sigma, beta, sweeps, rng)
    else:
        raise ConfigurationError(f"unknown sweep scheme {scheme!r}")
    return w, sigma


# -- region flips --------------------------------------------------------------


def flip_region_delta(w: Couplings, sigma: SpinConfig, region) -> float:
    """Energy change of flipping every spin in `region` at once.

    Only the cut edges E(R, R^c) contribute: flipping R turns each cut
    term -w s s into +w s s, so the change is 2 * sum over the cut of
    w_e s_x s_y.  Flipping a region and its complement give the same
    value (same cut).
    """
    geom = w.geometry
    cells = set(int(v) for v in region)
    if not cells:
        return 0.0  # no cut edges
    for v in cells:
        geom._check_vertex(v)
    total = 0.0
    s = sigma.spins
    for v in cells:
        inc = geom.incident_edges(v)
        for k, u in enumerate(geom.neighbors(v)):
            if u not in cells:
                total += float(w.weights[inc[k]]) * int(s[v]) * int(s[u])
    return 2.0 * total


# -- loop dynamics --------------------------------------------------------------


@dataclass
class LoopDynamicsConfig:
    """Poisson-clock flip dynamics over small connected vertex sets.

    Every connected subset C with at most max_subset_size vertices
    carries an exponential clock of rate exp(-rate_decay * |C|).  The
    per-vertex rate mass sum_{C owns v} rate(C) * |C| must stay under
    1/theta; this is checked numerically at construction from exact
    animal counts.
    """

    rate_decay: float = 3.0
    max_subset_size: int = 4
    horizon: float = 50.0
    theta: float = 1.0
    max_events: int = 100_000

    def __post_init__(self):
        if self.max_subset_size < 1 or self.max_subset_size > 8:
            raise ConfigurationError("max_subset_size must be in [1, 8]")
        if self.theta <= 0 or self.horizon <= 0 or self.max_events < 1:
            raise ConfigurationError("theta, horizon and max_events must be positive")
        fixed = count_fixed_polyominoes(self.max_subset_size)
        mass = sum(n * fixed[n] * n * math.exp(-self.rate_decay * n) for n in fixed)
        if self.theta * mass >= 1.0:
            raise ConfigurationError(
                f"rate_decay={self.rate_decay} too small: per-vertex rate mass "
                f"{mass:.4f} * theta {self.theta} must stay below 1"
            )


@dataclass
class LoopTrajectory:
    """Time-ordered record of accepted subset flips."""

    times: list[float]
    configs: list[SpinConfig]
    flipped: list[frozenset[int]]
    n_events: int
    final_time: float

    @property
    def final(self) -> SpinConfig:
        return self.configs[-1]


def loop_dynamics_run(w: Couplings, sigma0: SpinConfig, beta: float,
                      cfg: LoopDynamicsConfig, rng: np.random.Generator) -> LoopTrajectory:
    """Simulate the subset-flip dynamics on the torus of w until horizon.

    Clocks ring in global time order; at each ring the subset flips
    with probability exp(-beta*D) / (exp(-beta*D) + exp(beta*D)) where
    2D is the flip energy change, so at beta = inf exactly the strict
    descents flip.  Raises BoundedRunError with the partial trajectory
    if max_events rings occur before the horizon.
    """
    beta = validate_beta(beta)
    geom = w.geometry
    subsets = connected_vertex_subsets(geom, cfg.max_subset_size)
    rates = np.array([math.exp(-cfg.rate_decay * len(c)) for c in subsets])
    total_rate = rates.sum()
    cum = np.cumsum(rates) / total_rate
    subset_lists = [sorted(c) for c in subsets]

    sigma = sigma0.copy()
    traj = LoopTrajectory(times=[0.0], configs=[sigma.copy()], flipped=[],
                          n_events=0, final_time=0.0)
    t = 0.0
    for _ in range(cfg.max_events):
        t += rng.exponential(1.0 / total_rate)
        if t > cfg.horizon:
            traj.final_time = cfg.horizon
            return traj
        i = int(np.searchsorted(cum, rng.random(), side="right"))
        traj.n_events += 1
        half_delta = flip_region_delta(w, sigma, subset_lists[i]) / 2.0
        if math.isinf(beta):
            accept = half_delta < 0.0
        else:
            x = 2.0 * beta * half_delta
            p = 0.0 if x > 700.0 else (1.0 if x < -700.0 else 1.0 / (1.0 + math.exp(x)))
            accept = rng.random() < p
        if accept:
            sigma.spins[subset_lists[i]] *= -1
            traj.times.append(t)
            traj.configs.append(sigma.copy())
            traj.flipped.append(subsets[i])
    traj.final_time = t
    raise BoundedRunError(
        f"loop dynamics hit max_events={cfg.max_events} before horizon", partial=traj)


# -- finite-size ground-state certificate ---------------------------------------


@dataclass
class GroundStateVerdict:
    passed: bool
    witness: tuple[int, ...] | None = None
    delta: float | None = None
    kind: str | None = None  # "descent" or "tie"

    def __bool__(self):
        return self.passed


def check_ground_state(w: Couplings, sigma: SpinConfig, max_region_size: int) -> GroundStateVerdict:
    """Certify sigma against all connected-region flips up to a size cap.

    PASS means every connected region C with |C| <= max_region_size has
    strictly positive flip cost and, for |C| <= 4, that the current
    restriction is the unique minimizer over all 2^|C| local
    assignments.  Any strict descent or exact tie is returned as a
    witness.  Because an arbitrary finite spin change decomposes into
    non-adjacent connected flips with additive cost, connected regions
    suffice.
    """
    if not 1 <= max_region_size <= 8:
        raise SizeLimitError("max_region_size must be in [1, 8]")
    geom = w.geometry
    for cells in connected_vertex_subsets(geom, max_region_size):
        region = sorted(cells)
        if len(cells) <= 4:
            verdict = _check_all_assignments(w, sigma, region)
            if verdict is not None:
                return verdict
        else:
            delta = flip_region_delta(w, sigma, region)
            if delta < 0.0:
                return GroundStateVerdict(False, tuple(region), delta, "descent")
            if delta == 0.0:
                return GroundStateVerdict(False, tuple(region), delta, "tie")
    return GroundStateVerdict(True)


def _check_all_assignments(w: Couplings, sigma: SpinConfig, region: list[int]):
    """Minimizer check of one small region over all local assignments."""
    geom = w.geometry
    s = sigma.spins
    touching = []  # (weight, u, v) with at least one endpoint inside
    inside = set(region)
    seen = set()
    for v in region:
        inc = geom.incident_edges(v)
        for k, u in enumerate(geom.neighbors(v)):
            e = inc[k]
            if e not in seen:
                seen.add(e)
                touching.append((float(w.weights[e]), v, u))
    col = {v: i for i, v in enumerate(region)}
    base = 0.0
    for we, u, v in touching:
        base -= we * int(s[u]) * int(s[v])
    n = len(region)
    current = [int(s[v]) for v in region]
    for k in range(1 << n):
        assign = [1 if (k >> i) & 1 else -1 for i in range(n)]
        if assign == current:
            continue
        energy = 0.0
        for we, u, v in touching:
            su = assign[col[u]] if u in inside else int(s[u])
            sv = assign[col[v]] if v in inside else int(s[v])
            energy -= we * su * sv
        delta = energy - base
        if delta < 0.0:
            return GroundStateVerdict(False, tuple(region), delta, "descent")
        if delta == 0.0:
            return GroundStateVerdict(False, tuple(region), delta, "tie")
    return None
