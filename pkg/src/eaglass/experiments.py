"""Measurement drivers: flip bounds, cluster sweeps, and the full pipeline.

Everything here is deterministic given its config: disorder comes from
the counter-based coupling stream, chain randomness from explicitly
seeded generators, and parallel runs merge in input order.  Timing and
progress chatter go to stderr so output files stay bit-identical.
"""

import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import (Window, best_color_class_flip, bridge_weight,
                       color_regions, count_encounter_points,
                       decompose_regions, find_bridges, write_bridge_stats,
                       write_region_grid)
from .disorder import Couplings, graph_weight, sample_couplings
from .enumeration import enumerate_cycles_through
from .errors import ConfigurationError
from .forest import extract_forest, is_acyclic, same_partition, write_dual_edge_list
from .frustration import frustrated_plaquettes, unsatisfied_set, write_component_histogram
from .gibbs import (SpinConfig, checkerboard_chain, glauber_chain,
                    random_spins, sample_ea_pair, torus_hamiltonian,
                    validate_beta)
from .lattice import TorusGeometry

_THRESHOLD_FRACTIONS = (0.2, 0.4, 0.6, 0.8, 1.0)


def replica_seed(seed: int, replica: int) -> int:
    """Disorder seed for one replica, stable across platforms."""
    ss = np.random.SeedSequence([seed % (2 ** 63), replica])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class _CycleScorer:
    """Vectorized per-sweep scoring of many dual cycles at once.

    Holds the primal edge ids of every cycle concatenated flat, so a
    single reduceat per sample yields all signed cycle weights (or
    unsatisfied-edge counts) without a Python loop over cycles.
    """

    def __init__(self, w: Couplings, cycles):
        geom = w.geometry
        prim = [np.array([geom.primal_edge(int(de)) for de in c], dtype=np.int64)
                for c in cycles]
        self.lengths = np.array([len(p) for p in prim], dtype=np.int64)
        self.flat = (np.concatenate(prim) if prim
                     else np.zeros(0, dtype=np.int64))
        self.starts = np.zeros(len(prim), dtype=np.int64)
        if len(prim) > 1:
            self.starts[1:] = np.cumsum(self.lengths)[:-1]
        u, v = geom.edge_endpoint_arrays
        self.u = u[self.flat]
        self.v = v[self.flat]
        self.wf = w.weights[self.flat]

    def signed_values(self, s: np.ndarray) -> np.ndarray:
        if len(self.flat) == 0:
            return np.zeros(0)
        terms = self.wf * s[self.u] * s[self.v]
        return np.add.reduceat(terms, self.starts)

    def unsat_counts(self, s: np.ndarray) -> np.ndarray:
        if len(self.flat) == 0:
            return np.zeros(0, dtype=np.int64)
        bits = (self.wf * s[self.u] * s[self.v] < 0).astype(np.int64)
        return np.add.reduceat(bits, self.starts)


def _run_scored_chain(w: Couplings, beta: float, n_samples: int, seed: int,
                      burn_in: int, scheme: str, score) -> None:
    """Burn in, then call score(flat spins) once per sweep for n_samples."""
    geom = w.geometry
    rng = np.random.default_rng(np.random.SeedSequence(
        [w.seed % (2 ** 63), seed % (2 ** 63), 29]))
    sigma = random_spins(geom, rng)
    if scheme == "auto":
        scheme = "glauber" if geom.side % 2 else "checkerboard"
    chain = checkerboard_chain if scheme == "checkerboard" else glauber_chain
    sigma = chain(w, sigma, beta, burn_in, rng)

    def cb(_, grid):
        score(np.asarray(grid).reshape(-1))

    chain(w, sigma, beta, n_samples, rng, callback=cb)


# -- flip bounds ----------------------------------------------------------------


@dataclass
class FlipBoundResult:
    """Observed frequency of an all-unsatisfied cycle vs its flip bound.

    Flipping the cycle's interior changes the energy by 2 v(gamma)
    where v is the signed crossed-edge weight, so an injection argument
    bounds the probability of {v <= -c} by exp(-2 beta c); the all
    unsatisfied event is the extreme case c = |w|(gamma).  The
    threshold grid records the same inequality at fractions of the full
    weight.
    """

    cycle: tuple[int, ...]
    beta: float
    cycle_weight: float
    n_samples: int
    n_hits: int
    threshold_grid: list[float]
    threshold_hits: list[int]

    @property
    def bound(self) -> float:
        return math.exp(-2.0 * self.beta * self.cycle_weight)

    @property
    def frequency(self) -> float:
        return self.n_hits / self.n_samples

    @property
    def std_error(self) -> float:
        p = self.frequency
        return math.sqrt(max(p * (1.0 - p), 1.0 / self.n_samples) / self.n_samples)

    @property
    def within_bound(self) -> bool:
        return self.frequency <= self.bound + 3.0 * self.std_error

    def threshold_rows(self) -> list[tuple[float, float, float]]:
        """(c, observed frequency of v <= -c, bound exp(-2 beta c)) rows."""
        return [(c, h / self.n_samples, math.exp(-2.0 * self.beta * c))
                for c, h in zip(self.threshold_grid, self.threshold_hits)]

    def thresholds_within(self) -> bool:
        for c, h in zip(self.threshold_grid, self.threshold_hits):
            p = h / self.n_samples
            se = math.sqrt(max(p * (1.0 - p), 1.0 / self.n_samples) / self.n_samples)
            if p > math.exp(-2.0 * self.beta * c) + 3.0 * se:
                return False
        return True


def measure_flip_bounds(w: Couplings, cycles, beta: float, n_samples: int,
                        seed: int = 0, burn_in: int = 200,
                        scheme: str = "auto") -> list[FlipBoundResult]:
    """Estimate all-unsatisfied frequencies for several cycles from one chain.

    Each cycle is a sequence of dual edge ids and must be contractible
    (its interior is what gets flipped in the argument behind the
    bound).  All cycles are scored against the same heat-bath
    trajectory, one sample per sweep after burn_in, which is what makes
    scanning many cycles cheap.
    """
    beta = validate_beta(beta)
    if n_samples < 10 ** 4:
        raise ConfigurationError(f"need at least 1e4 samples, got {n_samples}")
    cycles = [tuple(int(de) for de in c) for c in cycles]
    if not cycles:
        return []
    geom = w.geometry
    for c in cycles:
        geom.cycle_interior(c)  # raises on non-cycles and winding loops
    scorer = _CycleScorer(w, cycles)
    weights = [graph_weight(w, p, absolute=True)
               for p in np.split(scorer.flat, scorer.starts[1:])] if cycles else []
    grids = [[f * wt for f in _THRESHOLD_FRACTIONS] for wt in weights]
    hits = np.zeros(len(cycles), dtype=np.int64)
    thr_hits = np.zeros((len(cycles), len(_THRESHOLD_FRACTIONS)), dtype=np.int64)
    grid_arr = np.asarray(grids, dtype=np.float64).reshape(len(cycles), -1)
    tol = 1e-9 * max(weights, default=1.0)

    def score(s):
        counts = scorer.unsat_counts(s)
        hits[counts == scorer.lengths] += 1
        vals = scorer.signed_values(s)
        thr_hits[vals[:, None] <= -grid_arr + tol] += 1

    _run_scored_chain(w, beta, n_samples, seed, burn_in, scheme, score)
    return [FlipBoundResult(c, beta, float(weights[i]), n_samples, int(hits[i]),
                            [float(g) for g in grid_arr[i]],
                            [int(h) for h in thr_hits[i]])
            for i, c in enumerate(cycles)]


def run_flip_bound_check(w: Couplings, cycle, beta: float, trials: int,
                         seed: int = 0, burn_in: int = 200,
                         scheme: str = "auto") -> FlipBoundResult:
    """Single-cycle convenience wrapper around measure_flip_bounds."""
    return measure_flip_bounds(w, [cycle], beta, trials, seed=seed,
                               burn_in=burn_in, scheme=scheme)[0]


def write_flip_bound_table(path, results: list[FlipBoundResult]) -> None:
    """CSV with one row per (cycle, threshold), plus the all-unsat row c=|w|."""
    with open(path, "w") as fh:
        fh.write("# format eaglass-flip-bounds v1\n")
        fh.write("cycle_index,beta,c,frequency,bound,all_unsat_frequency\n")
        for i, r in enumerate(results):
            for c, freq, bound in r.threshold_rows():
                fh.write(f"{i},{r.beta!r},{c!r},{freq!r},{bound!r},{r.frequency!r}\n")


# -- unsatisfied-cycle census -----------------------------------------------------


@dataclass
class CycleCensus:
    """How often each enumerated cycle through a dual vertex is fully unsatisfied.

    mean_by_length[l] is the expected number of all-unsatisfied cycles
    of length l through the probe vertex under the sampled measure.
    """

    dual_vertex: int
    beta: float
    length_cap: int
    n_samples: int
    counts_by_length: dict[int, int]
    mean_by_length: dict[int, float]


def run_unsat_cycle_census(w: Couplings, x: int, length_cap: int, beta: float,
                           n_samples: int = 10 ** 4, seed: int = 0,
                           burn_in: int = 200,
                           scheme: str = "auto") -> CycleCensus:
    """Score every simple dual cycle through x over equilibrated samples."""
    if length_cap > 12:
        raise ConfigurationError(f"census length cap is 12, got {length_cap}")
    beta = validate_beta(beta)
    geom = w.geometry
    cycles = enumerate_cycles_through(geom, x, length_cap)
    scorer = _CycleScorer(w, cycles)
    hits = np.zeros(len(cycles), dtype=np.int64)

    def score(s):
        counts = scorer.unsat_counts(s)
        hits[counts == scorer.lengths] += 1

    _run_scored_chain(w, beta, n_samples, seed, burn_in, scheme, score)
    counts_by_length: dict[int, int] = {}
    mean_by_length: dict[int, float] = {}
    for i, c in enumerate(cycles):
        counts_by_length[len(c)] = counts_by_length.get(len(c), 0) + 1
        mean_by_length[len(c)] = mean_by_length.get(len(c), 0.0) + int(hits[i]) / n_samples
    return CycleCensus(x, beta, length_cap, n_samples,
                       counts_by_length, mean_by_length)


def write_cycle_census(path, census: CycleCensus) -> None:
    with open(path, "w") as fh:
        fh.write("# format eaglass-cycle-census v1\n")
        fh.write("length,n_cycles,mean_unsat\n")
        for l in sorted(census.counts_by_length):
            fh.write(f"{l},{census.counts_by_length[l]},{census.mean_by_length[l]!r}\n")


# -- cluster sweeps ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Shared knobs for the sweep drivers and the pipeline batch mode."""

    side: int = 16
    betas: list[float] = field(default_factory=lambda: [0.0, 1.0, 2.0])
    n_replicas: int = 1
    n_chains: int = 1
    sweeps: int | None = None
    seed: int = 1
    out_dir: str | None = None
    length_cap: int = 8
    rate_decay: float = 3.0
    theta: float = 1.0
    window_side: int | None = None
    scheme: str = "auto"
    verbose: bool = False

    def __post_init__(self):
        if self.side < 2:
            raise ConfigurationError("side must be >= 2")
        self.betas = [validate_beta(b) for b in self.betas]
        if not self.betas:
            raise ConfigurationError("need at least one beta")
        if self.n_replicas < 1 or self.n_chains < 1:
            raise ConfigurationError("replica and chain counts must be positive")
        if self.sweeps is not None and self.sweeps < 1:
            raise ConfigurationError("sweeps must be positive")
        if self.length_cap > 12:
            raise ConfigurationError("cycle length cap is 12")
        if self.window_side is not None and not (2 <= self.window_side <= self.side - 2):
            raise ConfigurationError(
                f"window side {self.window_side} invalid for torus side {self.side}")


@dataclass
class ReplicaStats:
    """Unsatisfied-set statistics of one (beta, replica, chain) sample."""

    beta: float
    replica: int
    chain: int
    disorder_seed: int
    unsat_density: float
    frustrated_fraction: float
    n_components: int
    largest_cluster_edges: int
    largest_fraction: float
    histogram: dict[int, int]


@dataclass
class ExperimentReport:
    """All rows of a beta scan plus the paired-trend helpers."""

    config: ExperimentConfig
    rows: list[ReplicaStats]
    density_ok: bool

    def fractions_at(self, beta: float) -> list[float]:
        """Largest-cluster fraction per replica (chains averaged), in replica order."""
        out = []
        for r in range(self.config.n_replicas):
            vals = [row.largest_fraction for row in self.rows
                    if row.replica == r and row.beta == beta]
            if not vals:
                raise ConfigurationError(f"beta {beta} not in this report")
            out.append(sum(vals) / len(vals))
        return out

    def trend_zscore(self, beta_hi: float, beta_lo: float) -> float:
        """Paired z-score that fractions at beta_lo exceed those at beta_hi."""
        d = (np.asarray(self.fractions_at(beta_lo))
             - np.asarray(self.fractions_at(beta_hi)))
        if len(d) < 2:
            raise ConfigurationError("need at least two replicas for a z-score")
        se = d.std(ddof=1) / math.sqrt(len(d))
        return float(d.mean() / se) if se > 0 else math.copysign(math.inf, float(d.mean()))

    def to_dict(self) -> dict:
        return asdict(self)


def run_cluster_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    """Scan beta over disorder replicas; chains within a replica share disorder.

    Replica r uses the same derived disorder seed at every beta, so
    per-replica differences across betas isolate the temperature
    effect.  Each sample also rechecks the parity-law consequence that
    the unsatisfied edge density is at least a quarter of the
    frustrated-plaquette density.
    """
    geom = TorusGeometry(cfg.side)
    sweeps = cfg.sweeps if cfg.sweeps is not None else 1000 * cfg.side
    rows: list[ReplicaStats] = []
    density_ok = True
    for beta in cfg.betas:
        for r in range(cfg.n_replicas):
            wseed = replica_seed(cfg.seed, r)
            w = sample_couplings(geom, wseed)
            frustrated = float(frustrated_plaquettes(w).mean())
            for c in range(cfg.n_chains):
                t0 = time.perf_counter()
                _, sigma = sample_ea_pair(cfg.side, wseed, beta, sweeps=sweeps,
                                          spin_seed=c, scheme=cfg.scheme)
                unsat = unsatisfied_set(w, sigma.spins)
                stats = unsat.components()
                hist = stats.histogram(by="edges")
                assert sum(hist.values()) == stats.n_components
                dens = unsat.n_edges / geom.n_dual_edges
                if dens < frustrated / 4.0 - 1e-12:
                    density_ok = False
                rows.append(ReplicaStats(
                    beta=beta, replica=r, chain=c, disorder_seed=wseed,
                    unsat_density=float(dens),
                    frustrated_fraction=frustrated,
                    n_components=stats.n_components,
                    largest_cluster_edges=stats.largest_edges,
                    largest_fraction=float(stats.largest_edges / geom.n_dual_edges),
                    histogram=hist,
                ))
                if cfg.verbose:
                    print(f"[sweep] beta={beta} replica={r} chain={c}: "
                          f"{time.perf_counter() - t0:.2f}s", file=sys.stderr)
    report = ExperimentReport(cfg, rows, density_ok)
    if cfg.out_dir is not None:
        _write_sweep_outputs(cfg, report)
    return report


def _write_sweep_outputs(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "cluster_stats.csv"), "w") as fh:
        fh.write("# format eaglass-cluster-stats v1\n")
        fh.write("beta,replica,chain,disorder_seed,unsat_density,"
                 "largest_edges,largest_fraction,n_components\n")
        for row in report.rows:
            fh.write(f"{row.beta!r},{row.replica},{row.chain},{row.disorder_seed},"
                     f"{row.unsat_density!r},{row.largest_cluster_edges},"
                     f"{row.largest_fraction!r},{row.n_components}\n")
    manifest = {
        "format": "eaglass-cluster-sweep v1",
        "config": asdict(cfg),
        "replica_seeds": [replica_seed(cfg.seed, r) for r in range(cfg.n_replicas)],
        "density_ok": report.density_ok,
        "mean_largest_fraction": {
            repr(b): sum(report.fractions_at(b)) / cfg.n_replicas
            for b in cfg.betas},
    }
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- the full pipeline -------------------------------------------------------------


@dataclass
class PipelineConfig:
    """One end-to-end run: disorder, spins, forest, window, class flip."""

    side: int = 16
    seed: int = 1
    beta: float = 2.0
    sweeps: int | None = None
    spin_seed: int = 0
    scheme: str = "auto"
    window_side: int | None = None
    window_anchor: tuple[int, int] = (0, 0)
    rate_decay: float = 3.0
    theta: float = 1.0
    horizon: float | None = None
    forest_seed: int = 101
    out_dir: str | None = None
    verbose: bool = False

    def __post_init__(self):
        if self.side < 4:
            raise ConfigurationError("pipeline needs side >= 4")
        validate_beta(self.beta)
        if self.window_side is None:
            self.window_side = min(self.side - 2, 8)
        if not (2 <= self.window_side <= self.side - 2):
            raise ConfigurationError(
                f"window side {self.window_side} invalid for torus side {self.side}")
        self.window_anchor = tuple(self.window_anchor)


@dataclass
class PipelineReport:
    """Scalar results of one pipeline run; everything JSON-serializable."""

    config: PipelineConfig
    energy_initial: float
    n_unsat: int
    n_frustrated: int
    parity_ok: bool
    n_components: int
    largest_cluster_edges: int
    forest_edges: int
    forest_acyclic: bool
    partition_preserved: bool
    n_bridges: int
    n_regions: int
    n_nonseparating: int
    n_colors: int
    flip_applied: bool
    class_deltas: list[float]
    best_class: int
    best_delta: float
    y_total: float
    boundary_abs: float
    identity_residual: float
    guaranteed_bound: float
    energy_after_flip: float
    energy_check_ok: bool
    n_encounter: int
    encounter_bound: int

    def to_dict(self) -> dict:
        return asdict(self)


def _stage(cfg, label, t0):
    if cfg.verbose:
        print(f"[pipeline] {label}: {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return time.perf_counter()


def run_pipeline(cfg: PipelineConfig) -> PipelineReport:
    """Sample, extract, decompose, color, flip; check every stage invariant.

    Invariant failures raise AssertionError: they mean the code is
    wrong, not the inputs.  With out_dir set, the run also writes a
    manifest plus the standard CSV artifacts, byte-identical across
    repeats of the same config.
    """
    t = time.perf_counter()
    w, sigma = sample_ea_pair(cfg.side, cfg.seed, cfg.beta, sweeps=cfg.sweeps,
                              spin_seed=cfg.spin_seed, scheme=cfg.scheme)
    geom = w.geometry
    e0 = torus_hamiltonian(w, sigma)
    t = _stage(cfg, "sample", t)

    unsat = unsatisfied_set(w, sigma.spins)
    frustrated = frustrated_plaquettes(w)
    deg = np.zeros(geom.n_plaquettes, dtype=np.int64)
    for de in unsat.edge_ids():
        a, b = geom.dual_edge_endpoints(int(de))
        deg[a] += 1
        deg[b] += 1
    parity_ok = bool(np.array_equal(deg % 2 == 1, frustrated))
    assert parity_ok, "unsatisfied set: parity law violated"
    stats = unsat.components()
    t = _stage(cfg, "unsatisfied set", t)

    rng = np.random.default_rng(np.random.SeedSequence(
        [cfg.seed % (2 ** 63), cfg.forest_seed % (2 ** 63), 43]))
    forest = extract_forest(unsat, rng, rate_decay=cfg.rate_decay,
                            theta=cfg.theta, horizon=cfg.horizon)
    acyclic = is_acyclic(forest)
    preserved = same_partition(unsat, forest)
    assert acyclic, "forest stage: extraction left a cycle"
    assert preserved, "forest stage: component partition changed"
    t = _stage(cfg, "forest", t)

    window = Window(geom, cfg.window_side, cfg.window_anchor)
    bridges = find_bridges(forest, window)
    dec = decompose_regions(bridges, window)
    assert dec.n_nonseparating == 0, "window stage: a bridge edge failed to separate"
    colors = color_regions(dec)
    n_colors = max(colors) + 1 if colors else 0
    report_trees = count_encounter_points(forest, window)
    t = _stage(cfg, "window", t)

    flip_applied = bridges.n_edges > 0
    if flip_applied:
        outcome = best_color_class_flip(dec, colors, w, sigma)
        assert abs(outcome.identity_residual) <= 1e-9 * max(1.0, outcome.boundary_abs), \
            "flip stage: class-delta identity failed"
        flipped = sigma.spins.copy()
        best_members = [v for r, verts in enumerate(dec.regions)
                        if colors[r] == outcome.best_class for v in verts]
        flipped[best_members] *= -1
        e1 = torus_hamiltonian(w, SpinConfig(geom, flipped))
        energy_ok = abs(e1 - (e0 + outcome.best_delta)) <= 1e-9 * max(1.0, abs(e0))
        assert energy_ok, "flip stage: delta does not match recomputed energy"
        class_deltas = [float(d) for d in outcome.deltas]
        flip_fields = dict(
            class_deltas=class_deltas, best_class=outcome.best_class,
            best_delta=float(outcome.best_delta), y_total=float(outcome.y_total),
            boundary_abs=float(outcome.boundary_abs),
            identity_residual=float(outcome.identity_residual),
            guaranteed_bound=float(outcome.guaranteed_bound),
            energy_after_flip=float(e1), energy_check_ok=energy_ok)
    else:
        outcome = None
        flip_fields = dict(
            class_deltas=[], best_class=-1, best_delta=0.0, y_total=0.0,
            boundary_abs=0.0, identity_residual=0.0, guaranteed_bound=0.0,
            energy_after_flip=float(e0), energy_check_ok=True)
    _stage(cfg, "flip", t)

    report = PipelineReport(
        config=cfg,
        energy_initial=float(e0),
        n_unsat=unsat.n_edges,
        n_frustrated=int(frustrated.sum()),
        parity_ok=parity_ok,
        n_components=stats.n_components,
        largest_cluster_edges=stats.largest_edges,
        forest_edges=forest.n_edges,
        forest_acyclic=acyclic,
        partition_preserved=preserved,
        n_bridges=bridges.n_edges,
        n_regions=dec.n_regions,
        n_nonseparating=dec.n_nonseparating,
        n_colors=n_colors,
        flip_applied=flip_applied,
        n_encounter=report_trees.n_encounter,
        encounter_bound=report_trees.encounter_bound,
        **flip_fields,
    )
    if cfg.out_dir is not None:
        _write_pipeline_outputs(cfg.out_dir, report, w, unsat, forest, dec, colors)
    return report


def _write_pipeline_outputs(out_dir, report, w, unsat, forest, dec, colors):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"format": "eaglass-pipeline v1", "report": report.to_dict()}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_component_histogram(os.path.join(out_dir, "cluster_histogram.csv"),
                              unsat.components())
    write_dual_edge_list(os.path.join(out_dir, "forest.csv"), forest)
    write_region_grid(os.path.join(out_dir, "region_grid.csv"), dec, colors)
    n = dec.window.side
    write_bridge_stats(os.path.join(out_dir, "bridge_stats.csv"),
                       [(n, dec.bridges.n_edges, bridge_weight(dec.bridges, w))])


def run_many(configs, jobs: int = 1) -> list[PipelineReport]:
    """run_pipeline over several configs; results always in input order."""
    configs = list(configs)
    if jobs <= 1:
        return [run_pipeline(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_pipeline, configs))
