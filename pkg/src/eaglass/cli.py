"""Command-line front end.

Exit codes: 0 success, 1 configuration or input error (message on
stderr), 2 internal invariant failure.  Every subcommand is
deterministic given its seeds: output files carry format-version
headers and repeat bit for bit.  Flags override values from an optional
flat JSON config file (--config), which in turn override built-in
defaults.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .disorder import load_snapshot, sample_couplings, save_snapshot
from .enumeration import (check_animal_bounds, cycle_count_table,
                          enumerate_animals, enumerate_cycles_through,
                          independent_animal_counts, write_count_table)
from .errors import (BoundedRunError, ConfigurationError,
                     ContractViolationError, NonContractibleCycleError,
                     SizeLimitError)
from .experiments import (PipelineConfig, measure_flip_bounds, run_many,
                          write_flip_bound_table)
from .forest import extract_forest, is_acyclic, same_partition, write_dual_edge_list
from .frustration import frustrated_plaquettes, unsatisfied_set, write_component_histogram
from .gibbs import (SpinConfig, exact_boltzmann, flip_region_delta,
                    random_spins, restricted_hamiltonian, sample_ea_pair,
                    torus_hamiltonian)
from .lattice import BoxGeometry, TorusGeometry

_USER_ERRORS = (ConfigurationError, ContractViolationError, SizeLimitError,
                NonContractibleCycleError, BoundedRunError, OSError,
                json.JSONDecodeError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_config(args) -> dict:
    path = getattr(args, "config", None)
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigurationError("config file must hold a flat JSON object")
    known = set(vars(args))
    for key in cfg:
        if key not in known:
            print(f"warning: config key {key!r} not used by this subcommand",
                  file=sys.stderr)
    return cfg


def _get(args, cfg, key, default=None):
    """Flag value if given, else config-file value, else default."""
    v = getattr(args, key, None)
    if v is not None:
        return v
    if key in cfg:
        return cfg[key]
    return default


def _require(value, flag):
    if value is None:
        raise ConfigurationError(f"{flag} is required")
    return value


def _chain_path(out: str, k: int, chains: int) -> str:
    if chains == 1:
        return out
    root, ext = os.path.splitext(out)
    return f"{root}.chain{k}{ext}"


# -- subcommands ----------------------------------------------------------------


def _cmd_sample(args, cfg) -> int:
    side = int(_get(args, cfg, "side", 16))
    seed = int(_get(args, cfg, "seed", 1))
    beta = _get(args, cfg, "beta")
    out = _require(_get(args, cfg, "out"), "--out")
    chains = int(_get(args, cfg, "chains", 1))
    if chains < 1:
        raise ConfigurationError("--chains must be positive")
    if beta is None:
        w = sample_couplings(TorusGeometry(side), seed)
        save_snapshot(out, w)
        print(f"wrote {out} side={side} seed={seed} couplings-only")
        return 0
    beta = float(beta)
    sweeps = _get(args, cfg, "sweeps")
    sweeps = int(sweeps) if sweeps is not None else None
    spin_seed = int(_get(args, cfg, "spin_seed", 0))
    scheme = _get(args, cfg, "scheme", "auto")
    for k in range(chains):
        w, sigma = sample_ea_pair(side, seed, beta, sweeps=sweeps,
                                  spin_seed=spin_seed + k, scheme=scheme)
        path = _chain_path(out, k, chains)
        save_snapshot(path, w, sigma.spins, beta)
        print(f"wrote {path} side={side} seed={seed} beta={beta!r} "
              f"energy={torus_hamiltonian(w, sigma)!r}")
    return 0


def _cmd_analyze(args, cfg) -> int:
    path = _require(_get(args, cfg, "input"), "--in")
    w, spins, meta = load_snapshot(path)
    if spins is None:
        raise ConfigurationError(f"{path} has no spin section; analyze needs spins")
    if not isinstance(w.geometry, TorusGeometry):
        raise ConfigurationError("analyze expects a torus snapshot")
    geom = w.geometry
    unsat = unsatisfied_set(w, spins)
    frustrated = frustrated_plaquettes(w)
    deg = np.zeros(geom.n_plaquettes, dtype=np.int64)
    for de in unsat.edge_ids():
        a, b = geom.dual_edge_endpoints(int(de))
        deg[a] += 1
        deg[b] += 1
    parity_ok = bool(np.array_equal(deg % 2 == 1, frustrated))
    stats = unsat.components()
    sigma = SpinConfig(geom, spins)
    print(f"side={geom.side}")
    print(f"seed={w.seed}")
    if "beta" in meta:
        print(f"beta={meta['beta']!r}")
    print(f"energy={torus_hamiltonian(w, sigma)!r}")
    print(f"unsat_edges={unsat.n_edges}")
    print(f"unsat_density={unsat.n_edges / geom.n_dual_edges!r}")
    print(f"frustrated={int(frustrated.sum())}")
    print(f"parity_ok={parity_ok}")
    print(f"components={stats.n_components}")
    print(f"largest_edges={stats.largest_edges}")
    print(f"largest_vertices={stats.largest_vertices}")
    hist = _get(args, cfg, "hist")
    if hist is not None:
        write_component_histogram(hist, stats, by=_get(args, cfg, "by", "edges"))
        print(f"wrote {hist}")
    if not parity_ok:
        raise AssertionError("parity law violated in analyze")
    return 0


def _cmd_enumerate(args, cfg) -> int:
    mode = _get(args, cfg, "mode", "vertex")
    n_max = int(_require(_get(args, cfg, "max"), "--max"))
    if mode == "cycle":
        table = cycle_count_table(n_max)
    else:
        table = enumerate_animals(mode, n_max)
    out = _get(args, cfg, "out")
    if out is not None:
        write_count_table(out, table)
        print(f"wrote {out}")
    else:
        for n in sorted(table.counts):
            print(f"{n},{table.counts[n]}")
    if mode != "cycle":
        verdict = check_animal_bounds(table)
        print(f"bounds_ok={verdict.passed}")
        if not verdict.passed:
            raise AssertionError("animal counts broke their proven bounds")
    return 0


def _cmd_forest(args, cfg) -> int:
    path = _require(_get(args, cfg, "input"), "--in")
    out = _require(_get(args, cfg, "out"), "--out")
    seed = int(_get(args, cfg, "seed", 1))
    rate_decay = float(_get(args, cfg, "rate_decay", 3.0))
    theta = float(_get(args, cfg, "theta", 1.0))
    horizon = _get(args, cfg, "horizon")
    horizon = float(horizon) if horizon is not None else None
    w, spins, _ = load_snapshot(path)
    if spins is None:
        raise ConfigurationError(f"{path} has no spin section; forest needs spins")
    unsat = unsatisfied_set(w, spins)
    rng = np.random.default_rng(np.random.SeedSequence([seed % (2 ** 63), 43]))
    forest = extract_forest(unsat, rng, rate_decay=rate_decay, theta=theta,
                            horizon=horizon)
    write_dual_edge_list(out, forest)
    acyclic = is_acyclic(forest)
    preserved = same_partition(unsat, forest)
    print(f"wrote {out}")
    print(f"unsat_edges={unsat.n_edges}")
    print(f"forest_edges={forest.n_edges}")
    print(f"acyclic={acyclic}")
    print(f"partition_preserved={preserved}")
    if not (acyclic and preserved):
        raise AssertionError("forest extraction violated its own contract")
    return 0


def _unit_square(geom: TorusGeometry, x: int) -> tuple[int, ...]:
    """The length-4 dual cycle through x, its east and north neighbors."""
    east = geom.dual_neighbors(x)[0]
    north = geom.dual_neighbors(x)[1]
    return (2 * x + 0, 2 * east + 1, 2 * north + 0, 2 * x + 1)


def _cmd_flip_check(args, cfg) -> int:
    side = int(_get(args, cfg, "side", 16))
    seed = int(_get(args, cfg, "seed", 1))
    beta = float(_get(args, cfg, "beta", 1.0))
    n_cycles = int(_get(args, cfg, "cycles", 5))
    samples = int(_get(args, cfg, "samples", 10 ** 5))
    burn_in = int(_get(args, cfg, "burn_in", 200))
    chain_seed = int(_get(args, cfg, "chain_seed", 0))
    geom = TorusGeometry(side)
    if n_cycles < 1 or n_cycles > geom.n_plaquettes:
        raise ConfigurationError(f"--cycles must be in [1, {geom.n_plaquettes}]")
    w = sample_couplings(geom, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed % (2 ** 63), 7]))
    verts = rng.choice(geom.n_plaquettes, size=n_cycles, replace=False)
    cycles = [_unit_square(geom, int(x)) for x in verts]
    results = measure_flip_bounds(w, cycles, beta, samples, seed=chain_seed,
                                  burn_in=burn_in)
    all_ok = True
    print("cycle_index,dual_vertex,weight,bound,frequency,std_error,within")
    for i, r in enumerate(results):
        all_ok = all_ok and r.within_bound and r.thresholds_within()
        print(f"{i},{int(verts[i])},{r.cycle_weight!r},{r.bound!r},"
              f"{r.frequency!r},{r.std_error!r},{r.within_bound}")
    print(f"all_within={all_ok}")
    out = _get(args, cfg, "out")
    if out is not None:
        write_flip_bound_table(out, results)
        print(f"wrote {out}")
    return 0


def _cmd_pipeline(args, cfg) -> int:
    side = int(_get(args, cfg, "side", 16))
    seed = int(_get(args, cfg, "seed", 1))
    beta = float(_get(args, cfg, "beta", 2.0))
    sweeps = _get(args, cfg, "sweeps")
    sweeps = int(sweeps) if sweeps is not None else None
    window_side = _get(args, cfg, "window")
    window_side = int(window_side) if window_side is not None else None
    anchor = _get(args, cfg, "anchor", (0, 0))
    n_runs = int(_get(args, cfg, "runs", 1))
    jobs = int(_get(args, cfg, "jobs", 1))
    out_dir = _get(args, cfg, "out_dir")
    verbose = bool(_get(args, cfg, "verbose", False))
    if n_runs < 1:
        raise ConfigurationError("--runs must be positive")
    configs = []
    for r in range(n_runs):
        run_seed = seed + r
        run_dir = None
        if out_dir is not None:
            run_dir = (os.path.join(out_dir, f"run_{run_seed}")
                       if n_runs > 1 else out_dir)
        configs.append(PipelineConfig(
            side=side, seed=run_seed, beta=beta, sweeps=sweeps,
            spin_seed=int(_get(args, cfg, "spin_seed", 0)),
            scheme=_get(args, cfg, "scheme", "auto"),
            window_side=window_side, window_anchor=tuple(anchor),
            rate_decay=float(_get(args, cfg, "rate_decay", 3.0)),
            theta=float(_get(args, cfg, "theta", 1.0)),
            horizon=_get(args, cfg, "horizon"),
            out_dir=run_dir, verbose=verbose))
    reports = run_many(configs, jobs=jobs)
    for rep in reports:
        print(f"seed={rep.config.seed} energy={rep.energy_initial!r} "
              f"unsat={rep.n_unsat} forest={rep.forest_edges} "
              f"bridges={rep.n_bridges} regions={rep.n_regions} "
              f"colors={rep.n_colors} best_delta={rep.best_delta!r} "
              f"encounter={rep.n_encounter}")
    return 0


# -- verify ----------------------------------------------------------------------


def _check_ids():
    for side in (2, 3, 5):
        geom = TorusGeometry(side)
        for v in range(geom.n_vertices):
            assert geom.vertex_id(*geom.vertex_coord(v)) == v
        for e in range(geom.n_edges):
            d, x, y = geom.edge_parts(e)
            assert geom.edge_id(d, x, y) == e
            assert geom.primal_edge(geom.dual_edge(e)) == e
            assert geom.dual_edge(geom.primal_edge(e)) == e
        for p in range(geom.n_plaquettes):
            crossed = sorted(geom.dual_edge(e) for e in geom.plaquette_edges(p))
            assert crossed == sorted(geom.dual_incident_edges(p))


def _check_box_closure():
    host = TorusGeometry(6)
    box = BoxGeometry(3, host=host, anchor=(1, 1))
    closure = set(box.closure_vertices())
    direct = [e for e in range(host.n_edges)
              if all(v in closure for v in host.edge_endpoints(e))]
    assert sorted(box.closure_edges()) == direct


def _check_parity():
    geom = TorusGeometry(6)
    for seed in range(5):
        w = sample_couplings(geom, seed)
        rng = np.random.default_rng(seed + 11)
        spins = random_spins(geom, rng).spins
        unsat = unsatisfied_set(w, spins)
        frustrated = frustrated_plaquettes(w)
        deg = np.zeros(geom.n_plaquettes, dtype=np.int64)
        for de in unsat.edge_ids():
            a, b = geom.dual_edge_endpoints(int(de))
            deg[a] += 1
            deg[b] += 1
        assert np.array_equal(deg % 2 == 1, frustrated)


def _check_snapshot_roundtrip():
    geom = TorusGeometry(4)
    w = sample_couplings(geom, 99)
    rng = np.random.default_rng(3)
    spins = random_spins(geom, rng).spins
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "t.snap")
        save_snapshot(path, w, spins, 1.25)
        w2, spins2, meta = load_snapshot(path)
        assert np.array_equal(w.weights, w2.weights)
        assert np.array_equal(spins, spins2)
        assert meta["beta"] == 1.25
        with open(path) as fh:
            first = fh.read()
        save_snapshot(path, w2, spins2, meta["beta"])
        with open(path) as fh:
            assert fh.read() == first


def _check_animals():
    table = enumerate_animals("vertex", 5)
    assert table.counts == {1: 1, 2: 4, 3: 18, 4: 76, 5: 315}
    assert independent_animal_counts(5).counts == table.counts
    assert check_animal_bounds(table).passed


def _check_cycles():
    geom = TorusGeometry(8)
    cycles = enumerate_cycles_through(geom, geom.vertex_id(3, 3), 4)
    assert len(cycles) == 4 and all(len(c) == 4 for c in cycles)
    for c in cycles:
        assert len(geom.cycle_interior(c)) == 1


def _check_boltzmann():
    host = TorusGeometry(6)
    w = sample_couplings(host, 5)
    box = BoxGeometry(2, host=host, anchor=(2, 2))
    rng = np.random.default_rng(17)
    full = random_spins(host, rng)
    tau = {v: int(full.spins[v]) for v in box.exterior_boundary()}
    table = exact_boltzmann(w, box, tau, 0.8)
    assert abs(table.probs.sum() - 1.0) < 1e-12
    hv = box.host_vertices()
    direct = np.empty(1 << box.n_vertices)
    for k in range(1 << box.n_vertices):
        spins = full.spins.copy()
        for i, v in enumerate(hv):
            spins[v] = 1 if (k >> i) & 1 else -1
        direct[k] = restricted_hamiltonian(w, box, SpinConfig(host, spins), tau)
    logw = -0.8 * direct
    logw -= logw.max()
    ref = np.exp(logw) / np.exp(logw).sum()
    assert np.abs(ref - table.probs).max() < 1e-12


def _check_flip_delta():
    geom = TorusGeometry(5)
    w = sample_couplings(geom, 21)
    rng = np.random.default_rng(4)
    for _ in range(20):
        sigma = random_spins(geom, rng)
        size = int(rng.integers(1, 6))
        region = list(rng.choice(geom.n_vertices, size=size, replace=False))
        delta = flip_region_delta(w, sigma, region)
        flipped = sigma.spins.copy()
        flipped[region] *= -1
        direct = (torus_hamiltonian(w, SpinConfig(geom, flipped))
                  - torus_hamiltonian(w, sigma))
        assert abs(delta - direct) < 1e-12
        comp = [v for v in range(geom.n_vertices) if v not in region]
        assert abs(flip_region_delta(w, sigma, comp) - delta) < 1e-12


def _check_forest():
    for seed in (1, 2, 3):
        w, sigma = sample_ea_pair(8, seed, 1.5, sweeps=400)
        unsat = unsatisfied_set(w, sigma.spins)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 43]))
        forest = extract_forest(unsat, rng)
        assert is_acyclic(forest)
        assert same_partition(unsat, forest)


def _check_pipeline():
    from .experiments import run_pipeline
    cfg = PipelineConfig(side=8, seed=3, beta=1.5, sweeps=400, window_side=4)
    rep = run_pipeline(cfg)
    assert rep.parity_ok and rep.forest_acyclic and rep.partition_preserved
    assert rep.energy_check_ok and rep.n_nonseparating == 0


def _check_disorder_stream():
    geom = TorusGeometry(160)  # 51200 weights
    w = sample_couplings(geom, 2024)
    assert abs(float(w.weights.mean())) < 0.02
    assert 0.93 < float(w.weights.var()) < 1.07
    w2 = sample_couplings(TorusGeometry(80), 2024)
    # same seed, smaller torus: shared edge ids get identical weights
    shared = 2 * TorusGeometry(80).n_vertices
    assert np.array_equal(w.weights[:shared], w2.weights)


_QUICK_CHECKS = [
    ("lattice ids", _check_ids),
    ("box closure", _check_box_closure),
    ("parity law", _check_parity),
    ("snapshot round trip", _check_snapshot_roundtrip),
    ("animal counts", _check_animals),
    ("cycles through a vertex", _check_cycles),
    ("exact Boltzmann table", _check_boltzmann),
    ("region flip delta", _check_flip_delta),
    ("disorder stream", _check_disorder_stream),
]

_FULL_CHECKS = _QUICK_CHECKS + [
    ("forest extraction", _check_forest),
    ("pipeline invariants", _check_pipeline),
]


def _cmd_verify(args, cfg) -> int:
    checks = _QUICK_CHECKS if _get(args, cfg, "quick") else _FULL_CHECKS
    failures = 0
    for name, fn in checks:
        try:
            fn()
        except Exception as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"pass {name}")
    print(f"passed {len(checks) - failures}/{len(checks)}")
    return 0 if failures == 0 else 2


# -- parser ----------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="flat JSON file with default flag values")
    p.add_argument("--seed", type=int, help="master seed (default 1)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="eaglass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    parser.set_defaults(func=None)

    p = sub.add_parser("sample", help="draw couplings (and optionally spins) to a snapshot")
    _add_common(p)
    p.add_argument("--side", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--spin-seed", dest="spin_seed", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--scheme", choices=["auto", "sequential", "checkerboard"])
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("analyze", help="frustration statistics of a spin snapshot")
    _add_common(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--hist", help="write the component-size histogram CSV here")
    p.add_argument("--by", choices=["vertices", "edges"])
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("enumerate", help="exact animal or cycle count tables")
    _add_common(p)
    p.add_argument("--mode", choices=["vertex", "edge", "cycle"])
    p.add_argument("--max", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("forest", help="extract the cycle-free remainder of a snapshot's unsatisfied set")
    _add_common(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--rate-decay", dest="rate_decay", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--horizon", type=float)
    p.set_defaults(func=_cmd_forest)

    p = sub.add_parser("flip-check", help="measure all-unsatisfied cycle frequencies against their bounds")
    _add_common(p)
    p.add_argument("--side", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--cycles", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--chain-seed", dest="chain_seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_flip_check)

    p = sub.add_parser("pipeline", help="full run: sample, forest, window, class flip")
    _add_common(p)
    p.add_argument("--side", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--spin-seed", dest="spin_seed", type=int)
    p.add_argument("--scheme", choices=["auto", "sequential", "checkerboard"])
    p.add_argument("--window", type=int)
    p.add_argument("--anchor", type=int, nargs=2)
    p.add_argument("--rate-decay", dest="rate_decay", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--runs", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--verbose", action="store_true", default=None)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("verify", help="run the built-in property suites")
    _add_common(p)
    p.add_argument("--quick", action="store_true", default=None)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.func is None:
            raise _UsageError("a subcommand is required (see --help)")
        cfg = _load_config(args)
        return args.func(args, cfg)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
