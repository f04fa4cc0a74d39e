"""Window analysis: bridges, regions, coloring, class flips, encounters.

Bridge sets are checked against an all-pairs boundary-path oracle built
with networkx; flip energies against whole-torus Hamiltonian
differences.
"""

import itertools

import networkx as nx
import numpy as np
import pytest

from eaglass import (
    ConfigurationError,
    ContractViolationError,
    Couplings,
    DualSubgraph,
    SpinConfig,
    TorusGeometry,
    Window,
    best_color_class_flip,
    color_regions,
    count_encounter_points,
    decompose_regions,
    extract_forest,
    find_bridges,
    sample_couplings,
    sample_ea_pair,
    torus_hamiltonian,
    unsatisfied_set,
)
from eaglass.analysis import RegionDecomposition, bridge_weight, write_bridge_stats, write_region_grid
from eaglass.enumeration import dual_edge_between

from conftest import make_couplings


def subgraph(geom, dual_edges):
    member = np.zeros(geom.n_dual_edges, dtype=bool)
    member[list(dual_edges)] = True
    return DualSubgraph(geom, member)


def dual_path(geom, coords):
    """Dual edges along consecutive dual coordinates."""
    ids = [geom.vertex_id(x % geom.side, y % geom.side) for x, y in coords]
    return [dual_edge_between(geom, ids[k], ids[k + 1]) for k in range(len(ids) - 1)]


def window_graph(f, window):
    inside = set(window.dual_vertices())
    G = nx.Graph()
    for de in f.edge_ids():
        a, b = f.geometry.dual_edge_endpoints(int(de))
        if a in inside and b in inside:
            G.add_edge(a, b, de=int(de))
    return G


def oracle_bridges(f, window):
    """Union of edges on paths between boundary dual vertices (networkx)."""
    G = window_graph(f, window)
    boundary = window.boundary_dual_vertices() & set(G)
    keep = set()
    for a, b in itertools.combinations(sorted(boundary), 2):
        if nx.has_path(G, a, b):
            path = nx.shortest_path(G, a, b)  # unique in a forest
            keep.update(G[u][v]["de"] for u, v in zip(path, path[1:]))
    return keep


def sampled_forest(seed, side=10, beta=1.2):
    w, sigma = sample_ea_pair(side, seed=seed, beta=beta, sweeps=200)
    g = unsatisfied_set(w, sigma.spins)
    return w, sigma, extract_forest(g, np.random.default_rng(900 + seed))


# -- windows ------------------------------------------------------------------------


def test_window_validation():
    host = TorusGeometry(8)
    with pytest.raises(ConfigurationError):
        Window(host, 7)
    with pytest.raises(ConfigurationError):
        Window(host, 1)
    with pytest.raises(ConfigurationError):
        Window(host, 4, anchor=(8, 0))
    Window(host, 6, anchor=(5, 7))  # wrapping anchors are fine


def test_window_counts():
    window = Window(TorusGeometry(9), 5, anchor=(2, 3))
    n = window.side
    assert len(window.dual_vertices()) == n * n
    assert len(window.boundary_dual_vertices()) == 4 * n - 4
    assert len(window.dual_edges_inside()) == 2 * n * (n - 1)
    assert len(window.interior_vertices()) == (n - 1) ** 2
    assert len(window.boundary_cut_edges()) == 4 * (n - 1)


# -- bridges ------------------------------------------------------------------------


def test_interior_tree_has_no_bridges():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    f = subgraph(geom, dual_path(geom, [(2, 2), (3, 2), (3, 3)]))
    assert find_bridges(f, window).n_edges == 0


def test_straight_crossing_path_is_all_bridge():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    path = dual_path(geom, [(1 + i, 3) for i in range(5)])
    f = subgraph(geom, path)
    bridges = find_bridges(f, window)
    assert set(map(int, bridges.edge_ids())) == set(path)


def test_dangling_branch_is_pruned():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    path = dual_path(geom, [(1 + i, 2) for i in range(5)])
    spur = dual_path(geom, [(3, 2), (3, 3)])  # tip (3,3) is interior
    f = subgraph(geom, set(path) | set(spur))
    bridges = find_bridges(f, window)
    assert set(map(int, bridges.edge_ids())) == set(path)


def test_t_tree_matches_all_pairs_oracle():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    stem = dual_path(geom, [(3, 1), (3, 2), (3, 3)])
    bar = dual_path(geom, [(1, 3), (2, 3), (3, 3), (4, 3), (5, 3)])
    f = subgraph(geom, set(stem) | set(bar))
    bridges = find_bridges(f, window)
    # three tips on the ring: every edge lies on some tip-to-tip path
    assert set(map(int, bridges.edge_ids())) == set(stem) | set(bar)
    assert set(map(int, bridges.edge_ids())) == oracle_bridges(f, window)


def test_bridges_match_oracle_on_sampled_forests():
    for seed in range(12):
        _, _, f = sampled_forest(seed)
        window = Window(f.geometry, 6, anchor=(1, 2))
        bridges = find_bridges(f, window)
        assert set(map(int, bridges.edge_ids())) == oracle_bridges(f, window)


def test_cycle_in_window_rejected():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    square = dual_path(geom, [(2, 2), (3, 2), (3, 3), (2, 3), (2, 2)])
    with pytest.raises(ContractViolationError):
        find_bridges(subgraph(geom, square), window)


# -- regions ------------------------------------------------------------------------


def test_no_bridges_single_region():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    dec = decompose_regions(subgraph(geom, []), window)
    assert dec.n_regions == 1
    assert sorted(dec.regions[0]) == window.interior_vertices()
    assert dec.adjacency == [set()]


def test_crossing_path_two_adjacent_regions():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    path = dual_path(geom, [(1 + i, 3) for i in range(5)])
    bridges = find_bridges(subgraph(geom, path), window)
    dec = decompose_regions(bridges, window)
    assert dec.n_regions == 2
    assert dec.adjacency[0] == {1} and dec.adjacency[1] == {0}
    sizes = sorted(len(r) for r in dec.regions)
    assert sum(sizes) == 16  # exact partition of the 4x4 block


def test_region_partition_and_euler_bound():
    for seed in range(12):
        _, _, f = sampled_forest(seed)
        window = Window(f.geometry, 6, anchor=(0, 0))
        bridges = find_bridges(f, window)
        dec = decompose_regions(bridges, window)
        labeled = [v for r in dec.regions for v in r]
        assert sorted(labeled) == window.interior_vertices()
        assert all(dec.region_of[v] == r
                   for r, verts in enumerate(dec.regions) for v in verts)
        for r, nb in enumerate(dec.adjacency):
            assert r not in nb
            assert all(r in dec.adjacency[q] for q in nb)
        assert dec.n_regions <= bridges.n_edges + 1


# -- coloring -----------------------------------------------------------------------


def proper(adjacency, colors):
    return all(colors[u] != colors[v] for v, nb in enumerate(adjacency) for u in nb)


def fake_decomposition(adjacency):
    return RegionDecomposition(None, None, {}, [[] for _ in adjacency],
                               adjacency, set(), 0)


def test_two_regions_two_colors():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    path = dual_path(geom, [(1 + i, 3) for i in range(5)])
    dec = decompose_regions(find_bridges(subgraph(geom, path), window), window)
    colors = color_regions(dec)
    assert sorted(set(colors)) == [0, 1]


def test_parallel_strips_alternate_two_colors():
    geom = TorusGeometry(12)
    window = Window(geom, 7, anchor=(1, 1))
    edges = set()
    for row in (2, 4, 6):
        edges |= set(dual_path(geom, [(1 + i, row) for i in range(7)]))
    dec = decompose_regions(find_bridges(subgraph(geom, edges), window), window)
    assert dec.n_regions == 4  # strips
    colors = color_regions(dec)
    assert max(colors) == 1 and proper(dec.adjacency, colors)


def test_five_color_reduction_paths():
    odd_ring = [{1, 4}, {0, 2}, {1, 3}, {2, 4}, {3, 0}]
    colors = color_regions(fake_decomposition(odd_ring))
    assert proper(odd_ring, colors) and max(colors) == 2
    ico = nx.icosahedral_graph()  # 5-regular planar: exercises the merge rule
    adjacency = [set(ico[v]) for v in range(12)]
    colors = color_regions(fake_decomposition(adjacency))
    assert proper(adjacency, colors) and max(colors) <= 4
    k6 = [set(range(6)) - {v} for v in range(6)]
    with pytest.raises(ContractViolationError):
        color_regions(fake_decomposition(k6))


def test_sampled_colorings_stay_proper():
    for seed in range(12):
        _, _, f = sampled_forest(seed)
        window = Window(f.geometry, 6, anchor=(2, 1))
        dec = decompose_regions(find_bridges(f, window), window)
        colors = color_regions(dec)
        assert len(colors) == dec.n_regions
        assert proper(dec.adjacency, colors)
        assert max(colors, default=0) <= 4


# -- class flips --------------------------------------------------------------------


def crossing_instance(bridge_weight_value=-2.0, disorder_seed=None):
    """Window split in two by a horizontal path of unsatisfied edges."""
    geom = TorusGeometry(9)
    window = Window(geom, 4, anchor=(1, 1))
    path = dual_path(geom, [(1 + i, 2) for i in range(4)])
    crossed = [geom.primal_edge(de) for de in path]
    if disorder_seed is None:
        w = make_couplings(geom, {e: bridge_weight_value for e in crossed})
    else:
        base = sample_couplings(geom, disorder_seed)
        wts = base.weights.copy()
        wts[crossed] = bridge_weight_value
        w = Couplings(geometry=geom, weights=wts, seed=disorder_seed)
    sigma = SpinConfig(geom, np.ones(geom.n_vertices, dtype=np.int8))
    bridges = find_bridges(subgraph(geom, path), window)
    dec = decompose_regions(bridges, window)
    return geom, window, w, sigma, dec, color_regions(dec)


def class_members(dec, colors, c):
    return [v for r, verts in enumerate(dec.regions) if colors[r] == c for v in verts]


def test_flip_deltas_match_hamiltonian_oracle():
    geom, _, w, sigma, dec, colors = crossing_instance(disorder_seed=33)
    out = best_color_class_flip(dec, colors, w, sigma)
    h0 = torus_hamiltonian(w, sigma)
    for c, delta in enumerate(out.deltas):
        flipped = sigma.copy()
        flipped.spins[class_members(dec, colors, c)] *= -1
        assert delta == pytest.approx(torus_hamiltonian(w, flipped) - h0, abs=1e-9)
    assert out.best_delta == min(out.deltas)
    assert abs(out.identity_residual) < 1e-9
    assert out.best_delta <= out.guaranteed_bound + 1e-9


def test_heavy_unsatisfied_bridges_force_negative_delta():
    _, _, w, sigma, dec, colors = crossing_instance(bridge_weight_value=-3.0)
    out = best_color_class_flip(dec, colors, w, sigma)
    # boundary weight is zero here, so 2Y > |w|(cut) holds with room
    assert out.boundary_abs == 0.0
    assert out.y_total == pytest.approx(9.0)
    assert out.best_delta < 0
    assert abs(out.identity_residual) < 1e-9


def test_satisfied_bridge_is_rejected():
    geom, _, w, sigma, dec, colors = crossing_instance()
    wts = w.weights.copy()
    wts[geom.primal_edge(int(dec.bridges.edge_ids()[0]))] = +1.0
    with pytest.raises(ContractViolationError):
        best_color_class_flip(dec, colors, Couplings(geom, wts, 0), sigma)


def test_empty_bridge_flip_is_the_boundary_cut():
    geom = TorusGeometry(9)
    window = Window(geom, 4, anchor=(1, 1))
    w = sample_couplings(geom, 5)
    sigma = SpinConfig(geom, np.ones(geom.n_vertices, dtype=np.int8))
    dec = decompose_regions(subgraph(geom, []), window)
    out = best_color_class_flip(dec, color_regions(dec), w, sigma)
    cut = window.boundary_cut_edges()
    assert out.deltas == [pytest.approx(2.0 * w.weights[cut].sum())]
    assert abs(out.identity_residual) < 1e-9


def test_sampled_flips_respect_identity_and_bound():
    hits = 0
    for seed in range(12):
        w, sigma, f = sampled_forest(seed, beta=1.5)
        window = Window(f.geometry, 6, anchor=(1, 1))
        dec = decompose_regions(find_bridges(f, window), window)
        colors = color_regions(dec)
        out = best_color_class_flip(dec, colors, w, sigma)
        assert abs(out.identity_residual) < 1e-9
        assert out.best_delta <= out.guaranteed_bound + 1e-9
        assert out.best_delta == min(out.deltas)
        hits += out.y_total > 0
    assert hits > 0  # at least some windows saw real bridges


# -- encounter points ----------------------------------------------------------------


def test_path_has_no_encounters():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    f = subgraph(geom, dual_path(geom, [(1 + i, 3) for i in range(5)]))
    report = count_encounter_points(f, window)
    assert report.n_encounter == 0
    assert report.arm_counts == {2: 1}
    assert report.encounter_bound == 16


def test_plus_tree_has_one_encounter():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    center = (3, 3)
    arms = (dual_path(geom, [center, (2, 3), (1, 3)])
            + dual_path(geom, [center, (4, 3), (5, 3)])
            + dual_path(geom, [center, (3, 2), (3, 1)])
            + dual_path(geom, [center, (3, 4), (3, 5)]))
    report = count_encounter_points(subgraph(geom, arms), window)
    assert report.n_encounter == 1
    assert report.encounter_vertices == [geom.vertex_id(3, 3)]
    assert report.arm_counts == {4: 1}
    assert report.within_bound


def test_finite_component_classified():
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    f = subgraph(geom, dual_path(geom, [(2, 2), (3, 2), (3, 3)]))
    report = count_encounter_points(f, window)
    assert report.n_components == 1 and report.n_finite == 1
    assert report.arm_counts == {}


def test_encounter_bound_on_sampled_forests():
    for seed in range(12):
        _, _, f = sampled_forest(seed)
        window = Window(f.geometry, 6, anchor=(0, 1))
        report = count_encounter_points(f, window)
        assert report.within_bound
        assert report.n_encounter <= 4 * window.side - 4


# -- writers ------------------------------------------------------------------------


def test_region_grid_file(tmp_path):
    geom = TorusGeometry(9)
    window = Window(geom, 5, anchor=(1, 1))
    path = dual_path(geom, [(1 + i, 3) for i in range(5)])
    dec = decompose_regions(find_bridges(subgraph(geom, path), window), window)
    colors = color_regions(dec)
    out = tmp_path / "regions.csv"
    write_region_grid(out, dec, colors)
    lines = out.read_text().splitlines()
    assert lines[0] == "# format eaglass-region-grid v1"
    assert lines[1] == "x,y,vertex,region,color"
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 16
    for x, y, vid, r, c in rows:
        assert dec.region_of[int(vid)] == int(r)
        assert colors[int(r)] == int(c)


def test_bridge_stats_file(tmp_path):
    geom = TorusGeometry(9)
    window = Window(geom, 4, anchor=(1, 1))
    path = dual_path(geom, [(1 + i, 2) for i in range(4)])
    w = sample_couplings(geom, 8)
    bridges = find_bridges(subgraph(geom, path), window)
    y = bridge_weight(bridges, w)
    crossed = [geom.primal_edge(int(de)) for de in bridges.edge_ids()]
    assert y == pytest.approx(np.abs(w.weights[crossed]).sum())
    out = tmp_path / "stats.csv"
    write_bridge_stats(out, [(window.side, bridges.n_edges, y)])
    lines = out.read_text().splitlines()
    assert lines[0] == "# format eaglass-bridge-stats v1"
    assert lines[1] == "N,bridge_edges,bridge_weight"
    n, e_n, y_n = lines[2].split(",")
    assert (int(n), int(e_n), float(y_n)) == (4, 3, pytest.approx(y))
