"""Quenched Gaussian couplings and their snapshot format.

Weights are standard normals attached to edge ids.  Generation is
counter based: the weight of edge e under seed s is a pure function of
(s, e), so regenerating any other edge, or the whole field, never
changes it, and the result does not depend on enumeration order.  The
uniform-to-normal map is the inverse CDF (scipy.special.ndtri) and is
fixed; golden snapshot files rely on it staying bit-identical.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ContractViolationError
from .lattice import BoxGeometry, TorusGeometry

SNAPSHOT_FORMAT = "eaglass-snapshot v1"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    # standard SplitMix64 finalizer; uint64 arithmetic wraps mod 2^64
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _edge_uniforms(seed: int, edge_ids: np.ndarray) -> np.ndarray:
    """Open-interval uniforms keyed by (seed, edge id)."""
    base = _splitmix64(np.uint64(seed % (2 ** 64)))
    with np.errstate(over="ignore"):
        z = _splitmix64(base + edge_ids.astype(np.uint64))
    # top 53 bits -> (0, 1), offset keeps us away from exactly 0
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53 + 2.0 ** -54


@dataclass
class Couplings:
    """A realization of i.i.d. N(0, 1) edge weights on a geometry.

    `weights` is indexed by edge id and covers every dense edge slot of
    the geometry (for boxes that includes unused slots; only ids in
    geometry.edge_ids() are meaningful).
    """

    geometry: TorusGeometry | BoxGeometry
    weights: np.ndarray
    seed: int

    def weight(self, e: int) -> float:
        return float(self.weights[e])


def sample_couplings(geom: TorusGeometry | BoxGeometry, seed: int) -> Couplings:
    """Draw the full coupling field for `geom` from the stream keyed by seed."""
    n_slots = 2 * geom.n_vertices
    ids = np.arange(n_slots, dtype=np.uint64)
    w = ndtri(_edge_uniforms(seed, ids))
    w.flags.writeable = False
    return Couplings(geometry=geom, weights=w, seed=int(seed))


def edge_weight(seed: int, e: int) -> float:
    """Weight of a single edge without materializing the field."""
    u = _edge_uniforms(seed, np.array([e], dtype=np.uint64))
    return float(ndtri(u)[0])


def graph_weight(w: Couplings, edges, absolute: bool = False) -> float:
    """Total (or total absolute) weight of an edge collection.

    Duplicate ids are rejected: a weight sum over a subgraph counts each
    edge once.
    """
    idx = np.asarray(list(edges), dtype=np.int64)
    if idx.size == 0:
        return 0.0
    if idx.min() < 0 or idx.max() >= w.weights.shape[0]:
        raise IndexError("edge id out of range for this geometry")
    if np.unique(idx).size != idx.size:
        raise ContractViolationError("edge collection contains duplicate ids")
    vals = w.weights[idx]
    return float(np.abs(vals).sum() if absolute else vals.sum())


# -- snapshot I/O -----------------------------------------------------------
#
# Line-oriented text format with exact float round-trip:
#
#   eaglass-snapshot v1
#   kind torus|box
#   side <int>
#   seed <int>
#   beta <float repr or inf>        (only when spins present)
#   edges <count>
#   <one C99 hex float per line>
#   spins <count>                   (optional section)
#   <one +1/-1 per line>


def save_snapshot(path, w: Couplings, spins: np.ndarray | None = None,
                  beta: float | None = None) -> None:
    geom = w.geometry
    kind = "torus" if isinstance(geom, TorusGeometry) else "box"
    buf = io.StringIO()
    buf.write(SNAPSHOT_FORMAT + "\n")
    buf.write(f"kind {kind}\n")
    buf.write(f"side {geom.side}\n")
    buf.write(f"seed {w.seed}\n")
    if spins is not None and beta is not None:
        buf.write(f"beta {repr(float(beta))}\n")
    buf.write(f"edges {w.weights.shape[0]}\n")
    for x in w.weights:
        buf.write(float(x).hex() + "\n")
    if spins is not None:
        buf.write(f"spins {spins.shape[0]}\n")
        for s in spins:
            buf.write(f"{int(s):+d}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_snapshot(path):
    """Read a snapshot; returns (Couplings, spins-or-None, meta dict)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SNAPSHOT_FORMAT:
        raise ContractViolationError(f"not a {SNAPSHOT_FORMAT} file: {path}")
    meta = {}
    i = 1
    while i < len(lines):
        key, _, val = lines[i].partition(" ")
        i += 1
        if key == "edges":
            n = int(val)
            weights = np.array([float.fromhex(s) for s in lines[i:i + n]])
            i += n
            meta["edges"] = n
        elif key == "spins":
            n = int(val)
            meta["spins_raw"] = np.array([int(s) for s in lines[i:i + n]], dtype=np.int8)
            i += n
        else:
            meta[key] = val
    if meta.get("kind") == "torus":
        geom = TorusGeometry(int(meta["side"]))
    elif meta.get("kind") == "box":
        geom = BoxGeometry(int(meta["side"]))
    else:
        raise ContractViolationError(f"unknown snapshot kind {meta.get('kind')!r}")
    weights.flags.writeable = False
    w = Couplings(geometry=geom, weights=weights, seed=int(meta["seed"]))
    spins = meta.pop("spins_raw", None)
    if "beta" in meta:
        meta["beta"] = float(meta["beta"])
    return w, spins, meta
