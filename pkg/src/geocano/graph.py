"""Radius graphs with periodic images, neighbor capping and tag-0 rewiring.

Edge convention: an edge ``src -> dst`` carries the integer image shift ``n``
of the source atom and the displacement ``x_dst - (x_src + n @ lattice)``,
i.e. the vector from the (image of the) sender to the receiver.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AllAtomsRemoved, CutoffExceedsCell, InputError
from .system import AtomicSystem

_PREFILTER_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class RadiusGraph:
    src: np.ndarray
    dst: np.ndarray
    shift: np.ndarray  # (E, 3) integer image of the source atom
    displacement: np.ndarray
    distance: np.ndarray
    node_count: int
    cutoff: float
    max_neighbors: int | None

    def __len__(self):
        return len(self.src)

    @property
    def edge_count(self) -> int:
        return len(self.src)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.node_count)

    def edge_keys(self) -> list[tuple]:
        return [(int(s), int(d), tuple(int(v) for v in n)) for s, d, n in zip(self.src, self.dst, self.shift)]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["src", "dst", "dx", "dy", "dz", "dist"])
        for s, d, vec, r in zip(self.src, self.dst, self.displacement, self.distance):
            w.writerow([int(s), int(d), *(repr(float(v)) for v in vec), repr(float(r))])
        return out.getvalue()

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "cutoff": self.cutoff,
            "max_neighbors": self.max_neighbors,
            "edges": [
                {"src": int(s), "dst": int(d), "shift": [int(v) for v in n],
                 "displacement": [float(v) for v in vec], "distance": float(r)}
                for s, d, n, vec, r in zip(self.src, self.dst, self.shift, self.displacement, self.distance)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def image_offsets(shifts: np.ndarray, lattice: np.ndarray) -> np.ndarray:
    """Cartesian offsets of integer image shifts, summed in a fixed order."""
    shifts = np.asarray(shifts, dtype=np.float64)
    return shifts[:, 0, None] * lattice[0] + shifts[:, 1, None] * lattice[1] + shifts[:, 2, None] * lattice[2]


def edge_vectors(positions, lattice, src, dst, shifts):
    """Displacements and distances for explicit (src, dst, shift) triples."""
    if lattice is None:
        disp = positions[dst] - positions[src]
    else:
        # (x_dst - x_src) - offset is exactly antisymmetric under (src, dst, n) -> (dst, src, -n)
        disp = (positions[dst] - positions[src]) - image_offsets(shifts, lattice)
    dist = np.sqrt(np.sum(disp * disp, axis=-1))
    return disp, dist


def image_range(s: AtomicSystem, cutoff: float, image_search: bool = True) -> np.ndarray:
    """Number of image shells to search along each lattice axis."""
    if s.cell is None:
        return np.zeros(3, dtype=np.int64)
    widths = s.cell.perpendicular_widths()
    reach = np.zeros(3, dtype=np.int64)
    for a in range(3):
        if not s.cell.pbc[a]:
            continue
        if not image_search and cutoff > 0.5 * widths[a]:
            raise CutoffExceedsCell(
                f"cutoff {cutoff} Å exceeds half the cell width {widths[a]:.4g} Å along axis {a}"
            )
        reach[a] = max(1, math.ceil(cutoff / widths[a]))
    return reach


def _wrap(s: AtomicSystem):
    """Positions wrapped into the home cell on periodic axes, plus the integer wraps."""
    pos = s.positions
    if s.cell is None:
        return pos.copy(), np.zeros((len(pos), 3), dtype=np.int64)
    lattice = s.cell.lattice
    frac = np.linalg.solve(lattice.T, pos.T).T
    wraps = np.floor(frac).astype(np.int64)
    wraps[:, ~np.array(s.cell.pbc)] = 0
    return pos - image_offsets(wraps, lattice), wraps


def _candidate_pairs(points: np.ndarray, queries: np.ndarray, cutoff: float):
    """All (query, point) index pairs in neighboring cubic bins of edge ``cutoff``."""
    lo = np.minimum(points.min(axis=0), queries.min(axis=0))
    pbin = np.floor((points - lo) / cutoff).astype(np.int64) + 1
    qbin = np.floor((queries - lo) / cutoff).astype(np.int64) + 1
    dims = np.maximum(pbin.max(axis=0), qbin.max(axis=0)) + 2
    strides = np.array([dims[1] * dims[2], dims[2], 1], dtype=np.int64)
    pkey = pbin @ strides
    order = np.argsort(pkey, kind="stable")
    sorted_keys = pkey[order]
    qkey = qbin @ strides

    q_idx, p_idx = [], []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                key = qkey + dx * strides[0] + dy * strides[1] + dz * strides[2]
                start = np.searchsorted(sorted_keys, key, side="left")
                stop = np.searchsorted(sorted_keys, key, side="right")
                counts = stop - start
                if not counts.any():
                    continue
                q_rep = np.repeat(np.arange(len(queries)), counts)
                offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
                q_idx.append(q_rep)
                p_idx.append(order[np.repeat(start, counts) + offsets])
    if not q_idx:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(q_idx), np.concatenate(p_idx)


def sort_and_cap(src, dst, shift, disp, dist, max_neighbors):
    """Order edges by (dst, distance, src, shift) and keep the first k per receiver."""
    order = np.lexsort((shift[:, 2], shift[:, 1], shift[:, 0], src, dist, dst))
    src, dst, shift, disp, dist = src[order], dst[order], shift[order], disp[order], dist[order]
    if max_neighbors is not None and len(dst):
        first = np.searchsorted(dst, dst, side="left")
        rank = np.arange(len(dst)) - first
        keep = rank < max_neighbors
        src, dst, shift, disp, dist = src[keep], dst[keep], shift[keep], disp[keep], dist[keep]
    return src, dst, shift, disp, dist


def build_radius_graph(s: AtomicSystem, cutoff: float = 6.0, max_neighbors: int | None = 40,
                       image_search: bool = True) -> RadiusGraph:
    """Directed radius graph under periodic boundary conditions.

    Every (source image, receiver) pair within ``cutoff`` becomes an edge; each
    receiver then keeps its ``max_neighbors`` nearest senders (``None`` keeps
    all).  Candidate pairs come from a cell list over the replicated image
    cloud, so construction is linear in the number of atoms for a fixed
    density.  Periodic axes are searched over ``ceil(cutoff / width)`` image
    shells; with ``image_search=False`` a cutoff beyond half the cell width
    raises :class:`CutoffExceedsCell` instead.
    """
    if not cutoff > 0:
        raise InputError("cutoff must be positive")
    if max_neighbors is not None and max_neighbors < 1:
        raise InputError("max_neighbors must be a positive integer or None")
    n = s.n_atoms
    reach = image_range(s, cutoff, image_search)
    wrapped, wraps = _wrap(s)
    lattice = None if s.cell is None else s.cell.lattice

    grids = [np.arange(-r, r + 1) for r in reach]
    images = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, 3)
    if lattice is None:
        cloud = wrapped
        cloud_atom = np.arange(n)
        cloud_image = np.zeros((n, 3), dtype=np.int64)
    else:
        offsets = image_offsets(images, lattice)
        cloud = (wrapped[None, :, :] + offsets[:, None, :]).reshape(-1, 3)
        cloud_atom = np.tile(np.arange(n), len(images))
        cloud_image = np.repeat(images, n, axis=0)

    dst, p = _candidate_pairs(cloud, wrapped, cutoff)
    src = cloud_atom[p]
    rough = cloud[p] - wrapped[dst]
    near = np.sum(rough * rough, axis=-1) <= (cutoff * (1 + _PREFILTER_SLACK) + _PREFILTER_SLACK) ** 2
    dst, src, p = dst[near], src[near], p[near]
    # map the wrapped-frame image back to a shift of the original positions
    shift = cloud_image[p] + wraps[dst] - wraps[src]
    not_self = ~((src == dst) & np.all(shift == 0, axis=1))
    dst, src, shift = dst[not_self], src[not_self], shift[not_self]

    disp, dist = edge_vectors(s.positions, lattice, src, dst, shift)
    inside = dist <= cutoff
    edges = sort_and_cap(src[inside], dst[inside], shift[inside], disp[inside], dist[inside], max_neighbors)
    src, dst, shift, disp, dist = edges
    return RadiusGraph(src, dst, shift, disp, dist, n, float(cutoff), max_neighbors)


def rewire_remove_tag0(s: AtomicSystem) -> tuple[AtomicSystem, np.ndarray]:
    """Drop subsurface (tag 0) atoms.

    Returns the reduced system and ``index_map`` with ``index_map[new] = old``.
    """
    keep = np.flatnonzero(s.tags != 0)
    if len(keep) == 0:
        raise AllAtomsRemoved("every atom has tag 0")
    if len(keep) == s.n_atoms:
        return s, keep
    return s.subset(keep), keep
