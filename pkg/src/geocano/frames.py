"""PCA frames and frame averaging.

A frame element ``(U, t)`` is stored as a :class:`RigidTransform` whose
rotation has the principal axes as columns and whose translation is the
centroid.  Projecting a system into that frame gives ``(X - t) @ U``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateSpectrum, InputError
from .geometry import RigidTransform, _as_generator, sym_eig3
from .system import AtomicSystem, centroid

GAP_TOL = 1e-8


class FrameMode(str, enum.Enum):
    E3 = "e3"  # 8 frames, all sign combinations
    SE3 = "se3"  # 4 frames with det +1
    Z_FIXED_2D = "2d"  # 4 frames: (±u1, ±u2, +z) with u1, u2 in the xy-plane
    Z_FIXED_SE2 = "se2"  # the 2 proper frames of Z_FIXED_2D

    @property
    def frame_count(self) -> int:
        return {"e3": 8, "se3": 4, "2d": 4, "se2": 2}[self.value]


class OutputKind(enum.Enum):
    INVARIANT_SCALAR = "scalar"
    EQUIVARIANT_VECTOR_FIELD = "vector"


@dataclass(frozen=True)
class FrameSet:
    frames: tuple
    mode: FrameMode
    eigenvalues: np.ndarray
    eigen_gap: float

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    @property
    def translation(self) -> np.ndarray:
        return self.frames[0].translation


def covariance(positions: np.ndarray, center: np.ndarray) -> np.ndarray:
    d = positions - center
    return d.T @ d / len(positions)


def _sign_frames(axes: np.ndarray, t: np.ndarray, flip_columns: int, proper_only: bool):
    frames = []
    for signs in itertools.product((1.0, -1.0), repeat=flip_columns):
        s = np.ones(3)
        s[:flip_columns] = signs
        u = axes * s
        if proper_only and np.linalg.det(u) < 0:
            continue
        frames.append(RigidTransform(u, t))
    return tuple(frames)


def _pca_2d(positions, t):
    d = positions[:, :2] - t[:2]
    c = d.T @ d / len(positions)
    a, b, e = c[0, 0], c[0, 1], c[1, 1]
    half_tr, half_diff = 0.5 * (a + e), 0.5 * (a - e)
    r = math.hypot(half_diff, b)
    lam = np.array([half_tr + r, half_tr - r])
    if b == 0.0:
        u1 = np.array([1.0, 0.0]) if a >= e else np.array([0.0, 1.0])
    else:
        # eigenvector of the larger eigenvalue, computed from the better-conditioned row
        v1, v2 = np.array([b, lam[0] - a]), np.array([lam[0] - e, b])
        u1 = v1 if v1 @ v1 >= v2 @ v2 else v2
        u1 = u1 / np.linalg.norm(u1)
    if u1[np.argmax(np.abs(u1))] < 0:
        u1 = -u1
    u2 = np.array([-u1[1], u1[0]])
    axes = np.array([[u1[0], u2[0], 0.0], [u1[1], u2[1], 0.0], [0.0, 0.0, 1.0]])
    return lam, axes


def pca_frames(s: AtomicSystem, mode: FrameMode | str = FrameMode.E3, jitter: float = 0.0,
               rng=None) -> FrameSet:
    """Frame set from the principal axes of the (centered) point cloud.

    Raises :class:`DegenerateSpectrum` when two principal variances are too
    close to order the axes unambiguously.  With ``jitter > 0`` a degenerate
    input is retried once with Gaussian noise of that scale (Å) added to the
    positions; the frames then belong to the perturbed cloud and are no
    longer exactly equivariant.
    """
    try:
        return _pca_frames(s, FrameMode(mode))
    except DegenerateSpectrum:
        if not jitter > 0:
            raise
    rng = _as_generator(rng)
    noisy = s.with_positions(s.positions + rng.normal(0.0, jitter, s.positions.shape))
    return _pca_frames(noisy, FrameMode(mode))


def _pca_frames(s: AtomicSystem, mode: FrameMode) -> FrameSet:
    t = centroid(s)
    if mode in (FrameMode.Z_FIXED_2D, FrameMode.Z_FIXED_SE2):
        if s.n_atoms < 2:
            raise InputError("2D frames need at least two atoms")
        lam, axes = _pca_2d(s.positions, t)
        gap = float(lam[0] - lam[1])
        if not lam[0] > 0 or gap < GAP_TOL * lam[0]:
            raise DegenerateSpectrum(f"in-plane principal variances {lam} are not distinct")
        frames = _sign_frames(axes, t, 2, mode is FrameMode.Z_FIXED_SE2)
        return FrameSet(frames, mode, lam, gap)

    if s.n_atoms < 3:
        raise InputError("3D frames need at least three atoms")
    eig = sym_eig3(covariance(s.positions, t))
    lam = eig.values
    gap = float(min(lam[0] - lam[1], lam[1] - lam[2]))
    if not lam[0] > 0 or gap < GAP_TOL * lam[0]:
        raise DegenerateSpectrum(f"principal variances {lam} are not distinct")
    frames = _sign_frames(eig.vectors, t, 3, mode is FrameMode.SE3)
    return FrameSet(frames, mode, lam, gap)


def canonical_project(s: AtomicSystem, frame: RigidTransform) -> np.ndarray:
    """Positions expressed in the frame: ``(X - t) @ U``."""
    return frame.apply_inverse(s.positions)


def canonical_system(s: AtomicSystem, frame: RigidTransform) -> AtomicSystem:
    """The whole system (cell included) expressed in the frame."""
    cell = None
    if s.cell is not None:
        cell = type(s.cell)(s.cell.lattice @ frame.rotation, s.cell.pbc)
    return s.with_positions(canonical_project(s, frame), cell=cell)


Predictor = Callable[[np.ndarray, np.ndarray], "float | np.ndarray"]


def frame_average(s: AtomicSystem, fs: FrameSet, predictor: Predictor,
                  kind: OutputKind = OutputKind.INVARIANT_SCALAR):
    """Average ``predictor(projected_positions, atomic_numbers)`` over the frames.

    Vector-field outputs are rotated back into the lab frame before averaging.
    Frames are summed in index order.
    """
    kind = OutputKind(kind)
    total = None
    for frame in fs.frames:
        y = np.asarray(predictor(canonical_project(s, frame), s.atomic_numbers), dtype=np.float64)
        if kind is OutputKind.EQUIVARIANT_VECTOR_FIELD:
            y = frame.rotate(y)
        total = y if total is None else total + y
    out = total / len(fs.frames)
    return float(out) if kind is OutputKind.INVARIANT_SCALAR else out


def stochastic_frame(fs: FrameSet, rng=None) -> RigidTransform:
    """One frame drawn uniformly from the set."""
    rng = _as_generator(rng)
    return fs.frames[int(rng.integers(len(fs.frames)))]
