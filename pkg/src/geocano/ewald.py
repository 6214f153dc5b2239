"""Reciprocal-space long-range messages for periodic systems.

``M_i = sum_k exp(i k.x_i) * S(k) * phi(|k|)`` with structure factors
``S(k) = sum_j h_j exp(-i k.x_j)`` over the wavevectors of the reciprocal
lattice with ``0 < |k| <= c_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BasisCellMismatch, NonPeriodicSystem, NumericalDegeneracy, ShapeMismatch, SingularCell
from .system import MIN_CELL_VOLUME, AtomicSystem, PeriodicCell

SHELL_QUANTUM = 1e-9
IMAG_TOL = 1e-9
ATOM_BLOCK = 256  # atoms per phase block; bounds memory at O(ATOM_BLOCK * |K|)


def reciprocal_lattice(cell: PeriodicCell | np.ndarray) -> np.ndarray:
    """Rows ``b_i`` with ``b_i . v_j = 2 pi delta_ij``."""
    lattice = cell.lattice if isinstance(cell, PeriodicCell) else np.asarray(cell, dtype=np.float64)
    if not abs(np.linalg.det(lattice)) > MIN_CELL_VOLUME:
        raise SingularCell("cell volume is (nearly) zero")
    return 2.0 * np.pi * np.linalg.inv(lattice).T


def gaussian_profile(sigma: float) -> Callable[[np.ndarray], np.ndarray]:
    """Fourier transform of a normalized Gaussian of width ``sigma`` (Å)."""
    return lambda k: np.exp(-0.5 * (k * sigma) ** 2)


def coulomb_profile(beta: float) -> Callable[[np.ndarray], np.ndarray]:
    """Screened Coulomb kernel ``4 pi / k² exp(-k² / 4 beta²)``."""
    return lambda k: 4.0 * np.pi / k**2 * np.exp(-(k**2) / (4.0 * beta**2))


def parse_profile(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """``"gaussian:SIGMA"`` or ``"coulomb:BETA"``."""
    name, _, value = text.partition(":")
    try:
        param = float(value)
    except ValueError:
        raise ValueError(f"profile {text!r} needs a numeric parameter") from None
    if not param > 0:
        raise ValueError("profile parameter must be positive")
    if name == "gaussian":
        return gaussian_profile(param)
    if name == "coulomb":
        return coulomb_profile(param)
    raise ValueError(f"unknown profile {name!r}")


@dataclass(frozen=True, eq=False)
class EwaldBasis:
    kvectors: np.ndarray  # (K, 3) rad/Å
    indices: np.ndarray  # (K, 3) integer coordinates on the reciprocal basis
    coefficients: np.ndarray  # (K,)
    frequency_cutoff: float
    cell: PeriodicCell

    def __len__(self):
        return len(self.kvectors)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.kvectors, axis=1)

    def shell_keys(self) -> np.ndarray:
        return np.round(self.norms / SHELL_QUANTUM).astype(np.int64)

    def with_profile(self, profile: Callable[[np.ndarray], np.ndarray]) -> "EwaldBasis":
        return EwaldBasis(self.kvectors, self.indices, np.asarray(profile(self.norms), dtype=np.float64),
                          self.frequency_cutoff, self.cell)

    def with_shell_values(self, values: dict) -> "EwaldBasis":
        """Coefficients from a lookup keyed by quantized ``|k|`` (see :meth:`shell_keys`)."""
        coeffs = np.array([values[int(key)] for key in self.shell_keys()], dtype=np.float64)
        return EwaldBasis(self.kvectors, self.indices, coeffs, self.frequency_cutoff, self.cell)


def enumerate_kvectors(cell: PeriodicCell, k_cutoff: float) -> EwaldBasis:
    """All nonzero reciprocal-lattice vectors with ``|k| <= k_cutoff``.

    The integer search box follows from ``m_i = k . v_i / 2 pi``, hence
    ``|m_i| <= k_cutoff |v_i| / 2 pi``.  Sorted by (|k|, m1, m2, m3); the
    coefficients start at one.
    """
    if not k_cutoff > 0:
        raise ValueError("k_cutoff must be positive")
    recip = reciprocal_lattice(cell)
    bounds = [int(math.floor(k_cutoff * np.linalg.norm(v) / (2.0 * np.pi) + 1e-9)) for v in cell.lattice]
    grids = [np.arange(-b, b + 1) for b in bounds]
    m = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, 3)
    k = m @ recip
    norm = np.linalg.norm(k, axis=1)
    keep = (norm > 0) & (norm <= k_cutoff)
    m, k, norm = m[keep], k[keep], norm[keep]
    order = np.lexsort((m[:, 2], m[:, 1], m[:, 0], norm))
    return EwaldBasis(k[order], m[order], np.ones(len(order)), float(k_cutoff), cell)


def make_basis(cell: PeriodicCell, k_cutoff: float, profile=None) -> EwaldBasis:
    basis = enumerate_kvectors(cell, k_cutoff)
    if profile is None:
        return basis
    if isinstance(profile, str):
        profile = parse_profile(profile)
    return basis.with_profile(profile)


def _check_cell(s: AtomicSystem, basis: EwaldBasis):
    if s.cell is None or not all(s.cell.pbc):
        raise NonPeriodicSystem("long-range messages need a fully periodic system")
    if s.cell.lattice.shape != basis.cell.lattice.shape or not np.allclose(
            s.cell.lattice, basis.cell.lattice, rtol=1e-12, atol=1e-12):
        raise BasisCellMismatch("the basis was built for a different cell")


def structure_factors(positions: np.ndarray, h: np.ndarray, kvectors: np.ndarray) -> np.ndarray:
    """``S[k, c] = sum_j h[j, c] exp(-i k.x_j)``, shape ``(K, d)``.

    Atoms are accumulated in fixed blocks of :data:`ATOM_BLOCK`, in order.
    """
    out = np.zeros((len(kvectors), h.shape[1]), dtype=np.complex128)
    for start in range(0, len(positions), ATOM_BLOCK):
        block = slice(start, start + ATOM_BLOCK)
        out += np.exp(-1j * (kvectors @ positions[block].T)) @ h[block]
    return out


def long_range_messages(s: AtomicSystem, h, basis: EwaldBasis, return_residual: bool = False):
    """Per-node long-range messages, shape ``(n, d)``.

    Cost is ``O(n |K| d)``.  The k-set is closed under negation and the
    coefficients are even in ``k``, so the imaginary part cancels; a residual
    above ``1e-9`` of the result scale raises :class:`NumericalDegeneracy`.
    """
    _check_cell(s, basis)
    h = np.asarray(h, dtype=np.float64)
    squeeze = h.ndim == 1
    if squeeze:
        h = h[:, None]
    if h.ndim != 2 or len(h) != s.n_atoms:
        raise ShapeMismatch(f"channels must have shape ({s.n_atoms}, d), got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("channels must be finite")
    if len(basis) == 0:
        out = np.zeros_like(h)
        return (out[:, 0] if squeeze else out, 0.0) if return_residual else (out[:, 0] if squeeze else out)

    sf = structure_factors(s.positions, h, basis.kvectors)
    weighted = sf * basis.coefficients[:, None]
    msg = np.empty((s.n_atoms, h.shape[1]), dtype=np.complex128)
    for start in range(0, s.n_atoms, ATOM_BLOCK):
        block = slice(start, start + ATOM_BLOCK)
        msg[block] = np.exp(1j * (s.positions[block] @ basis.kvectors.T)) @ weighted
    real, imag = msg.real, msg.imag
    residual = float(np.max(np.abs(imag)))
    scale = max(float(np.max(np.abs(real))), 1e-12 * float(np.sum(np.abs(weighted))))
    if residual > IMAG_TOL * scale:
        raise NumericalDegeneracy(f"imaginary residual {residual:.3g} exceeds tolerance (scale {scale:.3g})")
    out = real[:, 0] if squeeze else real
    return (out, residual) if return_residual else out
