"""Geometric preprocessing and symmetry audits for 3D atomic systems.

Covers radius graphs under periodic boundaries, Euclidean canonicalization
by frames or equivariant networks, reciprocal-space long-range messages and
the Noisy Nodes input transform.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    DegenerateColumns,
    DegenerateSpectrum,
    GeoError,
    InputError,
    NumericalDegeneracy,
    ParseError,
)
from .geometry import RigidTransform, gram_schmidt, random_rotation, sym_eig3  # noqa: F401
from .system import AtomicSystem, PeriodicCell, centroid, read_extxyz, write_extxyz  # noqa: F401
