"""Small dense 3D linear algebra used throughout the package.

All matrices are plain ``(3, 3)`` float64 numpy arrays.  Points are stored as
rows, so a rigid transform ``(R, b)`` maps an ``(n, 3)`` array ``X`` to
``X @ R.T + b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateColumns, NonSymmetric

SYMMETRY_TOL = 1e-12
GS_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class RigidTransform:
    """An element of E(3): orthogonal matrix plus translation (Å)."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.rotation))

    @property
    def is_proper(self) -> bool:
        return self.det > 0

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """Act on free vectors (forces, lattice vectors): no translation."""
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)


@dataclass(frozen=True)
class EigenDecomp3:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns are eigenvectors

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def _char_poly_coeffs(a):
    c2 = a[0, 0] + a[1, 1] + a[2, 2]
    c1 = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
          + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
          + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
    c0 = (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
          - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
          + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
    return c2, c1, c0


def _newton_polish(lam, c2, c1, c0):
    # det(A - lam I) = -lam^3 + c2 lam^2 - c1 lam + c0
    p = ((-lam + c2) * lam - c1) * lam + c0
    dp = (-3.0 * lam + 2.0 * c2) * lam - c1
    if abs(dp) < 1e-6:
        return lam
    step = p / dp
    # near-multiple roots make Newton unreliable; only accept tiny corrections
    if abs(step) > 1e-6 * (1.0 + abs(lam)):
        return lam
    return lam - step


def _eigvals_trig(a):
    q = (a[0, 0] + a[1, 1] + a[2, 2]) / 3.0
    b = a - q * np.eye(3)
    p2 = float(np.sum(b * b))
    if p2 == 0.0:
        return q, q, q
    p = math.sqrt(p2 / 6.0)
    c = b / p
    r = 0.5 * (c[0, 0] * (c[1, 1] * c[2, 2] - c[1, 2] * c[2, 1])
               - c[0, 1] * (c[1, 0] * c[2, 2] - c[1, 2] * c[2, 0])
               + c[0, 2] * (c[1, 0] * c[2, 1] - c[1, 1] * c[2, 0]))
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return hi, mid, lo


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _any_orthogonal(v):
    # unit vector orthogonal to unit v
    if abs(v[0]) > abs(v[1]):
        w = np.array([-v[2], 0.0, v[0]])
    else:
        w = np.array([0.0, v[2], -v[1]])
    return w / np.linalg.norm(w)


def _eigvec_isolated(a, lam):
    # eigenvector of a simple eigenvalue: best cross product of rows of (A - lam I)
    m = a - lam * np.eye(3)
    crosses = (_cross(m[0], m[1]), _cross(m[0], m[2]), _cross(m[1], m[2]))
    norms = [float(c @ c) for c in crosses]
    k = int(np.argmax(norms))
    if norms[k] > 0.0:
        return crosses[k] / math.sqrt(norms[k])
    rows = [float(r @ r) for r in m]
    k = int(np.argmax(rows))
    if rows[k] > 0.0:
        return _any_orthogonal(m[k] / math.sqrt(rows[k]))
    return np.array([1.0, 0.0, 0.0])


def _solve_complement(a, v0):
    """Both eigenpairs of ``a`` restricted to the plane orthogonal to ``v0``.

    The 2×2 block is diagonalized by one Jacobi rotation, which stays accurate
    when the two remaining eigenvalues are close or tiny relative to the
    isolated one.
    """
    u = _any_orthogonal(v0)
    w = _cross(v0, u)
    au, aw = a @ u, a @ w
    b00, b01, b11 = float(u @ au), float(0.5 * (u @ aw + w @ au)), float(w @ aw)
    if b01 == 0.0:
        t = 0.0
    else:
        tau = (b11 - b00) / (2.0 * b01)
        if abs(tau) > 1e150:
            t = 0.5 / tau
        else:
            t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    sn = t * c
    return (b00 - t * b01, c * u - sn * w), (b11 + t * b01, sn * u + c * w)


def _fix_signs(vectors):
    out = vectors.copy()
    for j in range(3):
        col = out[:, j]
        k = int(np.argmax(np.abs(col)))  # argmax returns the lowest index on ties
        if col[k] < 0:
            out[:, j] = -col
    return out


def sym_eig3(m) -> EigenDecomp3:
    """Eigendecomposition of a symmetric 3×3 matrix.

    Closed-form trigonometric eigenvalues with one Newton step on the
    characteristic polynomial locate the most isolated eigenvalue, whose
    eigenvector comes from cross products of rows of ``A - lam I`` and is
    sharpened by two Rayleigh-quotient passes.  The
    other two eigenpairs come from an exact 2×2 solve in the orthogonal
    complement.  Eigenvalues come back in
    descending order; each eigenvector's largest-magnitude entry is positive.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise NonSymmetric(f"expected a 3x3 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonSymmetric("matrix has non-finite entries")
    scale = float(np.max(np.abs(m)))
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * max(1.0, scale):
        raise NonSymmetric("matrix is not symmetric")
    a = 0.5 * (m + m.T)

    off = (a[0, 1], a[0, 2], a[1, 2])
    if off == (0.0, 0.0, 0.0):
        d = np.diag(a).copy()
        order = np.argsort(-d, kind="stable")
        return EigenDecomp3(d[order], np.eye(3)[:, order])

    a = a / scale
    c2, c1, c0 = _char_poly_coeffs(a)
    hi, mid, lo = (_newton_polish(lam, c2, c1, c0) for lam in _eigvals_trig(a))
    hi, mid, lo = sorted((hi, mid, lo), reverse=True)

    iso = hi if hi - mid >= mid - lo else lo
    v_iso = _eigvec_isolated(a, iso)
    # Rayleigh refinement: the trigonometric root loses digits when another
    # pair of eigenvalues nearly coincides (acos near +-1)
    for _ in range(2):
        iso = float(v_iso @ a @ v_iso)
        v_iso = _eigvec_isolated(a, iso)
    pairs = [(iso, v_iso), *_solve_complement(a, v_iso)]
    pairs.sort(key=lambda pair: -pair[0])
    (hi, v_hi), (mid, v_mid), (lo, v_lo) = pairs
    vectors = _fix_signs(np.column_stack([v_hi, v_mid, v_lo]))
    return EigenDecomp3(np.array([hi, mid, lo]) * scale, vectors)


def gram_schmidt(m) -> np.ndarray:
    """Orthonormalize the columns of ``m`` in order (modified Gram-Schmidt).

    Column k of the result spans the same flag as the first k input columns
    and points along the component of input column k orthogonal to the
    previous ones.
    """
    m = np.asarray(m, dtype=np.float64)
    q = np.zeros_like(m)
    for j in range(m.shape[1]):
        v = m[:, j].copy()
        for i in range(j):
            v -= (q[:, i] @ v) * q[:, i]
        # second pass restores orthogonality lost to cancellation
        for i in range(j):
            v -= (q[:, i] @ v) * q[:, i]
        norm = float(np.linalg.norm(v))
        if norm < GS_RESIDUAL_TOL:
            raise DegenerateColumns(f"column {j} is (nearly) dependent on the previous ones (residual {norm:.3g})")
        q[:, j] = v / norm
    return q


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def quaternion_to_matrix(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_rotation(rng=None) -> RigidTransform:
    """Haar-uniform rotation from a normalized Gaussian quaternion."""
    rng = _as_generator(rng)
    return RigidTransform(quaternion_to_matrix(rng.standard_normal(4)))


def random_reflection(rng=None) -> RigidTransform:
    """Householder reflection through a uniformly random plane (det -1)."""
    rng = _as_generator(rng)
    n = rng.standard_normal(3)
    n /= np.linalg.norm(n)
    return RigidTransform(np.eye(3) - 2.0 * np.outer(n, n))


def rotation_z(angle: float) -> RigidTransform:
    c, s = math.cos(angle), math.sin(angle)
    return RigidTransform(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))


def random_euclidean(rng=None, translation_scale: float = 5.0, reflect: bool | None = None) -> RigidTransform:
    """Random element of E(3).  ``reflect=None`` flips a fair coin."""
    rng = _as_generator(rng)
    rot = random_rotation(rng).rotation
    if reflect is None:
        reflect = bool(rng.random() < 0.5)
    if reflect:
        rot = rot @ np.diag([1.0, 1.0, -1.0])
    return RigidTransform(rot, rng.uniform(-translation_scale, translation_scale, 3))


def orthogonality_error(m) -> float:
    m = np.asarray(m, dtype=np.float64)
    return float(np.max(np.abs(m.T @ m - np.eye(m.shape[1]))))
