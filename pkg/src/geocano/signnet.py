"""SFA+SignNet: collapse the PCA sign ambiguity with a sign-invariant network.

``SignNet(u_1, u_2, u_3) = mu([kappa(u_i) + kappa(-u_i)]_i)``; the output is
orthonormalized by Gram-Schmidt and paired with the centroid.

In VN mode ``kappa`` also sees the centered point cloud.  A map of a lone
vector that is both sign-invariant and rotation-equivariant must vanish (a
half-turn about any axis orthogonal to ``u`` sends ``u`` to ``-u``), so the
cloud supplies the sign-sensitive context.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InputError
from .frames import FrameMode, pca_frames, stochastic_frame
from .geometry import RigidTransform, gram_schmidt
from .system import AtomicSystem, centroid
from .vn import uniform_init, vn_leaky_relu, vn_linear, vn_mean_pool


class Parametrization(str, enum.Enum):
    MLP = "mlp"
    VN = "vn"


def _mlp_params(rng, sizes):
    return tuple((uniform_init(rng, o, i), uniform_init(rng, o, i)[:, 0]) for i, o in zip(sizes[:-1], sizes[1:]))


def _mlp(params, x):
    for j, (w, b) in enumerate(params):
        x = w @ x + b
        if j < len(params) - 1:
            x = np.tanh(x)
    return x


@dataclass(frozen=True)
class SignNetSpec:
    parametrization: Parametrization = Parametrization.VN
    width: int | None = None  # 16 for MLP, 8 for VN
    kappa_seed: int = 0
    mu_seed: int = 1
    alpha: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "parametrization", Parametrization(self.parametrization))
        if self.width is None:
            object.__setattr__(self, "width", 16 if self.parametrization is Parametrization.MLP else 8)

    @cached_property
    def kappa(self):
        rng = np.random.default_rng(self.kappa_seed)
        h = self.width
        if self.parametrization is Parametrization.MLP:
            return _mlp_params(rng, [3, h, h, h])
        return (uniform_init(rng, h, 2), uniform_init(rng, h, h))

    @cached_property
    def mu(self):
        rng = np.random.default_rng(self.mu_seed)
        h = self.width
        if self.parametrization is Parametrization.MLP:
            return _mlp_params(rng, [3 * h, h, h, 9])
        return (uniform_init(rng, h, 3 * h), uniform_init(rng, h, h), uniform_init(rng, 3, h))

    def to_dict(self) -> dict:
        return {"parametrization": self.parametrization.value, "width": self.width,
                "kappa_seed": self.kappa_seed, "mu_seed": self.mu_seed, "alpha": self.alpha}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SignNetSpec":
        return cls(Parametrization(d.get("parametrization", "vn")), d.get("width"),
                   int(d.get("kappa_seed", 0)), int(d.get("mu_seed", 1)), float(d.get("alpha", 0.2)))


def _kappa_vn(spec, column, context):
    w, d = spec.kappa
    n = len(context)
    f = np.stack([context, np.broadcast_to(column, (n, 3))], axis=1)
    return vn_mean_pool(vn_leaky_relu(vn_linear(f, w), d, spec.alpha))


def _context(points):
    points = np.asarray(points, dtype=np.float64)
    rms = np.sqrt(np.mean(np.sum(points * points, axis=1)))
    return points / rms if rms > 0 else points


def sign_net_apply(u: np.ndarray, spec: SignNetSpec, points: np.ndarray | None = None) -> np.ndarray:
    """Sign-invariant map of the columns of ``u`` to a candidate 3×3 frame.

    ``points`` (centered positions) is required in VN mode and ignored in MLP
    mode.  Flipping the sign of any column of ``u`` leaves the output
    bit-for-bit unchanged.
    """
    u = np.asarray(u, dtype=np.float64)
    if spec.parametrization is Parametrization.MLP:
        eta = [_mlp(spec.kappa, u[:, i]) + _mlp(spec.kappa, -u[:, i]) for i in range(3)]
        return _mlp(spec.mu, np.concatenate(eta)).reshape(3, 3).T

    if points is None:
        raise InputError("VN SignNet needs the centered point cloud")
    ctx = _context(points)
    eta = [_kappa_vn(spec, u[:, i], ctx) + _kappa_vn(spec, -u[:, i], ctx) for i in range(3)]
    w, d, head = spec.mu
    f = np.concatenate(eta, axis=0)[None]  # one "node" carrying 3*width channels
    f = vn_leaky_relu(vn_linear(f, w), d, spec.alpha)
    return (head @ f[0]).T


def sfa_signnet_canonicalize(s: AtomicSystem, spec: SignNetSpec, rng=None,
                             mode: FrameMode | str = FrameMode.E3) -> RigidTransform:
    """Sample a PCA frame, resolve its signs with SignNet, orthonormalize.

    The sampled frame only differs from the others by column signs, so the
    result does not depend on ``rng``.
    """
    fs = pca_frames(s, mode)
    frame = stochastic_frame(fs, rng)
    t = centroid(s)
    m = sign_net_apply(frame.rotation, spec, s.positions - t)
    return RigidTransform(gram_schmidt(m), t)
