"""Vector-Neuron layers and an untrained VN-PointNet-style canonicalizer.

A VN feature is an array of shape ``(n, channels, 3)``: every channel of
every node is a 3-vector.  Layers only mix channels and gate on inner
products, so rotating all vectors of the input rotates the output the same
way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ShapeMismatch
from .geometry import RigidTransform, gram_schmidt
from .system import AtomicSystem, centroid


def vn_linear(f: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``out[:, c] = sum_k w[c, k] * f[:, k]``."""
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if f.ndim != 3 or f.shape[-1] != 3:
        raise ShapeMismatch(f"VN feature must have shape (n, channels, 3), got {f.shape}")
    if w.ndim != 2 or w.shape[1] != f.shape[1]:
        raise ShapeMismatch(f"weight {w.shape} does not take {f.shape[1]} input channels")
    return np.einsum("ok,nkd->nod", w, f)


def vn_leaky_relu(f: np.ndarray, d: np.ndarray, alpha: float = 0.2) -> np.ndarray:
    """Vector-neuron leaky ReLU.

    For each channel ``q`` of ``f`` a direction ``k = (d @ f)[channel]`` is
    learned; where ``<q, k> < 0`` the component of ``q`` along ``k`` is scaled
    by ``alpha`` (removed entirely for ``alpha = 0``).  A zero direction leaves
    ``q`` untouched.
    """
    q = np.asarray(f, dtype=np.float64)
    k = vn_linear(q, d)
    if k.shape != q.shape:
        raise ShapeMismatch(f"direction weights {np.shape(d)} must be square over {q.shape[1]} channels")
    dot = np.sum(q * k, axis=-1, keepdims=True)
    k_sq = np.sum(k * k, axis=-1, keepdims=True)
    safe = np.where(k_sq > 0, k_sq, 1.0)
    projected = q - (1.0 - alpha) * (dot / safe) * k
    return np.where((dot >= 0) | (k_sq == 0), q, projected)


def vn_mean_pool(f: np.ndarray) -> np.ndarray:
    return f.mean(axis=0)


def uniform_init(rng: np.random.Generator, out_ch: int, in_ch: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(in_ch)
    return rng.uniform(-bound, bound, size=(out_ch, in_ch))


def lift_positions(centered: np.ndarray) -> np.ndarray:
    """Three equivariant input channels per node: ``x``, ``Cx``, ``C²x``.

    ``C`` is the covariance of the centered cloud, normalized by its mean
    eigenvalue so all channels share the length scale of ``x``.  The extra
    channels give the nonlinearity node-dependent directions to gate on;
    with ``x`` alone every layer output stays parallel to ``x`` with a
    node-independent coefficient and mean pooling returns zero.
    """
    cov = centered.T @ centered / len(centered)
    scale = np.trace(cov) / 3.0
    if scale > 0:
        cov = cov / scale
    cx = centered @ cov  # cov is symmetric
    ccx = cx @ cov
    return np.stack([centered, cx, ccx], axis=1)


@dataclass(frozen=True)
class VNCanonNet:
    """Forward-only VN canonicalization network with seeded (untrained) weights.

    Architecture: lift -> VNLinear+VNLeakyReLU -> ``hidden_layers`` ×
    (concat global mean, VNLinear+VNLeakyReLU) -> mean pool -> VNLinear head
    emitting three vectors.
    """

    seed: int = 0
    hidden_layers: int = 1
    width: int = 16
    alpha: float = 0.2

    def __post_init__(self):
        if self.hidden_layers not in (0, 1, 2):
            raise ValueError("hidden_layers must be 0, 1 or 2")
        if self.width < 1:
            raise ValueError("width must be positive")

    @cached_property
    def layers(self) -> tuple:
        rng = np.random.default_rng(self.seed)
        w = self.width
        layers = [(uniform_init(rng, w, 3), uniform_init(rng, w, w))]
        for _ in range(self.hidden_layers):
            layers.append((uniform_init(rng, w, 2 * w), uniform_init(rng, w, w)))
        return tuple(layers)

    @cached_property
    def head(self) -> np.ndarray:
        # drawn after the body so adding hidden layers leaves earlier weights intact
        rng = np.random.default_rng([self.seed, 1])
        return uniform_init(rng, 3, self.width)

    def embeddings(self, centered: np.ndarray) -> list[np.ndarray]:
        """Per-layer VN features, shape ``(n, width, 3)`` each."""
        f = lift_positions(centered)
        outs = []
        for i, (w, d) in enumerate(self.layers):
            if i > 0:
                pooled = np.broadcast_to(vn_mean_pool(f), f.shape)
                f = np.concatenate([f, pooled], axis=1)
            f = vn_leaky_relu(vn_linear(f, w), d, self.alpha)
            outs.append(f)
        return outs

    def forward(self, centered: np.ndarray) -> np.ndarray:
        """Candidate frame (3×3, columns are the three output vectors)."""
        pooled = vn_mean_pool(self.embeddings(centered)[-1])
        return (self.head @ pooled).T

    def to_dict(self) -> dict:
        return {"kind": "vn-pointnet", "seed": self.seed, "hidden_layers": self.hidden_layers,
                "width": self.width, "alpha": self.alpha}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "VNCanonNet":
        return cls(seed=int(d.get("seed", 0)), hidden_layers=int(d.get("hidden_layers", 1)),
                   width=int(d.get("width", 16)), alpha=float(d.get("alpha", 0.2)))

    @classmethod
    def from_json(cls, text: str) -> "VNCanonNet":
        return cls.from_dict(json.loads(text))


def vn_canonicalize(s: AtomicSystem, net: VNCanonNet) -> RigidTransform:
    """Equivariant frame ``(U, centroid)`` with ``U`` orthonormalized by Gram-Schmidt."""
    t = centroid(s)
    u = gram_schmidt(net.forward(s.positions - t))
    return RigidTransform(u, t)
