"""Symmetry audit: how invariant / equivariant is a predictor in practice?

A predictor maps an :class:`AtomicSystem` to ``(energy, forces)`` where
``forces`` is an ``(n, 3)`` array or ``None``.  Canonicalization wrappers
turn any such predictor into one that sees canonical coordinates only.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import GeoError
from .frames import FrameMode, canonical_system, pca_frames, stochastic_frame
from .geometry import RigidTransform, random_reflection, random_rotation, rotation_z
from .graph import build_radius_graph
from .noisy_nodes import cosine_similarity_matrix, mad
from .signnet import SignNetSpec, sfa_signnet_canonicalize
from .system import AtomicSystem
from .vn import VNCanonNet, uniform_init, vn_canonicalize

SCHEMA_VERSION = 1

Output = tuple  # (energy: float, forces: np.ndarray | None)


class WrapperKind(str, enum.Enum):
    NONE = "none"
    FA = "fa"
    SFA = "sfa"
    SFA_SIGNNET = "sfa-signnet"
    VN = "vn"


@dataclass(frozen=True)
class Wrapper:
    kind: WrapperKind = WrapperKind.NONE
    seed: int = 0
    frame_mode: FrameMode = FrameMode.E3
    signnet: SignNetSpec | None = None
    vn: VNCanonNet | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", WrapperKind(self.kind))
        object.__setattr__(self, "frame_mode", FrameMode(self.frame_mode))
        if self.kind is WrapperKind.SFA_SIGNNET and self.signnet is None:
            object.__setattr__(self, "signnet", SignNetSpec())
        if self.kind is WrapperKind.VN and self.vn is None:
            object.__setattr__(self, "vn", VNCanonNet())

    def describe(self) -> dict:
        d = {"kind": self.kind.value, "seed": self.seed, "frame_mode": self.frame_mode.value}
        if self.signnet is not None:
            d["signnet"] = self.signnet.to_dict()
        if self.vn is not None:
            d["vn"] = self.vn.to_dict()
        return d


@dataclass(frozen=True)
class Predictor:
    fn: Callable[[AtomicSystem], Output]
    descriptor: str
    wrapper: Wrapper = field(default_factory=Wrapper)
    embed: Callable[[AtomicSystem], list] | None = None

    def __call__(self, s: AtomicSystem) -> Output:
        return self.fn(s)


# ------------------------------------------------------------ reference nets


def _ssp(x):
    # shifted softplus, as in continuous-filter convolution nets
    return np.logaddexp(0.0, x) - math.log(2.0)


class ContinuousFilterNet:
    """Distance-only message passing net with fixed random weights.

    Energies depend on atomic numbers and interatomic distances only, hence
    are exactly invariant.  Forces are a gradient-free synthetic head,
    ``F_i = sum_j w_ij (x_i - x_j)``, with invariant scalar edge weights, so
    they rotate with the input.
    """

    def __init__(self, seed: int = 0, features: int = 16, n_rbf: int = 16, layers: int = 3,
                 cutoff: float = 6.0, max_neighbors: int | None = 40):
        rng = np.random.default_rng(seed)
        self.cutoff, self.max_neighbors = cutoff, max_neighbors
        self.centers = np.linspace(0.0, cutoff, n_rbf)
        self.gamma = 0.5 * (n_rbf / cutoff) ** 2
        self.embedding = rng.normal(0.0, 1.0, size=(119, features))
        self.filters = [(uniform_init(rng, features, n_rbf), uniform_init(rng, features, features)) for _ in range(layers)]
        self.updates = [uniform_init(rng, features, features) for _ in range(layers)]
        self.readout = (uniform_init(rng, features, features), uniform_init(rng, 1, features)[0])
        self.force_head = uniform_init(rng, 1, features)[0]

    def _envelope(self, d):
        return 0.5 * (np.cos(np.pi * d / self.cutoff) + 1.0) * (d < self.cutoff)

    def run(self, s: AtomicSystem):
        g = build_radius_graph(s, self.cutoff, self.max_neighbors)
        h = self.embedding[s.atomic_numbers]
        rbf = np.exp(-self.gamma * (g.distance[:, None] - self.centers) ** 2)
        env = self._envelope(g.distance)[:, None]
        layers = []
        for (w1, w2), wu in zip(self.filters, self.updates):
            filt = np.tanh(_ssp(rbf @ w1.T) @ w2.T) * env
            msg = np.zeros_like(h)
            np.add.at(msg, g.dst, filt * h[g.src])
            h = h + np.tanh(msg @ wu.T)
            layers.append(h.copy())
        w_r, w_o = self.readout
        energy = float(np.sum(np.tanh(h @ w_r.T) @ w_o))
        weights = np.tanh((h[g.src] * h[g.dst]) @ self.force_head) * env[:, 0]
        forces = np.zeros_like(s.positions)
        np.add.at(forces, g.dst, weights[:, None] * g.displacement)
        return energy, forces, layers


class PointwiseNet:
    """Per-atom MLP on absolute coordinates and an element embedding.

    Nothing about it is symmetric; it is the stand-in for an unconstrained
    backbone that relies on canonicalization.
    """

    def __init__(self, seed: int = 0, hidden: int = 32, z_features: int = 4):
        rng = np.random.default_rng(seed)
        self.embedding = rng.normal(0.0, 1.0, size=(119, z_features))
        sizes = [3 + z_features, hidden, hidden]
        self.layers = [(uniform_init(rng, o, i), uniform_init(rng, o, 1)[:, 0]) for i, o in zip(sizes[:-1], sizes[1:])]
        self.energy_head = uniform_init(rng, 1, hidden)[0]
        self.force_head = uniform_init(rng, 3, hidden)

    def run_positions(self, positions: np.ndarray, atomic_numbers: np.ndarray):
        x = np.concatenate([np.asarray(positions, dtype=np.float64), self.embedding[atomic_numbers]], axis=1)
        layers = []
        for w, b in self.layers:
            x = np.tanh(x @ w.T + b)
            layers.append(x)
        return float(np.sum(x @ self.energy_head)), x @ self.force_head.T, layers

    def run(self, s: AtomicSystem):
        return self.run_positions(s.positions, s.atomic_numbers)

    def energy(self, positions, atomic_numbers) -> float:
        return self.run_positions(positions, atomic_numbers)[0]

    def forces(self, positions, atomic_numbers) -> np.ndarray:
        return self.run_positions(positions, atomic_numbers)[1]


def reference_invariant_predictor(seed: int = 0, **kwargs) -> Predictor:
    net = ContinuousFilterNet(seed, **kwargs)
    return Predictor(lambda s: net.run(s)[:2], f"continuous-filter(seed={seed}, forces=invariant-only synthetic)",
                     embed=lambda s: net.run(s)[2])


def reference_raw_predictor(seed: int = 0, **kwargs) -> Predictor:
    net = PointwiseNet(seed, **kwargs)
    return Predictor(lambda s: net.run(s)[:2], f"pointwise-raw(seed={seed})", embed=lambda s: net.run(s)[2])


# ------------------------------------------------------------------ wrappers


def _predict_in_frame(base: Predictor, s: AtomicSystem, frame: RigidTransform) -> Output:
    energy, forces = base(canonical_system(s, frame))
    if forces is not None:
        forces = frame.rotate(forces)
    return float(energy), forces


def canonical_frame(s: AtomicSystem, wrapper: Wrapper) -> RigidTransform:
    """The single frame used by the SFA, SFA+SignNet and VN wrappers."""
    rng = np.random.default_rng(wrapper.seed)
    if wrapper.kind is WrapperKind.SFA:
        return stochastic_frame(pca_frames(s, wrapper.frame_mode), rng)
    if wrapper.kind is WrapperKind.SFA_SIGNNET:
        return sfa_signnet_canonicalize(s, wrapper.signnet, rng, wrapper.frame_mode)
    if wrapper.kind is WrapperKind.VN:
        return vn_canonicalize(s, wrapper.vn)
    raise ValueError(f"{wrapper.kind.value} does not use a single frame")


def per_frame_outputs(base: Predictor, s: AtomicSystem, mode: FrameMode | str = FrameMode.E3) -> list[Output]:
    return [_predict_in_frame(base, s, f) for f in pca_frames(s, mode).frames]


def wrap(base: Predictor, wrapper: Wrapper | WrapperKind | str) -> Predictor:
    """Canonicalize the inputs of ``base``.

    ``fa`` averages over the full PCA frame set (8 frames in the default E3
    mode); the other wrappers predict in one frame and rotate forces back.
    """
    if not isinstance(wrapper, Wrapper):
        wrapper = Wrapper(WrapperKind(wrapper))
    if wrapper.kind is WrapperKind.NONE:
        return Predictor(base.fn, base.descriptor, wrapper, base.embed)

    if wrapper.kind is WrapperKind.FA:
        def fn(s):
            outs = per_frame_outputs(base, s, wrapper.frame_mode)
            energy = sum(e for e, _ in outs) / len(outs)
            if outs[0][1] is None:
                return energy, None
            forces = outs[0][1].copy()
            for _, f in outs[1:]:
                forces = forces + f
            return energy, forces / len(outs)
    else:
        def fn(s):
            return _predict_in_frame(base, s, canonical_frame(s, wrapper))

    return Predictor(fn, f"{wrapper.kind.value}[{base.descriptor}]", wrapper, base.embed)


# --------------------------------------------------------------------- audit


@dataclass
class SymmetryReport:
    rotation_invariance_2d: float
    rotation_invariance_3d: float
    reflection_invariance: float
    force_rotation_equivariance: float | None
    force_reflection_equivariance: float | None
    sample_count: int
    transform_count: int
    skipped: int = 0
    predictor: str = ""
    wrapper: dict = field(default_factory=dict)
    aggregation: str = "mean absolute difference"
    seed: int | None = None

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    CSV_COLUMNS = ("predictor", "wrapper", "rotation_invariance_2d", "rotation_invariance_3d",
                   "reflection_invariance", "force_rotation_equivariance", "force_reflection_equivariance",
                   "sample_count", "transform_count", "skipped")

    def csv_row(self) -> list:
        d = self.to_dict()
        d["wrapper"] = self.wrapper.get("kind", "")
        return ["" if d[c] is None else d[c] for c in self.CSV_COLUMNS]

    def to_csv(self) -> str:
        return reports_to_csv([self])


def reports_to_csv(reports) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SymmetryReport.CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
    return out.getvalue()


def _force_residual(f_ref, f_moved, g: RigidTransform) -> float:
    # F(D1) - R^-1 F(D2), worst atom; forces are free vectors so translation is ignored
    diff = f_ref - f_moved @ g.rotation
    return float(np.max(np.linalg.norm(diff, axis=1)))


def _mean(values):
    return float(np.mean(values)) if values else float("nan")


def measure_symmetry(pred: Predictor, data, transforms_per_sample: int = 10, rng=0) -> SymmetryReport:
    """Compare predictions on each system with predictions on transformed copies.

    Per system and per repetition three transforms are drawn: a rotation
    about z, a uniform 3D rotation and a reflection through a random plane
    (all through the origin).  Energies are compared by absolute difference;
    forces by the largest per-atom norm of ``F(D1) - R^-1 F(D2)``.  Systems
    whose prediction fails are skipped and counted.
    """
    data = list(data)
    if not data:
        raise ValueError("measure_symmetry needs at least one system")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    e2d, e3d, eref, f3d, fref = [], [], [], [], []
    skipped = used = 0
    for s in data:
        transforms = [(rotation_z(rng.uniform(0.0, 2.0 * np.pi)), random_rotation(rng), random_reflection(rng))
                      for _ in range(transforms_per_sample)]
        try:
            e0, f0 = pred(s)
            results = [[pred(s.transformed(g)) for g in triple] for triple in transforms]
        except GeoError:
            skipped += 1
            continue
        used += 1
        for (g2, g3, gr), ((e_2, _), (e_3, f_3), (e_r, f_r)) in zip(transforms, results):
            e2d.append(abs(e0 - e_2))
            e3d.append(abs(e0 - e_3))
            eref.append(abs(e0 - e_r))
            if f0 is not None:
                f3d.append(_force_residual(f0, f_3, g3))
                fref.append(_force_residual(f0, f_r, gr))
    return SymmetryReport(
        rotation_invariance_2d=_mean(e2d),
        rotation_invariance_3d=_mean(e3d),
        reflection_invariance=_mean(eref),
        force_rotation_equivariance=_mean(f3d) if f3d else None,
        force_reflection_equivariance=_mean(fref) if fref else None,
        sample_count=used,
        transform_count=used * transforms_per_sample,
        skipped=skipped,
        predictor=pred.descriptor,
        wrapper=pred.wrapper.describe(),
        seed=seed,
    )


@dataclass
class LayerSimilarity:
    matrices: list
    mad: list


def layer_similarity_audit(pred: Predictor, s: AtomicSystem) -> LayerSimilarity:
    """Cosine-similarity matrix and MAD of the node embeddings after every layer."""
    if pred.embed is None:
        raise ValueError(f"predictor {pred.descriptor} does not expose embeddings")
    layers = [np.asarray(e, dtype=np.float64).reshape(s.n_atoms, -1) for e in pred.embed(s)]
    return LayerSimilarity([cosine_similarity_matrix(e) for e in layers], [mad(e) for e in layers])
