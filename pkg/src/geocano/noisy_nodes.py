"""Noisy Nodes input transform, loss weighting, and embedding-collapse metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroEmbeddings, InputError, ShapeMismatch
from .geometry import _as_generator

DEFAULT_SIGMA = 0.3


class Branch(str, enum.Enum):
    INTERPOLATED = "interpolated"
    INITIAL_ONLY = "initial_only"


class FormulaMode(str, enum.Enum):
    # x~ = (1 - gamma) x_init + gamma x_rel + Z, i.e. x_init + gamma (x_rel - x_init) + Z
    ANCHORED = "anchored"
    # x~ = gamma (x_rel - x_init) + Z, no anchor at x_init
    LITERAL = "literal"


@dataclass(frozen=True, eq=False)
class NoisySample:
    x_tilde: np.ndarray
    delta_pos: np.ndarray  # x_rel - x_tilde, the denoising target
    gamma: float
    branch: Branch
    noise_draw: np.ndarray

    def metadata(self) -> dict:
        return {"gamma": self.gamma, "branch": self.branch.value}


def noisy_transform(x_init, x_rel, sigma: float = DEFAULT_SIGMA, rng=None,
                    formula_mode: FormulaMode | str = FormulaMode.ANCHORED,
                    branch: Branch | str | None = None, gamma: float | None = None) -> NoisySample:
    """Perturb one graph's positions.

    Draw order per call: interpolation factor ``gamma ~ U[0, 1]``, then a fair
    coin, then (Interpolated branch only) iid ``N(0, sigma)`` noise per
    coordinate.  ``branch`` and ``gamma`` may be forced; forced values still
    consume their draws so sequences stay aligned.
    """
    x_init = np.asarray(x_init, dtype=np.float64)
    x_rel = np.asarray(x_rel, dtype=np.float64)
    if x_init.shape != x_rel.shape or x_init.ndim != 2 or x_init.shape[1] != 3:
        raise ShapeMismatch(f"initial {x_init.shape} and relaxed {x_rel.shape} positions must both be (n, 3)")
    if not sigma >= 0:
        raise InputError("sigma must be non-negative")
    mode = FormulaMode(formula_mode)
    rng = _as_generator(rng)

    drawn_gamma = float(rng.random())
    heads = bool(rng.random() < 0.5)
    gamma = drawn_gamma if gamma is None else float(gamma)
    branch = (Branch.INTERPOLATED if heads else Branch.INITIAL_ONLY) if branch is None else Branch(branch)

    if branch is Branch.INITIAL_ONLY:
        noise = np.zeros_like(x_init)
        x_tilde = x_init.copy()
    else:
        noise = rng.normal(0.0, sigma, size=x_init.shape) if sigma > 0 else np.zeros_like(x_init)
        if mode is FormulaMode.ANCHORED:
            # convex-combination form hits both endpoints exactly in floating point
            x_tilde = ((1.0 - gamma) * x_init + gamma * x_rel) + noise
        else:
            x_tilde = gamma * (x_rel - x_init) + noise
    return NoisySample(x_tilde, x_rel - x_tilde, gamma, branch, noise)


def combined_loss(primary_loss: float, aux_loss: float, aux_weight: float) -> float:
    if aux_weight < 0:
        raise InputError("auxiliary weight must be non-negative")
    return aux_weight * aux_loss + primary_loss


@dataclass(frozen=True)
class AuxWeightSchedule:
    """Linear decay of the auxiliary loss weight over training."""

    total_steps: int
    start_weight: float = 15.0
    end_weight: float = 1.0

    def __post_init__(self):
        if self.total_steps < 1:
            raise InputError("total_steps must be at least 1")
        if not self.start_weight >= self.end_weight >= 0:
            raise InputError("need start_weight >= end_weight >= 0")

    def __call__(self, step: int) -> float:
        return aux_weight_at(self, step)


def aux_weight_at(schedule: AuxWeightSchedule, step: int) -> float:
    if step < 0:
        raise InputError("step must be non-negative")
    if schedule.total_steps == 1:
        frac = 1.0 if step > 0 else 0.0
    else:
        frac = min(step / (schedule.total_steps - 1), 1.0)
    return schedule.start_weight + (schedule.end_weight - schedule.start_weight) * frac


def cosine_similarity_matrix(embeddings) -> np.ndarray:
    """Pairwise cosine similarity; rows of zero norm are similar to nothing (0).

    Rows that normalize to the same unit vector get exactly 1, so fully
    collapsed embeddings are recognized without rounding noise.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or len(e) < 1:
        raise ShapeMismatch("embeddings must be an (n, d) array with n >= 1")
    norms = np.linalg.norm(e, axis=1)
    unit = np.divide(e, norms[:, None], out=np.zeros_like(e), where=norms[:, None] > 0)
    sim = unit @ unit.T
    sim = 0.5 * (sim + sim.T)
    np.clip(sim, -1.0, 1.0, out=sim)
    nz = norms > 0
    _, group = np.unique(unit, axis=0, return_inverse=True)
    group = group.reshape(-1)
    same = (group[:, None] == group[None, :]) & nz[:, None] & nz[None, :]
    sim[same] = 1.0
    return sim


def mad(embeddings) -> float:
    """Mean cosine distance over ordered pairs of distinct nodes.

    Pairs involving a zero row count as distance 1.  Collapsed (all equal)
    embeddings give 0.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or len(e) < 2:
        raise ShapeMismatch("MAD needs an (n, d) array with n >= 2")
    if not np.any(e):
        raise AllZeroEmbeddings("every embedding row is zero")
    dist = 1.0 - cosine_similarity_matrix(e)
    n = len(e)
    off = dist.sum() - np.trace(dist)
    return float(off / (n * (n - 1)))
