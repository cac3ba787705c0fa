"""Per-neuron feature visualization and weight statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import SeededRng, fmt
from .rdsim import to_gray8


@dataclass(frozen=True)
class AscentConfig:
    epsilon: float = 0.007
    step_size: float = 0.1
    iterations: int = 100

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class AscentResult:
    delta: np.ndarray
    excitation: np.ndarray  # objective value after each iterate (index 0: delta = 0)
    dead: bool = False


def maximize_excitation(u, x0, config: AscentConfig = AscentConfig(), through_relu: bool = False) -> AscentResult:
    """Projected gradient ascent of ``u . (x0 + delta)`` over the l-inf ball of radius epsilon.

    With ``through_relu`` the objective is ``relu(u . (x0 + delta))``. The
    largest preactivation reachable in the ball is ``u . x0 + eps * ||u||_1``;
    if that is negative the unit cannot fire, so ``delta = 0`` is returned with
    ``dead=True``. Otherwise the ascent follows the preactivation.
    """
    u = np.asarray(u, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if u.shape != x0.shape:
        raise ValueError(f"weight shape {u.shape} != input shape {x0.shape}")
    eps = config.epsilon
    obj = (lambda d: max(float(u @ (x0 + d)), 0.0)) if through_relu else (lambda d: float(u @ (x0 + d)))
    delta = np.zeros_like(x0)
    if through_relu and float(u @ x0) + eps * float(np.abs(u).sum()) < 0:
        return AscentResult(delta, np.array([obj(delta)]), dead=True)
    trace = [obj(delta)]
    for _ in range(config.iterations):
        delta = np.clip(delta + config.step_size * u, -eps, eps)
        trace.append(obj(delta))
    return AscentResult(delta, np.array(trace))


def random_base_input(d_in: int, rng: SeededRng) -> np.ndarray:
    """Shared uniform [0, 1) base image for all neurons."""
    return rng.uniform(0.0, 1.0, size=d_in)


def top_rows_by_norm(U, top_k: int) -> np.ndarray:
    """Indices of the ``top_k`` rows with the largest L2 norm; equal norms keep index order."""
    norms = np.linalg.norm(np.asarray(U, dtype=np.float64), axis=1)
    return np.argsort(-norms, kind="stable")[:top_k]


def export_weight_images(U, image_height: int, image_width: int, top_k: int = 9) -> list[tuple[int, np.ndarray]]:
    """``(row index, 8-bit image)`` for the ``top_k`` largest-norm rows of U, reshaped row-major."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] != image_height * image_width:
        raise ValueError(f"rows of length {U.shape[-1]} cannot form {image_height}x{image_width} images")
    return [(int(j), to_gray8(U[j].reshape(image_height, image_width))) for j in top_rows_by_norm(U, top_k)]


def neuron_variances(U) -> np.ndarray:
    """Population variance of each row."""
    return np.var(np.asarray(U, dtype=np.float64), axis=1)


def write_variances_csv(path, variances):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["neuron", "variance"])
        for j, v in enumerate(variances):
            w.writerow([str(j), fmt(v)])
