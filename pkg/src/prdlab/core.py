"""Dense numerics shared by every module: seeded sampling and extreme eigenvalues."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    pass


class SeededRng:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Two instances built from the same pair produce identical draws. Independent
    streams for parallel shards are obtained with :meth:`spawn`.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream_id={self.stream_id})"

    def spawn(self, stream_id: int) -> "SeededRng":
        return SeededRng(self.seed, stream_id)

    def gaussian(self, size=None, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=size)

    def rademacher(self, size=None) -> np.ndarray:
        return self._gen.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


@dataclass(frozen=True)
class Spectrum:
    lambda_min: float
    lambda_max: float
    iterations_used: int

    def __post_init__(self):
        if not (np.isfinite(self.lambda_min) and np.isfinite(self.lambda_max)):
            raise ValueError("non-finite eigenvalue estimate")
        if self.lambda_min > self.lambda_max:
            raise ValueError(f"lambda_min {self.lambda_min} > lambda_max {self.lambda_max}")


def _check_symmetric(M: np.ndarray, tol: float) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > tol:
        raise ValueError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e} > tol {tol:.1e})")
    return 0.5 * (M + M.T)


def _dominant_eigenvalue(A: np.ndarray, v: np.ndarray, tol: float, max_iters: int) -> tuple[float, int]:
    """Power iteration on a positive semidefinite ``A``; returns the Rayleigh quotient.

    Stops once the tail of the (geometrically converging) Rayleigh-quotient
    sequence is estimated below ``tol``.
    """
    v = v / np.linalg.norm(v)
    rho = float(v @ A @ v)
    prev_step = None
    for it in range(1, max_iters + 1):
        w = A @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, it
        v = w / nrm
        new_rho = float(v @ A @ v)
        step = abs(new_rho - rho)
        rho = new_rho
        if step <= 1e-3 * tol:
            return rho, it
        if prev_step is not None and prev_step > 0.0:
            q = step / prev_step
            if q < 1.0 and step * q / (1.0 - q) <= 1e-2 * tol and step <= tol:
                return rho, it
        prev_step = step
    raise ConvergenceError(f"power iteration did not converge in {max_iters} iterations")


def spectral_extremes(M, tol: float = 1e-8, max_iters: int = 10_000, seed: int = 0) -> Spectrum:
    """Smallest and largest eigenvalue of a symmetric matrix by shifted power iteration.

    The largest eigenvalue comes from power iteration on ``M + sI``, where the
    shift ``s`` (zero for positive semidefinite input, as with Gram matrices)
    lifts the Gershgorin lower bound to 0 so the dominant eigenvalue is the
    largest rather than the largest in magnitude. The smallest eigenvalue then
    comes from power iteration on ``cI - M`` with ``c = lambda_max``.
    """
    M = _check_symmetric(M, tol)
    n = M.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if n > 10_000:
        raise ValueError("matrix dimension above 1e4")
    if n == 1:
        x = float(M[0, 0])
        return Spectrum(x, x, 0)

    radius = np.sum(np.abs(M), axis=1) - np.abs(np.diag(M))
    lower = float(np.min(np.diag(M) - radius))
    shift = max(0.0, -lower)
    # fixed start vector keeps results reproducible
    v0 = SeededRng(seed, 7).gaussian(n)

    top, it1 = _dominant_eigenvalue(M + shift * np.eye(n), v0, tol, max_iters)
    lam_max = top - shift
    c = lam_max
    bottom, it2 = _dominant_eigenvalue(c * np.eye(n) - M, v0, tol, max_iters)
    lam_min = min(c - bottom, lam_max)
    return Spectrum(float(lam_min), float(lam_max), it1 + it2)


def spectral_norm(M, tol: float = 1e-8, max_iters: int = 10_000) -> float:
    """Operator 2-norm of a symmetric matrix."""
    s = spectral_extremes(M, tol=tol, max_iters=max_iters)
    return max(abs(s.lambda_min), abs(s.lambda_max))


def relu(z):
    return np.maximum(z, 0.0)


def active(z):
    # closed at zero: the kink counts as active
    return (z >= 0.0).astype(np.float64)


def fmt(x: float) -> str:
    """Round-trip decimal formatting for text outputs."""
    return repr(float(x))
