"""Explicit-Euler reaction-diffusion integrators on a periodic 2-D grid.

Two models: the linear two-morphogen Turing system

    du/dt = a(u-h) + b(v-k) + mu  lap(u)
    dv/dt = c(u-h) + d(v-k) + nu  lap(v)

and Gray-Scott

    du/dt = F(1-u) - u v^2 + mu lap(u)
    dv/dt = -(F+k) v + u v^2 + nu lap(v).

``laplacian`` is the unit-spacing 5-point stencil; steppers divide it by
``dx**2`` so a parameter set can place the grid on a physical domain.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field

import numpy as np

from .core import SeededRng, fmt


class NonFiniteField(FloatingPointError):
    pass


@dataclass(frozen=True)
class RDGrid:
    u: np.ndarray
    v: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64)
        v = np.array(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise ValueError(f"u and v must be equal-shape 2-D fields, got {u.shape} and {v.shape}")
        if u.shape[0] < 3 or u.shape[1] < 3:
            raise ValueError("grid must be at least 3x3")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class TuringParams:
    a: float = 1.0
    b: float = -1.0
    c: float = 3.0
    d: float = -1.5
    h: float = 1.0
    k: float = 1.0
    mu: float = 1e-4
    nu: float = 6e-4
    dt: float = 0.02
    dx: float = 0.01

    def __post_init__(self):
        if not self.dt > 0 or not self.dx > 0:
            raise ValueError("dt and dx must be positive")

    def growth_rates(self, n: int) -> np.ndarray:
        """Largest real part of the linearized growth rate for every periodic mode of an ``n x n`` grid."""
        q = _stencil_symbol(n) / self.dx**2  # -lap eigenvalues
        tr = self.a + self.d - (self.mu + self.nu) * q
        det = (self.a - self.mu * q) * (self.d - self.nu * q) - self.b * self.c
        disc = tr * tr - 4 * det + 0j
        return np.real((tr + np.sqrt(disc)) / 2)


@dataclass(frozen=True)
class GrayScottParams:
    F: float = 0.025
    k: float = 0.055
    mu: float = 2e-5
    nu: float = 1e-5
    dt: float = 1.0
    dx: float = 0.01

    def __post_init__(self):
        if not self.dt > 0 or not self.dx > 0:
            raise ValueError("dt and dx must be positive")
        if self.F < 0 or self.k < 0:
            raise ValueError("F and k must be non-negative")


TURING_PRESETS = {"paper": TuringParams()}
GRAYSCOTT_PRESETS = {
    "gs1": GrayScottParams(F=0.025, k=0.055),
    "gs2": GrayScottParams(F=0.025, k=0.060),
    "gs3": GrayScottParams(F=0.040, k=0.060),
    "gs4": GrayScottParams(F=0.035, k=0.065),
}


def _stencil_symbol(n: int) -> np.ndarray:
    kx = 2 * np.pi * np.arange(n) / n
    return (4 - 2 * np.cos(kx)[:, None] - 2 * np.cos(kx)[None, :]).ravel()


def laplacian(f: np.ndarray, at: tuple[int, int] | None = None):
    """Periodic 5-point Laplacian with unit spacing, for the whole field or one cell."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or min(f.shape) < 3:
        raise ValueError("laplacian needs a 2-D field of at least 3x3")
    if at is not None:
        i, j = at
        H, W = f.shape
        return float(f[(i - 1) % H, j] + f[(i + 1) % H, j] + f[i, (j - 1) % W] + f[i, (j + 1) % W] - 4 * f[i, j])
    return np.roll(f, 1, 0) + np.roll(f, -1, 0) + np.roll(f, 1, 1) + np.roll(f, -1, 1) - 4 * f


def init_turing(shape: tuple[int, int], h: float, k: float, amplitude: float, rng: SeededRng | None = None) -> RDGrid:
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    rng = rng or SeededRng(0)
    if amplitude == 0:
        return RDGrid(np.full(shape, float(h)), np.full(shape, float(k)))
    u = h + rng.uniform(-amplitude, amplitude, size=shape)
    v = k + rng.uniform(-amplitude, amplitude, size=shape)
    return RDGrid(u, v)


def init_grayscott(shape: tuple[int, int], patch: int = 5) -> RDGrid:
    """u = 1, v = 0 everywhere except a central ``patch x patch`` square where they are swapped."""
    H, W = shape
    if patch < 0 or patch > min(H, W):
        raise ValueError(f"patch {patch} does not fit a {H}x{W} grid")
    u, v = np.ones(shape), np.zeros(shape)
    r0, c0 = (H - patch) // 2, (W - patch) // 2
    u[r0 : r0 + patch, c0 : c0 + patch] = 0.0
    v[r0 : r0 + patch, c0 : c0 + patch] = 1.0
    return RDGrid(u, v)


def _finish(grid: RDGrid, u, v, dt) -> RDGrid:
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise NonFiniteField(f"non-finite field after t={grid.time + dt:g}")
    return RDGrid(u, v, grid.time + dt)


def step_turing(grid: RDGrid, p: TuringParams) -> RDGrid:
    u, v = grid.u, grid.v
    s = 1.0 / p.dx**2
    du = p.a * (u - p.h) + p.b * (v - p.k) + p.mu * s * laplacian(u)
    dv = p.c * (u - p.h) + p.d * (v - p.k) + p.nu * s * laplacian(v)
    return _finish(grid, u + p.dt * du, v + p.dt * dv, p.dt)


def step_grayscott(grid: RDGrid, p: GrayScottParams) -> RDGrid:
    u, v = grid.u, grid.v
    s = 1.0 / p.dx**2
    uvv = u * v * v
    du = p.F * (1.0 - u) - uvv + p.mu * s * laplacian(u)
    dv = -(p.F + p.k) * v + uvv + p.nu * s * laplacian(v)
    return _finish(grid, u + p.dt * du, v + p.dt * dv, p.dt)


def spatial_stats(grid: RDGrid) -> tuple[float, float, float, float]:
    """Population variance of u and v, then min and max over both fields."""
    lo = min(float(grid.u.min()), float(grid.v.min()))
    hi = max(float(grid.u.max()), float(grid.v.max()))
    return float(np.var(grid.u)), float(np.var(grid.v)), lo, hi


@dataclass
class RDRun:
    snapshots: list[tuple[int, RDGrid]] = field(default_factory=list)
    stats: list[tuple[int, float, float, float, float, float]] = field(default_factory=list)
    final: RDGrid | None = None

    def write_stats_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "time", "var_u", "var_v", "min", "max"])
            for step, *vals in self.stats:
                w.writerow([str(step)] + [fmt(x) for x in vals])


def run_rd(model: str, params, grid: RDGrid, steps: int, snapshot_every: int, stats_every: int | None = None) -> RDRun:
    """Integrate ``steps`` Euler steps from ``grid``.

    Snapshots are kept at step 0 and every ``snapshot_every`` steps
    (``floor(steps / snapshot_every) + 1`` frames); statistics follow
    ``stats_every`` (default: the snapshot cadence).
    """
    if steps < 0 or snapshot_every < 1:
        raise ValueError("need steps >= 0 and snapshot_every >= 1")
    stepper = {"turing": step_turing, "grayscott": step_grayscott}.get(model)
    if stepper is None:
        raise ValueError(f"unknown model {model!r}")
    stats_every = stats_every or snapshot_every
    run = RDRun()

    def observe(i, g):
        if i % snapshot_every == 0:
            run.snapshots.append((i, g))
        if i % stats_every == 0:
            run.stats.append((i, g.time, *spatial_stats(g)))

    observe(0, grid)
    for i in range(1, steps + 1):
        grid = stepper(grid, params)
        observe(i, grid)
    run.final = grid
    return run


def to_gray8(f: np.ndarray) -> np.ndarray:
    """Min-max scale a field to 0..255; a constant field maps to 128."""
    f = np.asarray(f, dtype=np.float64)
    lo, hi = float(f.min()), float(f.max())
    if hi == lo:
        return np.full(f.shape, 128, dtype=np.uint8)
    return np.rint((f - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_pgm(path, image: np.ndarray):
    """Binary P5 greyscale image, maxval 255. Float input is normalized with :func:`to_gray8`."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = to_gray8(img)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_pgm(path) -> np.ndarray:
    raw = open(path, "rb").read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+255\s", raw)
    if m is None:
        raise ValueError(f"{path}: not an 8-bit P5 image")
    w, h = int(m.group(1)), int(m.group(2))
    data = raw[m.end():]
    if len(data) != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)
