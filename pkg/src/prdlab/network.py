"""Two-layer ReLU generator and critic with their initialization schemes."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .core import SeededRng, relu

_MAGIC = b"PRDN"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIIQ")  # magic, version, kind, m, d_in, d_out, mode, seed
_MODES = {"theory": 0, "xavier": 1}
_KIND_GEN, _KIND_DISC = 0, 1


@dataclass(frozen=True)
class InitSnapshot:
    U0: np.ndarray
    V0: np.ndarray

    def __post_init__(self):
        for name in ("U0", "V0"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass
class GeneratorNet:
    """``f(x) = V relu(U x) / sqrt(d_out m)``; the scalar network is the ``d_out == 1`` case."""

    U: np.ndarray
    V: np.ndarray
    mode: str = "theory"
    seed: int = 0
    snapshot: InitSnapshot | None = field(default=None, repr=False)

    def __post_init__(self):
        self.U = np.array(self.U, dtype=np.float64)
        self.V = np.array(self.V, dtype=np.float64)
        if self.U.ndim != 2 or self.V.ndim != 2 or self.V.shape[1] != self.U.shape[0]:
            raise ValueError(f"inconsistent shapes U{self.U.shape} V{self.V.shape}")
        if self.snapshot is None:
            self.snapshot = InitSnapshot(self.U, self.V)

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def d_in(self) -> int:
        return self.U.shape[1]

    @property
    def d_out(self) -> int:
        return self.V.shape[0]

    @property
    def scale(self) -> float:
        return 1.0 / np.sqrt(self.d_out * self.m)

    def copy(self) -> "GeneratorNet":
        return GeneratorNet(self.U.copy(), self.V.copy(), self.mode, self.seed, self.snapshot)


@dataclass
class DiscriminatorNet:
    """Critic ``g(y) = a^T relu(W y) / sqrt(m)`` with rows of W kept inside an L-ball."""

    W: np.ndarray
    a: np.ndarray
    L: float
    seed: int = 0

    def __post_init__(self):
        self.W = np.array(self.W, dtype=np.float64)
        self.a = np.array(self.a, dtype=np.float64).reshape(-1)
        if self.W.ndim != 2 or self.a.shape[0] != self.W.shape[0]:
            raise ValueError(f"inconsistent shapes W{self.W.shape} a{self.a.shape}")

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def d_out(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "DiscriminatorNet":
        return DiscriminatorNet(self.W.copy(), self.a.copy(), self.L, self.seed)


def init_generator(m: int, d_in: int, d_out: int, mode: str = "theory", rng: SeededRng | None = None) -> GeneratorNet:
    """Hidden weights are standard Gaussian in both modes; output weights are
    Rademacher in ``theory`` mode and standard Gaussian in ``xavier`` mode (the
    output scaling already carries the Xavier factor)."""
    if min(m, d_in, d_out) < 1:
        raise ValueError("m, d_in and d_out must be >= 1")
    if mode not in _MODES:
        raise ValueError(f"unknown init mode {mode!r}")
    rng = rng or SeededRng(0)
    U = rng.gaussian((m, d_in))
    V = rng.rademacher((d_out, m)) if mode == "theory" else rng.gaussian((d_out, m))
    return GeneratorNet(U, V, mode, rng.seed)


def init_discriminator(m: int, d_out: int, L: float, rng: SeededRng | None = None) -> DiscriminatorNet:
    if L <= 0:
        raise ValueError("L must be positive")
    from .objective import project_row_norm

    rng = rng or SeededRng(0)
    W = project_row_norm(rng.gaussian((m, d_out)), L)
    a = rng.rademacher(m)
    return DiscriminatorNet(W, a, float(L), rng.seed)


def forward_generator(net: GeneratorNet, x) -> np.ndarray:
    """Prediction for one input vector (returns ``(d_out,)``) or a batch ``(n, d_in)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.d_in:
        raise ValueError(f"input length {x.shape[-1]} != d_in {net.d_in}")
    h = relu(x @ net.U.T)
    return net.scale * (h @ net.V.T)


def forward_discriminator(disc: DiscriminatorNet, y) -> np.ndarray | float:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != disc.d_out:
        raise ValueError(f"critic input length {y.shape[-1]} != {disc.d_out}")
    out = relu(y @ disc.W.T) @ disc.a / np.sqrt(disc.m)
    return float(out) if y.ndim == 1 else out


def save_generator(net: GeneratorNet, path):
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, _KIND_GEN, net.m, net.d_in, net.d_out, _MODES[net.mode],
                              net.seed & 0xFFFFFFFFFFFFFFFF))
        fh.write(net.U.astype("<f8").tobytes())
        fh.write(net.V.astype("<f8").tobytes())
        fh.write(net.snapshot.U0.astype("<f8").tobytes())
        fh.write(net.snapshot.V0.astype("<f8").tobytes())


def save_discriminator(disc: DiscriminatorNet, path):
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, _KIND_DISC, disc.m, 0, disc.d_out, 0, disc.seed & 0xFFFFFFFFFFFFFFFF))
        fh.write(struct.pack("<d", disc.L))
        fh.write(disc.W.astype("<f8").tobytes())
        fh.write(disc.a.astype("<f8").tobytes())


def _read_header(raw: bytes):
    if len(raw) < _HEADER.size:
        raise ValueError("truncated network file")
    magic, version, kind, m, d_in, d_out, mode, seed = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not a network checkpoint")
    return kind, m, d_in, d_out, mode, seed


def _take(raw, offset, count, shape):
    end = offset + 8 * count
    if end > len(raw):
        raise ValueError("truncated network payload")
    return np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).astype(np.float64), end


def load_network(path) -> GeneratorNet | DiscriminatorNet:
    raw = open(path, "rb").read()
    kind, m, d_in, d_out, mode, seed = _read_header(raw)
    off = _HEADER.size
    if kind == _KIND_GEN:
        U, off = _take(raw, off, m * d_in, (m, d_in))
        V, off = _take(raw, off, d_out * m, (d_out, m))
        U0, off = _take(raw, off, m * d_in, (m, d_in))
        V0, off = _take(raw, off, d_out * m, (d_out, m))
        mode_name = {v: k for k, v in _MODES.items()}[mode]
        return GeneratorNet(U, V, mode_name, seed, InitSnapshot(U0, V0))
    if kind == _KIND_DISC:
        (L,) = struct.unpack_from("<d", raw, off)
        off += 8
        W, off = _take(raw, off, m * d_out, (m, d_out))
        a, off = _take(raw, off, m, (m,))
        return DiscriminatorNet(W, a, L, seed)
    raise ValueError(f"unknown network kind {kind}")
