"""Synthetic low-dimensional-manifold data, IDX loading and unit-sphere normalization."""

from __future__ import annotations

import csv
import gzip
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import SeededRng, fmt

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Train/test split held as row-per-sample arrays.

    ``train_x`` is ``(n_train, d_in)`` and ``train_y`` is ``(n_train, d_out)``;
    the test arrays follow the same layout and may be empty.
    """

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("train_x", "train_y", "test_x", "test_y"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.train_x.shape[0] != self.train_y.shape[0] or self.test_x.shape[0] != self.test_y.shape[0]:
            raise ValueError("input/label counts differ")
        if self.test_x.shape[0] and (
            self.test_x.shape[1] != self.train_x.shape[1] or self.test_y.shape[1] != self.train_y.shape[1]
        ):
            raise ValueError("train and test dimensions differ")

    @property
    def d_in(self) -> int:
        return self.train_x.shape[1]

    @property
    def d_out(self) -> int:
        return self.train_y.shape[1]

    @property
    def n_train(self) -> int:
        return self.train_x.shape[0]

    def subset(self, n: int) -> "Dataset":
        """First ``n`` training samples, test split dropped."""
        prov = dict(self.provenance, subset=n)
        return Dataset(self.train_x[:n], self.train_y[:n], self.test_x[:0], self.test_y[:0], prov)


@dataclass(frozen=True)
class ManifoldSpec:
    n_total: int
    n_train: int
    d_in: int
    modes: int
    manifold_dim: int
    fill_value: float = 1.0
    seed: int = 1
    label_mode: str = "onehot"  # or "scalar"
    center_box: float = 10.0
    cluster_std: float = 1.0

    def validate(self):
        if not (0 < self.n_train < self.n_total):
            raise ValueError("need 0 < n_train < n_total")
        if not (1 <= self.manifold_dim < self.d_in):
            raise ValueError("need 1 <= manifold_dim < d_in")
        if self.modes < 1:
            raise ValueError("modes must be >= 1")
        if self.label_mode not in ("onehot", "scalar"):
            raise ValueError(f"unknown label_mode {self.label_mode!r}")
        if self.cluster_std < 0 or self.center_box <= 0:
            raise ValueError("cluster_std must be >= 0 and center_box > 0")


def generate_manifold_dataset(spec: ManifoldSpec) -> Dataset:
    """Gaussian-mixture coordinates on a low-dimensional manifold, padded with a constant.

    Mode centres are drawn uniformly from ``[-center_box, center_box]`` and each
    mode is isotropic with standard deviation ``cluster_std``; every sample picks
    its mode uniformly at random. Coordinates past ``manifold_dim`` equal
    ``fill_value``. Inputs are returned unnormalized (see :func:`normalize_unit`).
    """
    spec.validate()
    rng = SeededRng(spec.seed)
    centers = rng.uniform(-spec.center_box, spec.center_box, size=(spec.modes, spec.manifold_dim))
    modes = rng.integers(0, spec.modes, size=spec.n_total)
    noise = rng.gaussian(size=(spec.n_total, spec.manifold_dim), scale=spec.cluster_std)

    x = np.full((spec.n_total, spec.d_in), float(spec.fill_value))
    x[:, : spec.manifold_dim] = centers[modes] + noise

    if spec.label_mode == "onehot":
        y = np.zeros((spec.n_total, spec.modes))
        y[np.arange(spec.n_total), modes] = 1.0
    else:
        y = scalar_labels(modes, spec.modes)[:, None]

    prov = {"kind": "manifold", "spec": spec.__dict__.copy(), "normalized": False}
    k = spec.n_train
    return Dataset(x[:k], y[:k], x[k:], y[k:], prov)


def scalar_labels(index: np.ndarray, n_classes: int) -> np.ndarray:
    """Affine map of class index k onto ``-1 + 2k/(K-1)``; a single class maps to 0."""
    index = np.asarray(index, dtype=np.float64)
    if n_classes == 1:
        return np.zeros_like(index)
    return -1.0 + 2.0 * index / (n_classes - 1)


def normalize_unit(dataset: Dataset) -> Dataset:
    def scale(x, split):
        norms = np.linalg.norm(x, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ValueError(f"zero-norm input at {split} sample {int(zero[0])}")
        return x / norms[:, None]

    prov = dict(dataset.provenance, normalized=True)
    return Dataset(
        scale(dataset.train_x, "train"), dataset.train_y, scale(dataset.test_x, "test"), dataset.test_y, prov
    )


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    with _open(path) as fh:
        raw = fh.read()
    header = 4 + 4 * ndim
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header")
    (got,) = struct.unpack(">I", raw[:4])
    if got != magic:
        raise IdxFormatError(f"{path}: wrong magic 0x{got:08x}, expected 0x{magic:08x}")
    if len(raw) < header:
        raise IdxFormatError(f"{path}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise IdxFormatError(f"{path}: truncated payload ({len(raw) - header} of {count} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, n_classes: int = 10) -> Dataset:
    """Load an IDX image/label pair as a training set with one-hot labels.

    Pixels are scaled to ``[0, 1]`` and flattened row-major.
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and labels.max() >= n_classes:
        raise IdxFormatError(f"label {int(labels.max())} out of range for {n_classes} classes")
    x = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = np.zeros((labels.shape[0], n_classes))
    y[np.arange(labels.shape[0]), labels] = 1.0
    prov = {"kind": "idx", "images": str(images_path), "labels": str(labels_path), "image_shape": images.shape[1:]}
    return Dataset(x, y, x[:0], y[:0], prov)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write uint8 images ``(n, rows, cols)`` and labels ``(n,)`` in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def with_labels(dataset: Dataset, train_y: np.ndarray, test_y: np.ndarray | None = None) -> Dataset:
    if test_y is None:
        test_y = np.zeros((dataset.test_x.shape[0], train_y.shape[1]))
    return replace(dataset, train_y=train_y, test_y=test_y)


def export_csv(dataset: Dataset, path, split: str = "train"):
    """One sample per row: features, then the label index (or value, for scalar labels)."""
    x = dataset.train_x if split == "train" else dataset.test_x
    y = dataset.train_y if split == "train" else dataset.test_y
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(x.shape[1])] + ["label"])
        for xi, yi in zip(x, y):
            label = str(int(np.argmax(yi))) if y.shape[1] > 1 else fmt(yi[0])
            w.writerow([fmt(v) for v in xi] + [label])


def _read_csv_split(path, n_classes: int | None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "label":
        raise ValueError(f"{path}: missing header with trailing 'label' column")
    d_in = len(rows[0]) - 1
    body = rows[1:]
    x = np.array([[float(v) for v in r[:d_in]] for r in body], dtype=np.float64).reshape(len(body), d_in)
    lab = [r[d_in] for r in body]
    if n_classes is None:
        y = np.array([float(v) for v in lab], dtype=np.float64).reshape(-1, 1)
    else:
        y = np.zeros((len(body), n_classes))
        y[np.arange(len(body)), [int(v) for v in lab]] = 1.0
    return x, y


def save_dataset_dir(dataset: Dataset, directory) -> list[Path]:
    """``train.csv``, ``test.csv`` and ``dataset.json`` (label encoding and provenance)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scalar = dataset.d_out == 1
    meta = {
        "label_encoding": "scalar" if scalar else "onehot",
        "n_classes": None if scalar else dataset.d_out,
        "provenance": dataset.provenance,
    }
    paths = [directory / "train.csv", directory / "test.csv", directory / "dataset.json"]
    export_csv(dataset, paths[0], "train")
    export_csv(dataset, paths[1], "test")
    paths[2].write_text(json.dumps(meta, indent=2, sort_keys=True, default=list) + "\n")
    return paths


def load_dataset_dir(directory) -> Dataset:
    directory = Path(directory)
    meta = json.loads((directory / "dataset.json").read_text())
    k = meta["n_classes"] if meta["label_encoding"] == "onehot" else None
    tx, ty = _read_csv_split(directory / "train.csv", k)
    vx, vy = _read_csv_split(directory / "test.csv", k)
    if vx.shape[0] == 0:
        vx, vy = np.zeros((0, tx.shape[1])), np.zeros((0, ty.shape[1]))
    return Dataset(tx, ty, vx, vy, dict(meta["provenance"], source=str(directory)))
