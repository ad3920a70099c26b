"""Dataset synthesis and ingestion.

Synthetic generators cover the 2-D experiments (class blobs on a circle for
ID data, an annulus for far-OOD probes); the IDX loader handles MNIST-style
binary files bit-exactly. All generators draw from the seeded Philox stream,
so a (seed, parameters) pair pins the dataset on any platform.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .rng import make_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxError(Exception):
    """Base class for IDX ingestion failures."""


class IdxMagicError(IdxError):
    """File does not carry the expected IDX magic number."""


class IdxCountMismatchError(IdxError):
    """Image and label files disagree on the sample count."""


class IdxTruncatedError(IdxError):
    """File ended before the declared payload was read."""


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.inputs.ndim != 2:
            raise ValueError("dataset inputs must be 2-D")
        if self.labels.ndim != 1 or self.labels.shape[0] != self.inputs.shape[0]:
            raise ValueError("labels must be one integer per sample")
        if self.inputs.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("dataset inputs must be finite")
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be non-negative")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def gaussian_blobs(
    c: int,
    d: int,
    n_per_class: int,
    radius: float,
    std: float,
    seed: int,
    name: str = "blobs",
) -> Dataset:
    """Class means equally spaced on a radius-`radius` circle in the first
    two coordinates (zero elsewhere) plus isotropic Gaussian noise."""
    if c < 2:
        raise ValueError("need at least 2 classes")
    if d < 2:
        raise ValueError("need at least 2 dimensions")
    if n_per_class < 1:
        raise ValueError("need at least one sample per class")
    rng = make_rng(seed)
    angles = 2.0 * np.pi * np.arange(c) / c
    means = np.zeros((c, d))
    means[:, 0] = radius * np.cos(angles)
    means[:, 1] = radius * np.sin(angles)
    labels = np.repeat(np.arange(c), n_per_class)
    noise = rng.normal(size=(c * n_per_class, d)) * std
    inputs = means[labels] + noise
    return Dataset(inputs=inputs, labels=labels, name=name)


def ring_ood(
    d: int,
    n: int,
    inner_radius: float,
    seed: int,
    name: str = "ring",
) -> Dataset:
    """Area-uniform samples on the annulus [inner_radius, 1.5 * inner_radius]
    in the first two coordinates, zeros elsewhere; labels are a sentinel 0."""
    if inner_radius <= 0:
        raise ValueError("inner_radius must be positive")
    if d < 2:
        raise ValueError("need at least 2 dimensions")
    if n < 1:
        raise ValueError("need at least one sample")
    rng = make_rng(seed)
    outer = 1.5 * inner_radius
    radii = np.sqrt(rng.uniform(inner_radius**2, outer**2, size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    inputs = np.zeros((n, d))
    inputs[:, 0] = radii * np.cos(theta)
    inputs[:, 1] = radii * np.sin(theta)
    return Dataset(inputs=inputs, labels=np.zeros(n, dtype=np.intp), name=name)


def _read_exact(fh, n: int, path) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise IdxTruncatedError(
            f"{path}: truncated, wanted {n} more bytes, got {len(data)}"
        )
    return data


def _read_u32_be(fh, path) -> int:
    return struct.unpack(">I", _read_exact(fh, 4, path))[0]


def load_idx(images_path, labels_path) -> Dataset:
    """Parse an MNIST-style IDX image/label file pair.

    Images: big-endian magic 0x00000803, u32 count/rows/cols, then u8 pixels,
    flattened per sample and scaled to [0, 1]. Labels: magic 0x00000801,
    u32 count, u8 labels. Counts must agree.
    """
    with open(images_path, "rb") as fh:
        magic = _read_u32_be(fh, images_path)
        if magic != IDX_IMAGES_MAGIC:
            raise IdxMagicError(
                f"{images_path}: bad image magic 0x{magic:08x}, "
                f"expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        n = _read_u32_be(fh, images_path)
        rows = _read_u32_be(fh, images_path)
        cols = _read_u32_be(fh, images_path)
        pixels = np.frombuffer(
            _read_exact(fh, n * rows * cols, images_path), dtype=np.uint8
        )
    with open(labels_path, "rb") as fh:
        magic = _read_u32_be(fh, labels_path)
        if magic != IDX_LABELS_MAGIC:
            raise IdxMagicError(
                f"{labels_path}: bad label magic 0x{magic:08x}, "
                f"expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        n_labels = _read_u32_be(fh, labels_path)
        labels = np.frombuffer(_read_exact(fh, n_labels, labels_path), dtype=np.uint8)
    if n != n_labels:
        raise IdxCountMismatchError(
            f"image count {n} does not match label count {n_labels}"
        )
    inputs = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    return Dataset(inputs=inputs, labels=labels.astype(np.intp), name="idx")


def save_idx(images_u8: np.ndarray, labels_u8: np.ndarray, images_path, labels_path) -> None:
    """Write (n, rows, cols) uint8 images and (n,) uint8 labels as IDX files."""
    images_u8 = np.asarray(images_u8, dtype=np.uint8)
    labels_u8 = np.asarray(labels_u8, dtype=np.uint8)
    if images_u8.ndim != 3:
        raise ValueError("images must have shape (n, rows, cols)")
    if labels_u8.shape != (images_u8.shape[0],):
        raise ValueError("labels must be one byte per image")
    n, rows, cols = images_u8.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images_u8.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        fh.write(labels_u8.tobytes())


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded permutation then prefix split; both sides must be nonempty."""
    n = data.n_samples
    n_train = int(np.floor(spec.train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise ValueError(
            f"split of {n} samples at fraction {spec.train_fraction} leaves "
            "an empty side"
        )
    perm = make_rng(spec.seed).permutation(n)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    return (
        Dataset(data.inputs[train_idx], data.labels[train_idx], name=f"{data.name}/train"),
        Dataset(data.inputs[test_idx], data.labels[test_idx], name=f"{data.name}/test"),
    )


def save_csv(data: Dataset, path) -> None:
    """Export as `label,x0,x1,...` with a header row."""
    header = "label," + ",".join(f"x{i}" for i in range(data.n_features))
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for label, row in zip(data.labels, data.inputs):
            fh.write(str(int(label)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_csv(path, name: str = "csv") -> Dataset:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("label,"):
            raise ValueError(f"{path}: expected a 'label,x0,...' header")
        labels = []
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    return Dataset(
        inputs=np.asarray(rows, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.intp),
        name=name,
    )


def parse_data_spec(spec: str) -> Dataset:
    """Build a dataset from a CLI spec string.

    Forms:
      blobs:classes=8,dim=2,n=500,radius=4.0,std=0.5,seed=0
      ring:dim=2,n=1000,inner=6.0,seed=0
      idx:images=PATH,labels=PATH
      csv:PATH
    """
    kind, _, rest = spec.partition(":")
    if kind == "csv":
        if not rest:
            raise ValueError("csv spec needs a path: csv:PATH")
        return load_csv(rest)
    params: dict[str, str] = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed data spec item {item!r}")
            params[key.strip()] = value.strip()
    try:
        if kind == "blobs":
            return gaussian_blobs(
                c=int(params.get("classes", 4)),
                d=int(params.get("dim", 2)),
                n_per_class=int(params.get("n", 500)),
                radius=float(params.get("radius", 4.0)),
                std=float(params.get("std", 0.5)),
                seed=int(params.get("seed", 0)),
            )
        if kind == "ring":
            return ring_ood(
                d=int(params.get("dim", 2)),
                n=int(params.get("n", 1000)),
                inner_radius=float(params.get("inner", 6.0)),
                seed=int(params.get("seed", 0)),
            )
        if kind == "idx":
            return load_idx(params["images"], params["labels"])
    except KeyError as exc:
        raise ValueError(f"data spec {spec!r} is missing key {exc}") from None
    raise ValueError(
        f"unknown data kind {kind!r}; valid kinds: blobs, ring, idx, csv"
    )
