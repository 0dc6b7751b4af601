"""Dataset ingestion and the evaluation-protocol transforms.

Covers IDX image/label loading (the MNIST-family container format),
deterministic subsetting, Gaussian pixel corruption, the long-tailed
class-imbalance construction, and a self-contained synthetic generator
used by benchmarks and tests when no real dataset is on disk.

All randomized transforms are pure functions of (input, seed). Features
are always float64 in [0, 1]; labels are class indices below NUM_CLASSES.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

NUM_CLASSES = 10
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Base class for malformed IDX input files."""


class BadMagicError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


class Sample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass
class Dataset:
    """Immutable-by-convention bundle of normalized features and labels."""

    features: np.ndarray
    labels: np.ndarray
    name: str = field(default="dataset")

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ValueError(
                f"features must be a nonempty 2-D array, got {self.features.shape}"
            )
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match "
                f"{self.features.shape[0]} samples"
            )
        if not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")
        lo, hi = self.features.min(), self.features.max()
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"features outside [0, 1]: min {lo}, max {hi}")
        if self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES:
            raise ValueError(
                f"labels must lie in [0, {NUM_CLASSES}), got "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(self.features[i], int(self.labels[i]))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=NUM_CLASSES)


def _read_idx(path, expected_magic: int, header_fields: int):
    raw = Path(path).read_bytes()
    header_len = 4 * (1 + header_fields)
    if len(raw) < header_len:
        raise TruncatedFileError(
            f"{path}: only {len(raw)} bytes, header needs {header_len}"
        )
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise BadMagicError(
            f"{path}: magic 0x{magic:08X}, expected 0x{expected_magic:08X}"
        )
    dims = struct.unpack(f">{header_fields}I", raw[4:header_len])
    body = np.frombuffer(raw, dtype=np.uint8, offset=header_len)
    expected = int(np.prod(dims))
    if body.size != expected:
        raise TruncatedFileError(
            f"{path}: payload holds {body.size} bytes, header promises {expected}"
        )
    return dims, body


def load_idx(images_path, labels_path, name: str | None = None) -> Dataset:
    """Load an IDX image/label file pair into a normalized Dataset.

    Pixels are divided by 255 into [0, 1]. Raises BadMagicError,
    TruncatedFileError, or CountMismatchError for the respective defects.
    """
    (n_img, rows, cols), pixels = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    (n_lab,), labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if n_img != n_lab:
        raise CountMismatchError(
            f"{images_path} holds {n_img} images but {labels_path} "
            f"holds {n_lab} labels"
        )
    features = pixels.reshape(n_img, rows * cols).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64),
                   name=name or Path(images_path).stem)


def save_idx(dataset: Dataset, images_path, labels_path) -> None:
    """Write a Dataset back out as an IDX pair (inverse of load_idx).

    Features are scaled by 255 and rounded to bytes; the image side is
    written as N x D x 1 when D is not a perfect square.
    """
    n, d = dataset.features.shape
    side = int(round(d ** 0.5))
    rows, cols = (side, side) if side * side == d else (d, 1)
    pixels = np.clip(np.rint(dataset.features * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        f.write(dataset.labels.astype(np.uint8).tobytes())


def subsample(dataset: Dataset, n: int, seed: int,
              stratified: bool = False) -> Dataset:
    """Draw a deterministic n-sample subset (optionally class-balanced).

    Stratified mode keeps per-class counts within 1 of n / NUM_CLASSES,
    assigning the remainder to the lowest class indices.
    """
    if n > len(dataset):
        raise ValueError(f"cannot draw {n} samples from {len(dataset)}")
    rng = np.random.default_rng(seed)
    if stratified:
        base, extra = divmod(n, NUM_CLASSES)
        chosen = []
        for c in range(NUM_CLASSES):
            want = base + (1 if c < extra else 0)
            members = np.flatnonzero(dataset.labels == c)
            if members.size < want:
                raise ValueError(
                    f"class {c} has {members.size} samples, need {want}"
                )
            chosen.append(rng.choice(members, size=want, replace=False))
        idx = np.concatenate(chosen)
        idx = idx[rng.permutation(idx.size)]
    else:
        idx = rng.permutation(len(dataset))[:n]
    return Dataset(dataset.features[idx], dataset.labels[idx],
                   name=f"{dataset.name}[{n}]")


def add_gaussian_noise(dataset: Dataset, sigma: float, seed: int) -> Dataset:
    """Corrupt features with N(0, sigma^2) noise, clipped back into [0, 1]."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return Dataset(dataset.features.copy(), dataset.labels.copy(),
                       name=dataset.name)
    rng = np.random.default_rng(seed)
    noisy = dataset.features + rng.normal(0.0, sigma, dataset.features.shape)
    return Dataset(np.clip(noisy, 0.0, 1.0), dataset.labels.copy(),
                   name=f"{dataset.name}+noise{sigma:g}")


def long_tail_counts(major: int = 400, minor: int = 200) -> list[int]:
    """Per-class keep counts ramping linearly from major down to minor."""
    step = (major - minor) / (NUM_CLASSES - 1)
    # round half up, so the documented 400..200 ramp is exact
    return [int(np.floor(major - k * step + 0.5)) for k in range(NUM_CLASSES)]


def make_long_tailed(dataset: Dataset, major: int = 400,
                     minor: int = 200) -> Dataset:
    """Impose a long-tailed class distribution (majority class 0 down to 9).

    Keeps the first count_k occurrences of each class in dataset order,
    so the result is deterministic without a seed.
    """
    counts = long_tail_counts(major, minor)
    keep = np.zeros(len(dataset), dtype=bool)
    for c, want in enumerate(counts):
        members = np.flatnonzero(dataset.labels == c)
        if members.size < want:
            raise ValueError(
                f"class {c} has {members.size} samples, long tail needs {want}"
            )
        keep[members[:want]] = True
    return Dataset(dataset.features[keep], dataset.labels[keep],
                   name=f"{dataset.name}~longtail")


def synthetic_blobs(n: int, dim: int = 784, seed: int = 7,
                    noise: float = 0.3, name: str = "blobs") -> Dataset:
    """Deterministic 10-class stand-in dataset, classes interleaved.

    Each class is a fixed random prototype in [0, 1]^dim plus Gaussian
    jitter, clipped back into range. Used by the benchmark harness and by
    tests when no IDX data is available; not a substitute for real data
    in accuracy comparisons against published figures.
    """
    rng = np.random.default_rng(seed)
    prototypes = rng.uniform(0.0, 1.0, size=(NUM_CLASSES, dim))
    labels = np.arange(n, dtype=np.int64) % NUM_CLASSES
    features = prototypes[labels] + rng.normal(0.0, noise, size=(n, dim))
    return Dataset(np.clip(features, 0.0, 1.0), labels, name=name)
