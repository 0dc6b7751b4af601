"""Shared fixtures: synthetic train/test pairs and discovery of optional
IDX data on disk (real-data tests skip themselves when none is present).
"""

import os
from pathlib import Path

import pytest

from splrelm.datasets import Dataset, synthetic_blobs

IDX_NAMES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def find_data_root() -> Path | None:
    """Directory under which mnist/ or fashion-mnist/ IDX files live."""
    candidates = []
    env = os.environ.get("SPLRELM_DATA_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data")
    for root in candidates:
        if root.is_dir():
            return root
    return None


def idx_available(root: Path | None, dataset: str) -> bool:
    if root is None:
        return False
    for base in (root / dataset, root):
        if all((base / name).is_file() for name in IDX_NAMES):
            return True
    return False


def skip_without(dataset: str) -> Path:
    root = find_data_root()
    if not idx_available(root, dataset):
        pytest.skip(
            f"requires the {dataset} IDX files (train-images-idx3-ubyte "
            f"etc.); none found under $SPLRELM_DATA_DIR or ./data, so this "
            f"real-data criterion cannot run in this environment")
    return root


@pytest.fixture(scope="session")
def data_root():
    return find_data_root()


@pytest.fixture(scope="session")
def blob_splits() -> tuple[Dataset, Dataset]:
    """Small fixed train/test pair for model behavior tests."""
    data = synthetic_blobs(800, 32, seed=3)
    train = Dataset(data.features[:600], data.labels[:600], name="blobs-train")
    test = Dataset(data.features[600:], data.labels[600:], name="blobs-test")
    return train, test


@pytest.fixture(scope="session")
def tiny_splits() -> tuple[Dataset, Dataset]:
    """Very small pair for expensive per-sample paths."""
    data = synthetic_blobs(260, 16, seed=11)
    train = Dataset(data.features[:200], data.labels[:200], name="tiny-train")
    test = Dataset(data.features[200:], data.labels[200:], name="tiny-test")
    return train, test
