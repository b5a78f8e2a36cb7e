"""IDX (MNIST-style) file reading and writing."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BadMagic, TruncatedFile

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _open(path):
    path = Path(path)
    with (gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")) as fh:
        return fh.read()


def load_idx(path) -> np.ndarray:
    """Parse an unsigned-byte IDX file.

    Image files (magic 0x803) come back as float64 in [0, 1] with shape
    ``(n, rows, cols)``; label files (magic 0x801) as an int64 vector.
    """
    raw = _open(path)
    if len(raw) < 8:
        raise TruncatedFile(f"{path}: header too short")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic == IMAGES_MAGIC:
        if len(raw) < 16:
            raise TruncatedFile(f"{path}: header too short")
        n, rows, cols = struct.unpack(">III", raw[4:16])
        count, offset, shape = n * rows * cols, 16, (n, rows, cols)
    elif magic == LABELS_MAGIC:
        (n,) = struct.unpack(">I", raw[4:8])
        count, offset, shape = n, 8, (n,)
    else:
        raise BadMagic(f"{path}: unexpected magic 0x{magic:08x}")
    if len(raw) < offset + count:
        raise TruncatedFile(f"{path}: expected {count} data bytes, found {len(raw) - offset}")
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=offset).reshape(shape)
    if magic == IMAGES_MAGIC:
        return data.astype(np.float64) / 255.0
    return data.astype(np.int64)


def write_idx(path, array) -> None:
    """Write a uint8 array as IDX: 3-D arrays as images, 1-D as labels."""
    arr = np.asarray(array, dtype=np.uint8)
    if arr.ndim == 3:
        header = struct.pack(">IIII", IMAGES_MAGIC, *arr.shape)
    elif arr.ndim == 1:
        header = struct.pack(">II", LABELS_MAGIC, arr.shape[0])
    else:
        raise ValueError("IDX writer supports 1-D labels or 3-D images")
    payload = header + arr.tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as fh:
            fh.write(payload)
    else:
        path.write_bytes(payload)


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.x)

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.x[:n], self.y[:n])


_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find(directory: Path, stem: str) -> Path:
    for cand in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        if (directory / cand).exists():
            return directory / cand
    raise FileNotFoundError(f"no {stem}[.gz] in {directory}")


def load_mnist_dir(directory, split: str = "train") -> Dataset:
    """Load a split from a directory with the standard MNIST file names."""
    directory = Path(directory)
    img_name, lbl_name = _NAMES[split]
    images = load_idx(_find(directory, img_name))
    labels = load_idx(_find(directory, lbl_name))
    if len(images) != len(labels):
        raise ValueError("image and label counts differ")
    return Dataset(images.reshape(len(images), -1), labels)


def export_mlxtend_subset(directory, n_test: int = 1000) -> Path:
    """Write the 5000-image MNIST sample bundled with mlxtend as IDX files.

    Every fifth image goes to the test split until ``n_test`` are taken, so
    both splits stay class balanced.
    """
    from mlxtend.data import mnist_data

    X, y = mnist_data()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    idx = np.arange(len(X))
    test_mask = (idx % 5 == 0) & (np.cumsum(idx % 5 == 0) <= n_test)
    images = X.reshape(-1, 28, 28).astype(np.uint8)
    for split, mask in (("train", ~test_mask), ("test", test_mask)):
        img_name, lbl_name = _NAMES[split]
        write_idx(directory / img_name, images[mask])
        write_idx(directory / lbl_name, y[mask].astype(np.uint8))
    return directory
