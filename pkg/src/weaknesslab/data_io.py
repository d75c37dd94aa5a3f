"""IDX ingestion, deterministic train/probe/test splits and a synthetic dataset."""
from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
N_PIXELS = 784
N_CLASSES = 10
DATA_DIR_ENV = "WEAKNESSLAB_DATA_DIR"

CACHE_MAGIC = b"WLDS"
CACHE_VERSION = 1


class FormatError(ValueError):
    """A data file does not match its declared layout."""


@dataclass(frozen=True, eq=False)
class Dataset:
    images: np.ndarray  # (n, d) float32 in [0, 1]
    labels: np.ndarray  # (n,) uint8
    name: str

    def __post_init__(self):
        if self.images.ndim != 2 or self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("images must be (n, d) with one label per row")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise ValueError("pixels must lie in [0, 1]")
        if self.labels.size and int(self.labels.max()) >= N_CLASSES:
            raise ValueError("labels must be < 10")

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, idx) -> tuple[np.ndarray, np.ndarray]:
        """Rows as float64 (network precision) plus labels as int64."""
        idx = np.asarray(idx, dtype=np.int64)
        return self.images[idx].astype(np.float64), self.labels[idx].astype(np.int64)


@dataclass(frozen=True, eq=False)
class Corpus:
    """Official train pool plus the held-out official test set."""

    train: Dataset
    test: Dataset

    @property
    def name(self) -> str:
        return self.train.name


def _read_header(buf: bytes, path, magic: int, ndim: int) -> tuple[int, ...]:
    if len(buf) < 4 + 4 * ndim:
        raise FormatError(f"{path}: truncated header")
    got = struct.unpack(">I", buf[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    return struct.unpack(f">{ndim}I", buf[4:4 + 4 * ndim])


def load_idx(images_path, labels_path, name: str | None = None) -> Dataset:
    """Decode a big-endian IDX image/label file pair; pixels are scaled by 1/255."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    ib = images_path.read_bytes()
    lb = labels_path.read_bytes()
    n, rows, cols = _read_header(ib, images_path, IMAGES_MAGIC, 3)
    if rows * cols != N_PIXELS:
        raise FormatError(f"{images_path}: image dims {rows}x{cols}, expected 28x28")
    if len(ib) != 16 + n * rows * cols:
        raise FormatError(f"{images_path}: pixel payload is {len(ib) - 16} bytes, header promises {n * rows * cols}")
    (n_labels,) = _read_header(lb, labels_path, LABELS_MAGIC, 1)
    if n_labels != n:
        raise FormatError(f"{labels_path}: label count {n_labels} != image count {n}")
    if len(lb) != 8 + n:
        raise FormatError(f"{labels_path}: label payload is {len(lb) - 8} bytes, header promises {n}")
    pixels = np.frombuffer(ib, dtype=np.uint8, offset=16).reshape(n, N_PIXELS)
    labels = np.frombuffer(lb, dtype=np.uint8, offset=8).copy()
    if n and int(labels.max()) >= N_CLASSES:
        raise FormatError(f"{labels_path}: label value {int(labels.max())} >= {N_CLASSES}")
    images = (pixels / 255.0).astype(np.float32)
    return Dataset(images, labels, name or images_path.parent.name)


def data_dir(override=None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(DATA_DIR_ENV)
    if not env:
        raise FileNotFoundError(f"no data directory: pass --data-dir or set {DATA_DIR_ENV}")
    return Path(env)


def load_corpus(name: str, root=None) -> Corpus:
    """Load ``<root>/<name>/{train,t10k}-{images-idx3,labels-idx1}-ubyte``."""
    base = data_dir(root) / name
    train = load_idx(base / "train-images-idx3-ubyte", base / "train-labels-idx1-ubyte", name)
    test = load_idx(base / "t10k-images-idx3-ubyte", base / "t10k-labels-idx1-ubyte", name + "-test")
    return Corpus(train, test)


def save_cache(ds: Dataset, path) -> None:
    """Little-endian cache: magic, u32 version, u32 n, u32 d, u32 len(name), name,
    float32[n*d] images, uint8[n] labels."""
    name = ds.name.encode()
    n, d = ds.images.shape
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC + struct.pack("<IIII", CACHE_VERSION, n, d, len(name)) + name)
        fh.write(np.ascontiguousarray(ds.images, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(ds.labels, dtype=np.uint8).tobytes())


def load_cache(path) -> Dataset:
    buf = Path(path).read_bytes()
    if buf[:4] != CACHE_MAGIC:
        raise FormatError(f"{path}: not a dataset cache")
    version, n, d, ln = struct.unpack("<IIII", buf[4:20])
    if version != CACHE_VERSION:
        raise FormatError(f"{path}: cache version {version}, expected {CACHE_VERSION}")
    off = 20 + ln
    name = buf[20:off].decode()
    if len(buf) != off + 4 * n * d + n:
        raise FormatError(f"{path}: payload size mismatch")
    images = np.frombuffer(buf, dtype="<f4", count=n * d, offset=off).reshape(n, d).astype(np.float32)
    labels = np.frombuffer(buf, dtype=np.uint8, count=n, offset=off + 4 * n * d).copy()
    return Dataset(images, labels, name)


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    probe_indices: np.ndarray
    test_indices: np.ndarray
    seed: int

    def __eq__(self, other):
        return (isinstance(other, Split) and self.seed == other.seed
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("train_indices", "probe_indices", "test_indices")))


def make_split(dataset: Dataset, n_train: int, n_probe: int, seed: int, n_test: int | None = None) -> Split:
    """Draw train then probe points without replacement from a seeded shuffle of ``dataset``.

    ``n_test`` is the size of the separate official test set (its indices are
    ``0..n_test-1``); with ``n_test=None`` the leftover pool serves as test set.
    """
    n = len(dataset)
    if n_train < 0 or n_probe < 0 or n_train + n_probe > n:
        raise ValueError(f"cannot draw {n_train} train + {n_probe} probe points from {n}")
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(dataset.name.encode()), n_train, n_probe])
    perm = np.random.Generator(np.random.PCG64(ss)).permutation(n)
    train = np.sort(perm[:n_train])
    probe = perm[n_train:n_train + n_probe]
    test = np.arange(n_test) if n_test is not None else np.sort(perm[n_train + n_probe:])
    return Split(train, probe, test, seed)


def synthetic_gaussian(n: int, d: int, k_classes: int, seed: int, sigma: float = 0.05,
                       centres: np.ndarray | None = None) -> Dataset:
    """Isotropic Gaussian blobs clipped to the unit cube; label = blob index (round robin)."""
    if n <= 0 or d <= 0 or k_classes <= 0:
        raise ValueError("n, d and k_classes must be positive")
    if k_classes > N_CLASSES:
        raise ValueError("at most 10 classes")
    rng = np.random.Generator(np.random.PCG64(seed))
    if centres is None:
        centres = rng.uniform(0.25, 0.75, size=(k_classes, d))
    centres = np.asarray(centres, dtype=np.float64)
    labels = np.arange(n) % k_classes
    x = centres[labels] + sigma * rng.standard_normal((n, d))
    x = np.clip(x, 0.0, 1.0).astype(np.float32)
    return Dataset(x, labels.astype(np.uint8), f"synthetic-{n}x{d}-k{k_classes}-s{seed}")
