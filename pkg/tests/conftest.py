import os
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

REAL_DATA = Path(os.environ.get("WEAKNESSLAB_DATA_DIR", "/root/data"))


def write_idx(folder: Path, prefix: str, images: np.ndarray, labels: np.ndarray) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    n = images.shape[0]
    (folder / f"{prefix}-images-idx3-ubyte").write_bytes(
        struct.pack(">IIII", 0x803, n, 28, 28) + images.astype(np.uint8).tobytes())
    (folder / f"{prefix}-labels-idx1-ubyte").write_bytes(
        struct.pack(">II", 0x801, n) + labels.astype(np.uint8).tobytes())


def blob_images(n, seed):
    """Ten well separated class prototypes plus pixel noise, as uint8 images."""
    rng = np.random.Generator(np.random.PCG64(seed))
    protos = np.random.Generator(np.random.PCG64(12345)).integers(0, 256, size=(10, 784))
    labels = np.arange(n) % 10
    img = protos[labels] + rng.integers(-200, 201, size=(n, 784))
    return np.clip(img, 0, 255), labels


@pytest.fixture(scope="session")
def tiny_root(tmp_path_factory):
    """A fake data root holding a small ``mnist`` corpus in IDX format."""
    root = tmp_path_factory.mktemp("data")
    x, y = blob_images(600, 1)
    write_idx(root / "mnist", "train", x, y)
    x, y = blob_images(200, 2)
    write_idx(root / "mnist", "t10k", x, y)
    return root


@pytest.fixture(scope="session")
def real_data():
    if not (REAL_DATA / "mnist" / "train-images-idx3-ubyte").exists():
        pytest.skip("real MNIST files not available")
    return REAL_DATA


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
