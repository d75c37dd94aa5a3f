"""Convert the MNIST / Fashion-MNIST copies shipped in npm packages to IDX files.

The ``mnist-data`` npm package ships the four original IDX files verbatim; they
are copied. The ``fashion-mnist`` npm package ships one JSON file per class with
raw 0-255 pixel rows, 1000 test images followed by 6000 train images (class 0
carries two empty separator rows, which are dropped). Both are written as
standard uncompressed IDX files.

    npm pack mnist-data fashion-mnist
    tar xzf mnist-data-*.tgz -C mnist && tar xzf fashion-mnist-*.tgz -C fashion
    python tools/npm_to_idx.py --mnist mnist/package --fashion fashion/package --out $WEAKNESSLAB_DATA_DIR
"""
import argparse
import json
import shutil
import struct
from pathlib import Path

import numpy as np

N_TEST_PER_CLASS = 1000


def write_idx(images, labels, images_path, labels_path):
    n = images.shape[0]
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        fh.write(images.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(labels.astype(np.uint8).tobytes())


def convert_fashion(src, out):
    train_x, train_y, test_x, test_y = [], [], [], []
    for c in range(10):
        rows = json.loads((src / "src" / "clothes" / f"{c}.json").read_text())["data"]
        rows = np.array([r for r in rows if len(r) == 784], dtype=np.uint8)
        test_x.append(rows[:N_TEST_PER_CLASS])
        train_x.append(rows[N_TEST_PER_CLASS:])
        test_y.append(np.full(N_TEST_PER_CLASS, c, dtype=np.uint8))
        train_y.append(np.full(len(rows) - N_TEST_PER_CLASS, c, dtype=np.uint8))
    out.mkdir(parents=True, exist_ok=True)
    write_idx(np.concatenate(train_x), np.concatenate(train_y),
              out / "train-images-idx3-ubyte", out / "train-labels-idx1-ubyte")
    write_idx(np.concatenate(test_x), np.concatenate(test_y),
              out / "t10k-images-idx3-ubyte", out / "t10k-labels-idx1-ubyte")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mnist", type=Path, help="unpacked mnist-data npm package dir")
    ap.add_argument("--fashion", type=Path, help="unpacked fashion-mnist npm package dir")
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()
    if args.mnist:
        dst = args.out / "mnist"
        dst.mkdir(parents=True, exist_ok=True)
        for f in sorted((args.mnist / "data").glob("*-ubyte")):
            shutil.copyfile(f, dst / f.name)
    if args.fashion:
        convert_fashion(args.fashion, args.out / "fashion")


if __name__ == "__main__":
    main()
