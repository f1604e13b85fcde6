#!/usr/bin/env python3
"""Regenerates the bundled test fixtures under tests/data/.

  * mnist5k-{train,test}-{images,labels}-idx?-ubyte.gz
      Real MNIST digits taken from the 5 000-sample subset shipped inside the
      mlxtend wheel (500 per class). The first 400 of each class go to the
      training file and the last 100 to the test file, classes interleaved in
      the original per-class order.
  * computer_standin.csv
      Personal-computer shaped table: 189 raters x 20 computers, 13 binary
      features, 0-10 ratings. The last 4 computers of each rater are marked as
      the test split.
  * school_standin.csv
      School shaped table: 40 schools with uneven sizes, 8 features.

Usage: make_fixtures.py <mlxtend wheel> <output dir>
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, labels.size))
        f.write(labels.astype(np.uint8).tobytes())


def mnist_fixture(wheel, out):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    data = np.loadtxt(io.BytesIO(raw), delimiter=",").astype(np.uint8)
    pixels, labels = data[:, :784], data[:, 784]
    train_idx, test_idx = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        train_idx.append(idx[:400])
        test_idx.append(idx[400:])
    # Interleave classes so file order is not class-sorted.
    train = np.stack(train_idx, axis=1).reshape(-1)
    test = np.stack(test_idx, axis=1).reshape(-1)
    for name, idx in (("train", train), ("test", test)):
        write_idx_images(out / f"mnist5k-{name}-images-idx3-ubyte.gz",
                         pixels[idx].reshape(-1, 28, 28))
        write_idx_labels(out / f"mnist5k-{name}-labels-idx1-ubyte.gz", labels[idx])


def computer_standin(out):
    rng = np.random.default_rng(20120101)
    n_subjects, n_items, n_features = 189, 20, 13
    items = rng.integers(0, 2, size=(n_items, n_features)).astype(float)
    shared = rng.normal(0.0, 1.0, n_features)
    lines = ["subject,item," + ",".join(f"f{j}" for j in range(n_features)) + ",rating,is_test"]
    for s in range(n_subjects):
        w = shared + rng.normal(0.0, 0.6, n_features)
        scores = items @ w
        scores = 5.0 + 1.5 * (scores - scores.mean()) / (scores.std() + 1e-9)
        ratings = np.clip(np.rint(scores + rng.normal(0.0, 0.8, n_items)), 0, 10)
        for i in range(n_items):
            feats = ",".join(str(int(v)) for v in items[i])
            lines.append(f"{s + 1},{i + 1},{feats},{int(ratings[i])},{int(i >= 16)}")
    (out / "computer_standin.csv").write_text("\n".join(lines) + "\n")


def school_standin(out):
    rng = np.random.default_rng(19910101)
    n_schools, n_features = 40, 8
    shared = rng.normal(0.0, 1.0, n_features)
    lines = ["school," + ",".join(f"x{j}" for j in range(n_features)) + ",score"]
    for s in range(n_schools):
        size = int(rng.integers(12, 60))
        w = shared + rng.normal(0.0, 0.5 if s % 7 else 2.0, n_features)
        X = rng.normal(0.0, 1.0, (size, n_features))
        y = X @ w + rng.normal(0.0, 1.0, size)
        for i in range(size):
            feats = ",".join(f"{v:.6f}" for v in X[i])
            lines.append(f"{1000 + s},{feats},{y[i]:.6f}")
    (out / "school_standin.csv").write_text("\n".join(lines) + "\n")


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    out = Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    mnist_fixture(sys.argv[1], out)
    computer_standin(out)
    school_standin(out)


if __name__ == "__main__":
    main()
