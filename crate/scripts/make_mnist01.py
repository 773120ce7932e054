#!/usr/bin/env python3
"""Write a balanced MNIST 0-vs-1 subset as IDX files.

Sources (pick one):
  --csv  mnist_5k.csv.gz   784 pixel columns followed by the label (mlxtend's bundled sample)
  --idx  DIR               official train-images-idx3-ubyte / train-labels-idx1-ubyte

The first images of each class in file order go to train, the next ones to t10k.
"""

import argparse
import gzip
import struct
from pathlib import Path

import numpy as np


def load_csv(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt") as f:
        data = np.loadtxt(f, delimiter=",", dtype=np.int64)
    return data[:, :784].astype(np.uint8), data[:, 784].astype(np.uint8)


def load_idx(directory):
    d = Path(directory)
    raw = (d / "train-images-idx3-ubyte").read_bytes()
    n, rows, cols = struct.unpack(">III", raw[4:16])
    images = np.frombuffer(raw[16:], dtype=np.uint8).reshape(n, rows * cols)
    labels = np.frombuffer((d / "train-labels-idx1-ubyte").read_bytes()[8:], dtype=np.uint8)
    return images, labels


def write_idx(out, prefix, images, labels):
    with open(out / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())
    with open(out / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv")
    src.add_argument("--idx")
    ap.add_argument("--out", default="data/mnist01")
    ap.add_argument("--train-per-class", type=int, default=250)
    ap.add_argument("--test-per-class", type=int, default=50)
    args = ap.parse_args()

    images, labels = load_csv(args.csv) if args.csv else load_idx(args.idx)
    train, test = [], []
    for digit in (0, 1):
        idx = np.flatnonzero(labels == digit)
        need = args.train_per_class + args.test_per_class
        if len(idx) < need:
            raise SystemExit(f"digit {digit}: {len(idx)} images, need {need}")
        train.extend(idx[: args.train_per_class])
        test.extend(idx[args.train_per_class : need])
    # Interleave classes in file order.
    train.sort()
    test.sort()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out, "train", images[train], labels[train])
    write_idx(out, "t10k", images[test], labels[test])
    print(f"wrote {len(train)} train and {len(test)} test images to {out}")


if __name__ == "__main__":
    main()
