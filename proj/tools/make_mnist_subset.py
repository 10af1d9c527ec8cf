#!/usr/bin/env python3
"""Build the MNIST subset used by the bias study as IDX files.

Source: the 10,000 digits bundled in the npm package `mnist` (1.1.0), whose
src/digits/<d>.json files hold {"data": [...]} with 784 floats per image
(pixel / 255, rounded to 3 decimals). Fetch it with `npm pack mnist@1.1.0`.

    python tools/make_mnist_subset.py mnist-1.1.0.tgz data/mnist

Writes train-images.idx3 / train-labels.idx1 (8000 rows) and
test-images.idx3 / test-labels.idx1 (2000 rows). Pixels are restored to
uint8; the split is a fixed-seed shuffle so the output is reproducible.
"""

import argparse
import json
import random
import struct
import tarfile
from pathlib import Path

PIXELS = 28 * 28


def load_digits(tgz: Path):
    images, labels = [], []
    with tarfile.open(tgz) as tar:
        for d in range(10):
            member = tar.extractfile(f"package/src/digits/{d}.json")
            data = json.load(member)["data"]
            if len(data) % PIXELS:
                raise ValueError(f"digit {d}: length {len(data)} is not a multiple of {PIXELS}")
            for i in range(len(data) // PIXELS):
                row = data[i * PIXELS:(i + 1) * PIXELS]
                images.append(bytes(min(255, max(0, round(v * 255))) for v in row))
                labels.append(d)
    return images, labels


def write_images(path: Path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(img)


def write_labels(path: Path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("tgz", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    images, labels = load_digits(args.tgz)
    order = list(range(len(images)))
    random.Random(args.seed).shuffle(order)
    test_idx, train_idx = order[:args.test], order[args.test:]

    args.out.mkdir(parents=True, exist_ok=True)
    write_images(args.out / "train-images.idx3", [images[i] for i in train_idx])
    write_labels(args.out / "train-labels.idx1", [labels[i] for i in train_idx])
    write_images(args.out / "test-images.idx3", [images[i] for i in test_idx])
    write_labels(args.out / "test-labels.idx1", [labels[i] for i in test_idx])
    print(f"train {len(train_idx)}, test {len(test_idx)} -> {args.out}")


if __name__ == "__main__":
    main()
