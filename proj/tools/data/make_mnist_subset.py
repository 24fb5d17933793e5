#!/usr/bin/env python3
"""Build a small MNIST subset in gzip'd IDX format.

Source: the digit JSON files shipped with the npm package `mnist`
(10000 MNIST test digits stored as pixel/255 floats, grouped by class).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/data/make_mnist_subset.py package/src/digits data/mnist-subset
"""
import argparse
import gzip
import json
import pathlib
import random
import struct

SIDE = 28


def load_digits(src):
    images = []
    for label in range(10):
        raw = json.loads((src / f"{label}.json").read_text())["data"]
        count = len(raw) // (SIDE * SIDE)
        for i in range(count):
            px = raw[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
            images.append((label, bytes(min(255, max(0, round(v * 255))) for v in px)))
    return images


def write_idx_images(path, images):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        for _, px in images:
            f.write(px)


def write_idx_labels(path, images):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(images)))
        f.write(bytes(label for label, _ in images))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--train", type=int, default=5000)
    ap.add_argument("--validation", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=20180601)
    args = ap.parse_args()

    images = load_digits(args.digits_dir)
    random.Random(args.seed).shuffle(images)
    if len(images) < args.train + args.validation:
        raise SystemExit(f"only {len(images)} images available")
    train = images[:args.train]
    val = images[args.train:args.train + args.validation]

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx_images(args.out_dir / "train-images-idx3-ubyte.gz", train)
    write_idx_labels(args.out_dir / "train-labels-idx1-ubyte.gz", train)
    write_idx_images(args.out_dir / "validation-images-idx3-ubyte.gz", val)
    write_idx_labels(args.out_dir / "validation-labels-idx1-ubyte.gz", val)
    print(f"wrote {len(train)} train / {len(val)} validation images to {args.out_dir}")


if __name__ == "__main__":
    main()
