#!/usr/bin/env python3
"""Convert the 5000-image MNIST subset shipped inside the mlxtend wheel to IDX.

Usage: mnist5k_to_idx.py path/to/mlxtend-*.whl OUT_DIR

Rows are sorted by label in the source, so every fifth image goes to the test
split (1000 images, 100 per class) and the rest to the training split.
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + bytes(payload))


def main():
    wheel, out = sys.argv[1], Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = gzip.decompress(raw).decode().splitlines()
    splits = {"train": ([], []), "t10k": ([], [])}
    for i, line in enumerate(rows):
        vals = [int(float(v)) for v in line.split(",")]
        name = "t10k" if i % 5 == 4 else "train"
        splits[name][0].extend(vals[:-1])
        splits[name][1].append(vals[-1])
    for name, (pixels, labels) in splits.items():
        n = len(labels)
        write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x803, (n, 28, 28), pixels)
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x801, (n,), labels)
        print(f"{name}: {n} images")


if __name__ == "__main__":
    main()
