#!/usr/bin/env python3
"""Write the 5000-digit MNIST subset bundled with mlxtend as IDX files.

Usage: make_mnist_subset.py <mlxtend wheel or mnist_5k.csv.gz> <out dir>

Produces mnist5k-images-idx3-ubyte.gz and mnist5k-labels-idx1-ubyte.gz
in the standard IDX byte layout (big-endian header, uint8 payload).
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def read_rows(src: Path):
    if src.suffix == ".whl":
        with zipfile.ZipFile(src) as whl:
            raw = whl.read("mlxtend/data/data/mnist_5k.csv.gz")
    else:
        raw = src.read_bytes()
    text = gzip.decompress(raw).decode()
    return [[int(v) for v in line.split(",")] for line in text.strip().split("\n")]


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 1
    rows = read_rows(Path(sys.argv[1]))
    out = Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    n = len(rows)
    images = bytearray(struct.pack(">IIII", 0x00000803, n, 28, 28))
    labels = bytearray(struct.pack(">II", 0x00000801, n))
    for row in rows:
        images.extend(bytes(row[:-1]))
        labels.append(row[-1])
    # mtime=0 keeps the archives byte-reproducible
    with gzip.GzipFile(out / "mnist5k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(images)
    with gzip.GzipFile(out / "mnist5k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(labels)
    print(f"wrote {n} digits to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
