#!/usr/bin/env python3
"""Convert the 5000-sample MNIST training subset shipped with mlxtend into
gzip-compressed IDX files (the layout of the official MNIST distribution).

    pip download --no-deps mlxtend -d /tmp/mlx
    python3 scripts/mnist_5k_to_idx.py /tmp/mlx/mlxtend-*.whl data/mnist-5k
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main(wheel: str, out_dir: str) -> None:
    raw = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER)).decode()
    rows = [line.split(",") for line in raw.strip().split("\n")]
    pixels = bytearray()
    labels = bytearray()
    for row in rows:
        values = [int(float(v)) for v in row]
        assert len(values) == 785 and all(0 <= v <= 255 for v in values)
        pixels.extend(values[:-1])
        labels.append(values[-1])
    n = len(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = struct.pack(">IIII", 0x803, n, 28, 28) + bytes(pixels)
    label_bytes = struct.pack(">II", 0x801, n) + bytes(labels)
    # mtime=0 keeps the archives byte-reproducible
    (out / "train-images-idx3-ubyte.gz").write_bytes(gzip.compress(images, mtime=0))
    (out / "train-labels-idx1-ubyte.gz").write_bytes(gzip.compress(label_bytes, mtime=0))
    print(f"wrote {n} samples to {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
