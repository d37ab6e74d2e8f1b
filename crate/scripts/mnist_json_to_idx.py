#!/usr/bin/env python3
"""Convert the per-digit JSON files of the `mnist` npm package into IDX files.

Usage: mnist_json_to_idx.py <package/src/digits> <out_dir>

The npm package ships 10,000 MNIST digits as 784-float rows (3 decimals),
grouped by class. Rows are written in class order; the loaders subsample
with a seed anyway.
"""
import json
import os
import struct
import sys


def main(src, out):
    images = bytearray()
    labels = bytearray()
    count = 0
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as fh:
            data = json.load(fh)["data"]
        assert len(data) % 784 == 0
        for v in data:
            images.append(max(0, min(255, round(v * 255))))
        n = len(data) // 784
        labels.extend([digit] * n)
        count += n
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "images-idx3-ubyte"), "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        fh.write(images)
    with open(os.path.join(out, "labels-idx1-ubyte"), "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, count))
        fh.write(labels)
    print(f"wrote {count} digits to {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
