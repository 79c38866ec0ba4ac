#!/usr/bin/env python3
"""Convert the JSON digit files from the npm `mnist` package into IDX files.

The npm package (https://www.npmjs.com/package/mnist, MIT) bundles ~10,000
real MNIST samples (~1,000 per digit) as flat [0, 1] float arrays. This script
recovers the original pixel bytes and writes the canonical IDX file pairs,
splitting each class 80/20 into train/test in file order.

Usage: prepare_mnist_data.py <digits_dir> <output_dir>
  digits_dir: directory containing 0.json .. 9.json
  output_dir: receives train-images-idx3-ubyte, train-labels-idx1-ubyte,
              t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte
"""

import json
import os
import struct
import sys

ROWS = COLS = 28
PIXELS = ROWS * COLS


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), ROWS, COLS))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    digits_dir, out_dir = sys.argv[1], sys.argv[2]
    os.makedirs(out_dir, exist_ok=True)

    train_images, train_labels = [], []
    test_images, test_labels = [], []
    for digit in range(10):
        with open(os.path.join(digits_dir, f"{digit}.json")) as f:
            flat = json.load(f)["data"]
        assert len(flat) % PIXELS == 0, f"digit {digit}: ragged data"
        count = len(flat) // PIXELS
        samples = []
        for i in range(count):
            pixels = [min(255, max(0, round(v * 255))) for v in flat[i * PIXELS:(i + 1) * PIXELS]]
            samples.append(pixels)
        split = (count * 8) // 10
        train_images.extend(samples[:split])
        train_labels.extend([digit] * split)
        test_images.extend(samples[split:])
        test_labels.extend([digit] * (count - split))
        print(f"digit {digit}: {split} train, {count - split} test")

    write_idx_images(os.path.join(out_dir, "train-images-idx3-ubyte"), train_images)
    write_idx_labels(os.path.join(out_dir, "train-labels-idx1-ubyte"), train_labels)
    write_idx_images(os.path.join(out_dir, "t10k-images-idx3-ubyte"), test_images)
    write_idx_labels(os.path.join(out_dir, "t10k-labels-idx1-ubyte"), test_labels)
    print(f"total: {len(train_labels)} train, {len(test_labels)} test -> {out_dir}")


if __name__ == "__main__":
    main()
