#!/usr/bin/env python3
"""Build a small MNIST set in IDX format from the 5000-digit sample bundled
with the `mlxtend` wheel on PyPI.

Writes <out>/{train,t10k}-{images-idx3,labels-idx1}-ubyte: per class the first
400 samples go to train and the remaining 100 to t10k (4000 / 1000).
The decompressed CSV and every output file are checked against pinned SHA-256
digests, and the output digests are written to <out>/SHA256SUMS.

Usage: scripts/fetch_mnist_subset.py [--out DIR] [--wheel PATH]
Default out is $PCN_DATA_DIR/mnist5k, or data/mnist5k.
"""

import argparse
import gzip
import hashlib
import os
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
WHEEL = "mlxtend==0.24.0"
TRAIN_PER_CLASS = 400
SOURCE_SHA256 = "167bbe5fc3dfbce27f9a4c6c1814964f3367677ee226d9811d79cbd41fd5d053"
OUTPUT_SHA256 = {
    "train-images-idx3-ubyte": "41fcc99dc5febfff05b2c695115ab87b2d6d5c59525649686ccb7df54d37dfc9",
    "train-labels-idx1-ubyte": "39f32862f8445a37ac2198a108eaa89409b65842e17099cff0decb9947ef45e5",
    "t10k-images-idx3-ubyte": "4a5ef69b65214035545545254c99a295238f3422c1cd2572bf752453cf9e978e",
    "t10k-labels-idx1-ubyte": "269ecbc6b9d1255bfaf6a62a1eba208034491ca4df872ab8c3531975085962c3",
}


def fetch_wheel(tmp: Path) -> Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
         "-d", str(tmp), WHEEL],
        check=True,
    )
    return next(tmp.glob("mlxtend-*.whl"))


def write_idx(path: Path, dims: list[int], payload: bytes) -> None:
    header = struct.pack(">HBB", 0, 0x08, len(dims)) + b"".join(struct.pack(">I", d) for d in dims)
    path.write_bytes(header + payload)


def main() -> int:
    default_out = Path(os.environ.get("PCN_DATA_DIR", "data")) / "mnist5k"
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=default_out)
    ap.add_argument("--wheel", type=Path, help="use an already downloaded mlxtend wheel")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(Path(tmp))
        with zipfile.ZipFile(wheel) as z:
            raw = gzip.decompress(z.read(MEMBER))
    digest = hashlib.sha256(raw).hexdigest()
    if digest != SOURCE_SHA256:
        print(f"error: {MEMBER} has sha256 {digest}, expected {SOURCE_SHA256}", file=sys.stderr)
        return 1
    rows = raw.decode().splitlines()

    by_class: dict[int, list[bytes]] = {}
    for line in rows:
        fields = [int(v) for v in line.split(",")]
        pixels, label = fields[:784], fields[784]
        by_class.setdefault(label, []).append(bytes(pixels))

    splits = {"train": ([], []), "t10k": ([], [])}
    for label in sorted(by_class):
        for i, img in enumerate(by_class[label]):
            images, labels = splits["train" if i < TRAIN_PER_CLASS else "t10k"]
            images.append(img)
            labels.append(label)

    args.out.mkdir(parents=True, exist_ok=True)
    for name, (images, labels) in splits.items():
        write_idx(args.out / f"{name}-images-idx3-ubyte", [len(images), 28, 28], b"".join(images))
        write_idx(args.out / f"{name}-labels-idx1-ubyte", [len(labels)], bytes(labels))
        print(f"{name}: {len(labels)} samples -> {args.out}")

    sums = []
    for name, expected in OUTPUT_SHA256.items():
        digest = hashlib.sha256((args.out / name).read_bytes()).hexdigest()
        if digest != expected:
            print(f"error: {name} has sha256 {digest}, expected {expected}", file=sys.stderr)
            return 1
        sums.append(f"{digest}  {name}\n")
    (args.out / "SHA256SUMS").write_text("".join(sums))
    return 0


if __name__ == "__main__":
    sys.exit(main())
