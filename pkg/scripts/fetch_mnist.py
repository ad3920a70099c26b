#!/usr/bin/env python3
"""Download MNIST and FashionMNIST IDX files for the image-scale tests.

Writes the eight decompressed files under data/mnist/ and data/fashion/
(override the root with BN_DATA_DIR). Needs outbound HTTPS; in offline
environments the acceptance tests fall back to synthetic surrogates.
"""

from __future__ import annotations

import gzip
import os
import sys
import urllib.request

FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)

SOURCES = {
    "mnist": (
        "https://storage.googleapis.com/cvdf-datasets/mnist/",
        "https://ossci-datasets.s3.amazonaws.com/mnist/",
    ),
    "fashion": (
        "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
    ),
}


def fetch(url: str, dest: str) -> bool:
    try:
        with urllib.request.urlopen(url, timeout=30) as response:
            payload = response.read()
    except OSError as exc:
        print(f"  {url}: {exc}")
        return False
    with open(dest, "wb") as fh:
        fh.write(gzip.decompress(payload))
    return True


def main() -> int:
    root = os.environ.get("BN_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "data"))
    failures = 0
    for dataset, mirrors in SOURCES.items():
        out_dir = os.path.join(root, dataset)
        os.makedirs(out_dir, exist_ok=True)
        for name in FILES:
            dest = os.path.join(out_dir, name)
            if os.path.exists(dest):
                print(f"{dest}: already present")
                continue
            ok = any(fetch(mirror + name + ".gz", dest) for mirror in mirrors)
            if not ok:
                print(f"{dest}: all mirrors failed")
                failures += 1
    if failures:
        print(f"\n{failures} files could not be fetched; the acceptance tests "
              "will use synthetic surrogates instead.")
        return 1
    print("\nAll files present.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
