#!/usr/bin/env python3
"""Download MNIST (IDX) and CIFAR-10 (binary batches) into a data directory.

Usage: python scripts/fetch_data.py [--data-dir data] [--only mnist|cifar10]

Files are verified structurally after download (magic numbers, record counts)
rather than by pinned checksums, so mirror rotation does not break the script.
"""

import argparse
import gzip
import shutil
import sys
import tarfile
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pixeldisc.ingest import load_cifar10, load_idx  # noqa: E402

MNIST_MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
]
MNIST_FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]
CIFAR_URL = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"


def download(url: str, dest: Path) -> bool:
    try:
        print(f"  {url}")
        with urllib.request.urlopen(url, timeout=60) as r, open(dest, "wb") as f:
            shutil.copyfileobj(r, f)
        return True
    except Exception as e:
        print(f"  failed: {e}")
        return False


def fetch_mnist(data_dir: Path) -> None:
    for name in MNIST_FILES:
        plain = data_dir / name[:-3]
        if plain.exists():
            print(f"already present: {plain}")
            continue
        gz = data_dir / name
        if not any(download(m + name, gz) for m in MNIST_MIRRORS):
            raise SystemExit(f"could not download {name} from any mirror")
        with gzip.open(gz, "rb") as src, open(plain, "wb") as dst:
            shutil.copyfileobj(src, dst)
        gz.unlink()
    train = load_idx(data_dir / "train-images-idx3-ubyte",
                     data_dir / "train-labels-idx1-ubyte")
    test = load_idx(data_dir / "t10k-images-idx3-ubyte",
                    data_dir / "t10k-labels-idx1-ubyte")
    assert len(train) == 60000 and len(test) == 10000
    print(f"MNIST ok: {len(train)} train / {len(test)} test images")


def fetch_cifar(data_dir: Path) -> None:
    target = data_dir / "cifar-10-batches-bin"
    if target.exists():
        print(f"already present: {target}")
    else:
        tar_path = data_dir / "cifar-10-binary.tar.gz"
        if not download(CIFAR_URL, tar_path):
            raise SystemExit("could not download CIFAR-10")
        with tarfile.open(tar_path) as tf:
            tf.extractall(data_dir)
        tar_path.unlink()
    train = load_cifar10([target / f"data_batch_{i}.bin" for i in range(1, 6)])
    test = load_cifar10([target / "test_batch.bin"])
    assert len(train) == 50000 and len(test) == 10000
    print(f"CIFAR-10 ok: {len(train)} train / {len(test)} test images")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data-dir", default="data")
    ap.add_argument("--only", choices=["mnist", "cifar10"], default=None)
    args = ap.parse_args()
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    if args.only in (None, "mnist"):
        fetch_mnist(data_dir)
    if args.only in (None, "cifar10"):
        fetch_cifar(data_dir)


if __name__ == "__main__":
    main()
