#!/usr/bin/env python3
"""Fit a nearest-prototype classifier on (optionally discretized) training
images and write it as a model.json usable by `pixeldisc certify`.

Usage:
  python scripts/fit_prototype.py --format idx --data-dir data --split train \
      --codes codes.json --out model.json
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pixeldisc.classifier import prototype_fit, save_model  # noqa: E402
from pixeldisc.cli import load_dataset  # noqa: E402
from pixeldisc.core import load_codebook  # noqa: E402
from pixeldisc.discretize import Discretizer  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--format", choices=["idx", "cifar10"], required=True)
    ap.add_argument("--data-dir", default="data")
    ap.add_argument("--split", choices=["train", "test"], default="train")
    ap.add_argument("--codes", default=None,
                    help="codebook JSON; prototypes are fit on discretized "
                         "images when given")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    ds = load_dataset(args.format, Path(args.data_dir), args.split)
    disc = Discretizer.from_codebook(load_codebook(args.codes)) if args.codes else None
    clf = prototype_fit(ds, disc)
    save_model(clf, args.out)
    acc = (clf.predict_batch(disc.apply_images(ds.images) if disc else ds.images)
           == ds.labels).mean()
    print(f"fit {clf.num_classes} prototypes; train accuracy {acc:.4f} -> {args.out}")


if __name__ == "__main__":
    main()
