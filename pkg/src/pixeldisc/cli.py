"""Command-line entry point: ingest, codebook, discretize, hardness, certify
and idealmodel subcommands with reproducible manifests and atomic outputs.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
import time
from pathlib import Path

from . import __version__
from .certify import CertifyConfig, global_certificate
from .classifier import load_model, model_digest
from .codebook import (
    DensityConfig,
    KMedoidsConfig,
    binning_codes,
    density_codes,
    kmedoids_codes,
)
from .core import (
    ConfigError,
    Metric,
    ParseError,
    PixeldiscError,
    atomic_write_json,
    atomic_write_text,
    load_codebook,
)
from .discretize import Discretizer, discretize_dataset
from .hardness import fragmentation_report, neighborhood_map, value_histogram_rows
from .ideal import IdealModelParams, random_codewords, validate_recovery
from .ingest import (
    build_histogram,
    dataset_digest,
    load_cifar10,
    load_idx,
    save_cifar10,
    save_idx,
)

DATA_DIR_ENV = "PIXELDISC_DATA_DIR"

# certificate-table preset: per-budget enumeration caps used alongside the
# standard MNIST attack budgets on the [0, 1] scale
MNIST_TABLE_EPS = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30]
MNIST_TABLE_BITS = [0, 30, 30, 26, 25, 25, 25]

CODEBOOK_PRESETS = {
    "mnist-density": {"algo": "density", "k": 2, "r": 0.6 * 255},
    "cifar10-density": {"algo": "density", "k": 300, "r": 16.0},
}

HARDNESS_PRESETS = {
    # default diagnostic budgets mirror the standard attack budgets for the
    # two corpora; recorded as an assumption in the report metadata
    "mnist": {"eps": 0.3, "eps_scale": "unit"},
    "cifar10": {"eps": 8.0, "eps_scale": "byte"},
}


def _resolve_data_dir(args) -> Path:
    if args.data_dir:
        return Path(args.data_dir)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path("data")


def _find_file(candidates, what: str) -> Path:
    for c in candidates:
        if c.exists():
            return c
    raise ParseError(f"could not find {what}; tried: " + ", ".join(str(c) for c in candidates))


def load_dataset(fmt: str, data_dir: Path, split: str):
    if fmt == "idx":
        prefix = {"train": "train", "test": "t10k"}[split]
        images = _find_file(
            [data_dir / f"{prefix}-images-idx3-ubyte",
             data_dir / f"{prefix}-images.idx3-ubyte",
             data_dir / f"{prefix}-images-idx3-ubyte.gz"],
            f"IDX images for split {split!r} in {data_dir}")
        labels = _find_file(
            [data_dir / f"{prefix}-labels-idx1-ubyte",
             data_dir / f"{prefix}-labels.idx1-ubyte",
             data_dir / f"{prefix}-labels-idx1-ubyte.gz"],
            f"IDX labels for split {split!r} in {data_dir}")
        return load_idx(images, labels)
    base = data_dir / "cifar-10-batches-bin"
    if not base.exists():
        base = data_dir
    if split == "train":
        paths = sorted(base.glob("data_batch_*.bin"))
        if not paths:
            raise ParseError(f"no CIFAR-10 training batches (data_batch_*.bin) in {base}")
    else:
        paths = [base / "test_batch.bin"]
        if not paths[0].exists():
            raise ParseError(f"missing CIFAR-10 batch {paths[0]}")
    return load_cifar10(paths)


def _eps_bytes(args) -> float:
    if args.eps is None:
        raise ConfigError("--eps is required")
    if args.eps_scale is None:
        raise ConfigError("--eps needs an explicit --eps-scale unit|byte")
    return args.eps * 255.0 if args.eps_scale == "unit" else args.eps


def _manifest(args, subcommand: str, started: float, **extra) -> dict:
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func",) and not k.startswith("_")}
    return {
        "subcommand": subcommand,
        "config": config,
        "version": __version__,
        "duration_s": round(time.time() - started, 3),
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        **extra,
    }


def _add_dataset_flags(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=["idx", "cifar10"], required=True,
                   help="dataset binary format")
    p.add_argument("--data-dir", default=None,
                   help=f"dataset directory (default: ${DATA_DIR_ENV} or ./data)")
    p.add_argument("--split", choices=["train", "test"], default="train")


def _add_eps_flags(p: argparse.ArgumentParser, required: bool = False):
    p.add_argument("--eps", type=float, default=None, required=required,
                   help="per-pixel l-infinity budget")
    p.add_argument("--eps-scale", choices=["unit", "byte"], default=None,
                   help="whether --eps is on the [0,1] or the 0-255 scale")


def cmd_ingest(args) -> int:
    started = time.time()
    ds = load_dataset(args.format, _resolve_data_dir(args), args.split)
    digest = dataset_digest(ds)
    line = (f"format={args.format} split={args.split} images={len(ds)} "
            f"pixels={ds.num_pixels} channels={ds.channels} sha256={digest}")
    print(line)
    if args.out:
        payload = {
            "digest": digest,
            "images": len(ds),
            "pixels": ds.num_pixels,
            "channels": ds.channels,
            "classes": ds.num_classes,
            "manifest": _manifest(args, "ingest", started, dataset_digest=digest),
        }
        atomic_write_json(args.out, payload)
    return 0


def cmd_codebook(args) -> int:
    started = time.time()
    if args.preset:
        for key, value in CODEBOOK_PRESETS[args.preset].items():
            setattr(args, key, value)
    if args.algo is None:
        raise ConfigError("--algo is required (or use --preset)")
    if args.algo == "binning":
        if args.k is None:
            raise ConfigError("--k is required for binning")
        cb = binning_codes(args.k)
        ds_digest = None
    else:
        ds = load_dataset(args.format, _resolve_data_dir(args), args.split)
        ds_digest = dataset_digest(ds)
        hist = build_histogram(ds)
        if args.algo == "density":
            if args.k is None or args.r is None:
                raise ConfigError("density needs --k and --r")
            cb = density_codes(hist, DensityConfig(k=args.k, r=args.r))
        else:
            if args.k is None:
                raise ConfigError("k-medoids needs --k")
            cfg = KMedoidsConfig(k=args.k, max_iterations=args.max_iter,
                                 metric=Metric(args.metric), seed=args.seed,
                                 candidate_cap=args.candidate_cap)
            cb = kmedoids_codes(hist, cfg)
    payload = cb.to_json_dict()
    payload["manifest"] = _manifest(args, "codebook", started,
                                    dataset_digest=ds_digest,
                                    codebook_digest=cb.digest())
    atomic_write_json(args.out, payload)
    print(f"codes={cb.k} channels={cb.channels} digest={cb.digest()[:16]} -> {args.out}")
    return 0


def cmd_discretize(args) -> int:
    started = time.time()
    cb = load_codebook(args.codes)
    disc = Discretizer.from_codebook(cb)
    ds = load_dataset(args.format, _resolve_data_dir(args), args.split)
    out = discretize_dataset(ds, disc)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "idx":
        prefix = {"train": "train", "test": "t10k"}[args.split]
        images_path = out_dir / f"{prefix}-images-idx3-ubyte"
        labels_path = out_dir / f"{prefix}-labels-idx1-ubyte"
        save_idx(out, images_path, labels_path)
        written = [str(images_path), str(labels_path)]
    elif args.split == "test":
        path = out_dir / "test_batch.bin"
        save_cifar10(out, path)
        written = [str(path)]
    else:
        # mirror the standard 10000-record batch layout so the output
        # directory re-ingests as a training split
        written = []
        for i, start in enumerate(range(0, len(out), 10000), start=1):
            chunk = _limit_range(out, start, min(start + 10000, len(out)))
            path = out_dir / f"data_batch_{i}.bin"
            save_cifar10(chunk, path)
            written.append(str(path))
    manifest = _manifest(args, "discretize", started,
                         dataset_digest=dataset_digest(ds),
                         output_digest=dataset_digest(out),
                         codebook_digest=cb.digest(), outputs=written)
    atomic_write_json(out_dir / "discretize.manifest.json", manifest)
    print(f"wrote {', '.join(written)}")
    return 0


def cmd_hardness_cdf(args) -> int:
    started = time.time()
    if args.preset:
        preset = HARDNESS_PRESETS[args.preset]
        if args.eps is None:
            args.eps, args.eps_scale = preset["eps"], preset["eps_scale"]
    eps = _eps_bytes(args)
    cb = load_codebook(args.codes)
    disc = Discretizer.from_codebook(cb)
    ds = load_dataset(args.format, _resolve_data_dir(args), args.split)
    if args.limit:
        ds = _limit(ds, args.limit)
    k_base = args.k_base or disc.per_pixel_outcomes(ds.channels)
    metadata = {"eps_byte": eps, "eps_is_assumed_attack_budget": bool(args.preset)}
    report = fragmentation_report(ds, disc, eps, k_base,
                                  codebook_digest=cb.digest(), metadata=metadata)
    rows = ["measure,cumulative_fraction"]
    rows += [f"{m:.9f},{f:.9f}" for m, f in report.cdf_points()]
    atomic_write_text(args.out, "\n".join(rows) + "\n")
    manifest = _manifest(args, "hardness cdf", started,
                         dataset_digest=dataset_digest(ds),
                         codebook_digest=cb.digest(),
                         k_base=k_base, metadata=metadata,
                         median_measure=report.median_measure,
                         median_log2_product=report.median_log2_product)
    atomic_write_json(str(args.out) + ".manifest.json", manifest)
    print(f"median_measure={report.median_measure:.4f} "
          f"median_log2_product={report.median_log2_product:.1f} -> {args.out}")
    return 0


def cmd_hardness_neighborhoods(args) -> int:
    started = time.time()
    if args.preset:
        preset = HARDNESS_PRESETS[args.preset]
        if args.eps is None:
            args.eps, args.eps_scale = preset["eps"], preset["eps_scale"]
    eps = _eps_bytes(args)
    ds = load_dataset(args.format, _resolve_data_dir(args), args.split)
    hist = build_histogram(ds)
    nbhd = neighborhood_map(hist, eps)
    if nbhd.values.shape[1] == 1:
        rows = ["value,count"]
        rows += [f"{int(v[0])},{int(c)}" for v, c in zip(nbhd.values, nbhd.counts)]
    else:
        rows = ["r,g,b,count"]
        rows += [f"{int(v[0])},{int(v[1])},{int(v[2])},{int(c)}"
                 for v, c in zip(nbhd.values, nbhd.counts)]
    atomic_write_text(args.out, "\n".join(rows) + "\n")
    manifest = _manifest(args, "hardness neighborhoods", started,
                         dataset_digest=dataset_digest(ds),
                         max_count=nbhd.max_count, eps_byte=eps)
    atomic_write_json(str(args.out) + ".manifest.json", manifest)
    print(f"max_count={nbhd.max_count} distinct_values={len(nbhd.counts)} -> {args.out}")
    return 0


def cmd_hardness_valuehist(args) -> int:
    started = time.time()
    ds = load_dataset(args.format, _resolve_data_dir(args), args.split)
    hist = build_histogram(ds)
    rows_data = value_histogram_rows(hist)
    header = "value,count" if ds.channels == 1 else "r,g,b,count"
    rows = [header] + [",".join(str(x) for x in row) for row in rows_data]
    atomic_write_text(args.out, "\n".join(rows) + "\n")
    manifest = _manifest(args, "hardness valuehist", started,
                         dataset_digest=dataset_digest(ds))
    atomic_write_json(str(args.out) + ".manifest.json", manifest)
    print(f"distinct_values={len(rows_data)} -> {args.out}")
    return 0


def _limit(ds, n: int):
    return _limit_range(ds, 0, n)


def _limit_range(ds, start: int, stop: int):
    from .core import LabeledDataset

    return LabeledDataset(images=ds.images[start:stop], labels=ds.labels[start:stop],
                          num_classes=ds.num_classes)


def cmd_certify(args) -> int:
    started = time.time()
    cb = load_codebook(args.codes)
    clf = load_model(args.model)
    ds = load_dataset(args.format, _resolve_data_dir(args), args.split)
    if args.limit:
        ds = _limit(ds, args.limit)
    if args.preset == "mnist-table":
        settings = [(e * 255.0, b) for e, b in zip(MNIST_TABLE_EPS, MNIST_TABLE_BITS)]
        eps_unit = MNIST_TABLE_EPS
    else:
        eps = _eps_bytes(args)
        settings = [(eps, args.budget_bits)]
        eps_unit = [eps / 255.0]
    rows = []
    for (eps_byte, bits), eps01 in zip(settings, eps_unit):
        cfg = CertifyConfig(eps=eps_byte, budget_bits=bits, delta=args.delta)
        report = global_certificate(ds, cb, clf, cfg)
        row = report.to_json_dict()
        row["epsilon"] = eps01
        rows.append(row)
        print(f"eps={eps01:g} b={bits} unable={row['unable']:.4f} "
              f"success={row['success']:.4f} fail={row['fail']:.4f} "
              f"s_hat_star={row['s_hat_star']:.4f}")
    payload = {
        "rows": rows,
        "manifest": _manifest(args, "certify", started,
                              dataset_digest=dataset_digest(ds),
                              codebook_digest=cb.digest(),
                              model_digest=model_digest(args.model)),
    }
    atomic_write_json(args.out, payload)
    return 0


def cmd_idealmodel(args) -> int:
    started = time.time()
    codewords = random_codewords(args.k, args.channels, args.gamma, seed=args.seed)
    params = IdealModelParams(codewords=codewords, min_separation=args.gamma,
                              sigma=args.sigma, d=args.d, num_images=args.images,
                              seed=args.seed)
    report = validate_recovery(params, trials=args.trials, delta=args.delta)
    payload = {
        "report": report.to_json_dict(),
        "codewords": codewords.astype(int).tolist(),
        "manifest": _manifest(args, "idealmodel validate", started),
    }
    atomic_write_json(args.out, payload)
    print(f"recovery_rate={report.recovery_rate:.3f} nu={report.nu:.4f} "
          f"r={report.r:.4f} premise_ok={report.premise_ok}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixeldisc",
        description="Pixel-discretization defenses: codebooks, hardness "
                    "diagnostics, and sound robustness certificates.",
    )
    parser.add_argument("--version", action="version", version=f"pixeldisc {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker thread cap for compiled kernels")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="parse a dataset and print its digest")
    _add_dataset_flags(p)
    p.add_argument("--out", default=None, help="optional digest JSON path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("codebook", help="construct a codebook")
    csub = p.add_subparsers(dest="codebook_cmd", required=True)
    pb = csub.add_parser("build", help="build codes from a dataset")
    pb.add_argument("--algo", choices=["binning", "density", "kmedoids"], default=None)
    pb.add_argument("--k", type=int, default=None)
    pb.add_argument("--r", type=float, default=None, help="density removal radius (0-255)")
    pb.add_argument("--metric", choices=["linf", "l1", "l2"], default="l1",
                    help="k-medoids distance")
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--max-iter", type=int, default=10)
    pb.add_argument("--candidate-cap", type=int, default=4096)
    pb.add_argument("--preset", choices=sorted(CODEBOOK_PRESETS), default=None)
    _add_dataset_flags(pb)
    pb.add_argument("--out", required=True)
    pb.set_defaults(func=cmd_codebook)

    p = sub.add_parser("discretize", help="apply T to a dataset and re-emit it")
    p.add_argument("--codes", required=True)
    _add_dataset_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("hardness", help="dataset difficulty diagnostics")
    hsub = p.add_subparsers(dest="hardness_cmd", required=True)
    pc = hsub.add_parser("cdf", help="fragmentation-measure CDF")
    pc.add_argument("--codes", required=True)
    _add_eps_flags(pc)
    pc.add_argument("--k-base", type=int, default=None,
                    help="log base (defaults to the per-pixel outcome count)")
    pc.add_argument("--preset", choices=sorted(HARDNESS_PRESETS), default=None)
    pc.add_argument("--limit", type=int, default=None)
    _add_dataset_flags(pc)
    pc.add_argument("--out", required=True)
    pc.set_defaults(func=cmd_hardness_cdf)

    pn = hsub.add_parser("neighborhoods", help="exact l-inf neighborhood sizes")
    _add_eps_flags(pn)
    pn.add_argument("--preset", choices=sorted(HARDNESS_PRESETS), default=None)
    _add_dataset_flags(pn)
    pn.add_argument("--out", required=True)
    pn.set_defaults(func=cmd_hardness_neighborhoods)

    pv = hsub.add_parser("valuehist", help="pixel-value histogram CSV")
    _add_dataset_flags(pv)
    pv.add_argument("--out", required=True)
    pv.set_defaults(func=cmd_hardness_valuehist)

    p = sub.add_parser("certify", help="local + global robustness certificates")
    p.add_argument("--codes", required=True)
    p.add_argument("--model", required=True, help="classifier model.json")
    _add_eps_flags(p)
    p.add_argument("--budget-bits", type=int, default=20)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--preset", choices=["mnist-table"], default=None)
    _add_dataset_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("idealmodel", help="synthetic-model validation")
    isub = p.add_subparsers(dest="idealmodel_cmd", required=True)
    pi = isub.add_parser("validate", help="codeword-recovery Monte Carlo")
    pi.add_argument("--k", type=int, required=True)
    pi.add_argument("--gamma", type=float, required=True,
                    help="minimum codeword separation")
    pi.add_argument("--sigma", type=float, required=True)
    pi.add_argument("--images", type=int, required=True)
    pi.add_argument("--d", type=int, required=True, help="pixels per image")
    pi.add_argument("--trials", type=int, required=True)
    pi.add_argument("--seed", type=int, default=0)
    pi.add_argument("--channels", type=int, choices=[1, 3], default=3)
    pi.add_argument("--delta", type=float, default=0.01)
    pi.add_argument("--out", required=True)
    pi.set_defaults(func=cmd_idealmodel)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        try:
            import numba

            numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
        except ImportError:
            pass
    try:
        return args.func(args)
    except PixeldiscError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
