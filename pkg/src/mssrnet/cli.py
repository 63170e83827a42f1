"""Command line entry point: ``mssrnet train|sr|eval``."""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from pathlib import Path

from . import tensor
from .dataset import TrainCorpus, list_images, load_luminance
from .errors import CompatibilityError, MSSRError
from .imaging import ImagePlane, bicubic_resize, load_image, merge_ycbcr, rgb_to_ycbcr, save_image, ycbcr_to_rgb
from .metrics import EvalReport
from .model import MSSRNet, NetConfig
from .training import EpochRecord, evaluate_pair, super_resolve_y, train
from .weights import load_weights, save_weights

log = logging.getLogger("mssrnet")

LOG_HEADER = "epoch\tlr\ttrain_loss\tholdout_psnr"


def worker_count() -> int:
    value = os.environ.get("MSSRNET_THREADS")
    if not value:
        return os.cpu_count() or 1
    count = int(value)
    if count < 1:
        raise ValueError(f"MSSRNET_THREADS must be >= 1, got {value!r}")
    return count


def _thread_limit():
    if not os.environ.get("MSSRNET_THREADS"):
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # BLAS threads stay at the library default
        return nullcontext()
    return threadpool_limits(limits=worker_count())


def split_holdout(paths: list[Path], fraction: float) -> tuple[list[Path], list[Path]]:
    """Deterministic split: the last ``round(fraction * N)`` files by name are held out."""
    if not 0 <= fraction < 1:
        raise ValueError(f"holdout fraction must be in [0, 1), got {fraction}")
    paths = sorted(paths)
    count = int(round(fraction * len(paths)))
    if fraction > 0 and len(paths) > 1:
        count = max(count, 1)
    count = min(count, len(paths) - 1)
    if count <= 0:
        return paths, []
    return paths[:-count], paths[-count:]


def load_network(args, expect_scale: int) -> MSSRNet:
    dtype = tensor.default_dtype()
    net, scale_tag = load_weights(args.weights, dtype=dtype)
    cfg = net.config
    for name in ("n", "m"):
        requested = getattr(args, name)
        if requested is not None and requested != getattr(cfg, name):
            raise CompatibilityError(f"weight file has {name}={getattr(cfg, name)} but --{name} {requested} was requested")
    if scale_tag and scale_tag != expect_scale:
        warnings.warn(f"weights were trained for x{scale_tag}, running at x{expect_scale}")
        log.warning("weights were trained for x%d, running at x%d", scale_tag, expect_scale)
    return net


def cmd_train(args) -> MSSRNet:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = list_images(args.data)
    train_paths, holdout_paths = split_holdout(paths, args.holdout)
    if not train_paths:
        raise MSSRError(f"no usable training images in {args.data}")
    corpus = TrainCorpus([load_luminance(p) for p in train_paths], args.scale)
    if len(corpus) == 0:
        raise MSSRError(f"no training image in {args.data} is large enough for 48x48 patches")
    holdout = [load_luminance(p) for p in holdout_paths]
    cfg = NetConfig(n=8 if args.n is None else args.n, m=5 if args.m is None else args.m, c=1, seed=args.seed)
    log.info("training on %d images (%d held out), n=%d m=%d scale=%d", len(train_paths), len(holdout), cfg.n, cfg.m, args.scale)

    log_path = out_dir / "train.log"
    with open(log_path, "w") as log_file:
        print(LOG_HEADER, file=log_file, flush=True)

        def report(record: EpochRecord) -> None:
            print(record.line(), flush=True)
            print(record.line(), file=log_file, flush=True)

        result = train(
            corpus,
            cfg,
            epochs=args.epochs,
            iters=args.iters,
            batch=args.batch,
            seed=args.seed,
            holdout=holdout,
            out_dir=out_dir,
            on_epoch=report,
        )
    weights_path = Path(args.weights) if args.weights else out_dir / "model.mssr"
    save_weights(result.net, weights_path, args.scale)
    with open(out_dir / "loss.tsv", "w") as fh:
        fh.write("iteration\tloss\tsmoothed\n")
        for i, (loss, smooth) in enumerate(zip(result.losses, result.smoothed), start=1):
            fh.write(f"{i}\t{loss:.8g}\t{smooth:.8g}\n")
    log.info("saved weights to %s", weights_path)
    return result.net


def upscale_rgb(net: MSSRNet | None, img, scale: int):
    """Super-resolve an RGB image: network on luminance, bicubic chroma."""
    ycbcr = rgb_to_ycbcr(img)
    big = bicubic_resize(ycbcr, img.width * scale, img.height * scale)
    y_sr = super_resolve_y(net, ImagePlane(big.data[:1], "Y"))
    return ycbcr_to_rgb(merge_ycbcr(y_sr, big))


def cmd_sr(args) -> list[Path]:
    net = load_network(args, args.scale)
    source = Path(args.data)
    inputs = list_images(source) if source.is_dir() else [source]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in inputs:
        result = upscale_rgb(net, load_image(path), args.scale)
        target = out_dir / path.name
        save_image(result, target)
        log.info("wrote %s (%dx%d)", target, result.width, result.height)
        written.append(target)
    return written


def cmd_eval(args) -> EvalReport:
    net = None if args.bicubic_only else load_network(args, args.scale)
    paths = list_images(args.data)
    report = EvalReport(scale=args.scale, shave=args.scale)

    def evaluate(path: Path):
        return evaluate_pair(net, load_luminance(path), args.scale)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(evaluate, paths))
    for path, (p, s) in zip(paths, results):
        if not math.isfinite(p):
            log.warning("%s: identical reconstruction, PSNR is infinite", path.name)
        report.add(path.name, p, s)
    sys.stdout.write(report.to_lines())
    sys.stdout.write(report.to_table())
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "eval.tsv").write_text(report.to_lines())
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mssrnet", description="Multi-scale dilated-inception super-resolution.")
    parser.add_argument("command", choices=("train", "sr", "eval"))
    parser.add_argument("--scale", type=int, choices=(2, 3, 4), default=2)
    parser.add_argument("--n", type=int, default=None, help="branch width (train default 8)")
    parser.add_argument("--m", type=int, default=None, help="enhancement blocks (train default 5)")
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--iters", type=int, default=2000, help="iterations per epoch")
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--data", help="training/test image directory, or an input image for sr")
    parser.add_argument("--weights", help="weight file to write (train) or read (sr, eval)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--holdout", type=float, default=0.05)
    parser.add_argument("--bicubic-only", action="store_true", help="eval: score plain bicubic upscaling")
    parser.add_argument("--precision", choices=("std", "high"), default="std")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.data is None:
        parser.error("--data is required")
    if args.command in ("sr",) or (args.command == "eval" and not args.bicubic_only):
        if not args.weights:
            parser.error(f"{args.command} needs --weights")
    if args.command in ("train", "sr") and not args.out:
        if args.command == "sr":
            parser.error("sr needs --out")
        args.out = "runs"
    try:
        with _thread_limit(), tensor.precision(args.precision):
            {"train": cmd_train, "sr": cmd_sr, "eval": cmd_eval}[args.command](args)
    except (MSSRError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
