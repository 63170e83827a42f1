"""Training loop and image-level reconstruction helpers."""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import model, nn_ops
from .dataset import TrainCorpus
from .errors import NumericError
from .imaging import ImagePlane, degrade, modcrop
from .metrics import psnr, ssim
from .optim import Adam, learning_rate_for_epoch
from .tensor import default_dtype
from .weights import save_weights

log = logging.getLogger(__name__)

SMOOTHING_WINDOW = 50


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    holdout_psnr: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.lr:g}\t{self.train_loss:.6g}\t{self.holdout_psnr:.4f}"


@dataclass
class TrainResult:
    net: model.MSSRNet
    losses: list[float] = field(default_factory=list)
    smoothed: list[float] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)


def super_resolve_y(net: model.MSSRNet | None, lr_interp: ImagePlane) -> ImagePlane:
    """Add the predicted residual to an interpolated luminance plane (bicubic if ``net`` is None)."""
    if net is None:
        return lr_interp
    dtype = net.recon.weights.dtype
    x = lr_interp.data[None].astype(dtype)
    return ImagePlane(model.predict_hr(net, x)[0].astype(np.float64), "Y")


def reconstruct(net: model.MSSRNet | None, hr: ImagePlane, scale: int) -> tuple[ImagePlane, ImagePlane]:
    """Degrade ``hr`` and reconstruct it; returns ``(cropped_hr, estimate)``."""
    hr = modcrop(hr, scale)
    lr_interp, _ = degrade(hr, scale)
    return hr, super_resolve_y(net, lr_interp)


def evaluate_pair(net, hr: ImagePlane, scale: int) -> tuple[float, float]:
    hr, estimate = reconstruct(net, hr, scale)
    return psnr(hr, estimate, shave=scale), ssim(hr, estimate, shave=scale)


def holdout_psnr(net, images: list[ImagePlane], scale: int) -> float:
    if not images:
        return math.nan
    values = [psnr(*reconstruct(net, img, scale), shave=scale) for img in images]
    return float(np.mean([v for v in values if math.isfinite(v)]))


def train(
    corpus: TrainCorpus,
    cfg: model.NetConfig,
    *,
    epochs: int = 100,
    iters: int = 2000,
    batch: int = 64,
    seed: int = 0,
    holdout: list[ImagePlane] | None = None,
    out_dir: Path | None = None,
    checkpoint_every: int = 10,
    on_epoch: Callable[[EpochRecord], None] | None = None,
    net: model.MSSRNet | None = None,
) -> TrainResult:
    """Adam on the half-MSE residual objective with the staged learning rate."""
    dtype = default_dtype()
    if net is None:
        net = model.build_network(cfg, dtype=dtype)
    params = net.parameters()
    opt = Adam(params)
    rng = np.random.default_rng(seed)
    window: deque[float] = deque(maxlen=SMOOTHING_WINDOW)
    result = TrainResult(net)

    for epoch in range(1, epochs + 1):
        lr = learning_rate_for_epoch(epoch, epochs)
        for _ in range(iters):
            x, y = corpus.sample_batch(batch, rng, dtype=dtype)
            residual, cache = model.forward(net, x)
            loss, grad = nn_ops.mse_loss(residual, y)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}, iteration {len(result.losses) + 1}")
            grads = model.backward(net, cache, grad)
            opt.step(params, grads, lr)
            window.append(loss)
            result.losses.append(loss)
            result.smoothed.append(sum(window) / len(window))

        record = EpochRecord(epoch, lr, result.smoothed[-1] if result.smoothed else math.nan,
                             holdout_psnr(net, holdout or [], corpus.scale))
        result.epochs.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if out_dir is not None and checkpoint_every and epoch % checkpoint_every == 0:
            save_weights(net, Path(out_dir) / f"ckpt_{epoch}.mssr", corpus.scale)
    return result
