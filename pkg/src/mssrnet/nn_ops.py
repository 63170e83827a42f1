"""Differentiable primitives: dilated 3x3 convolution, ReLU, channel
concatenation and the MSE objective, each with an analytic backward.

All functions operate on NCHW numpy arrays and preserve the input dtype.
The forward convolution accumulates in float64 whatever the storage dtype,
so float32 outputs are rounded once instead of once per partial sum. The
backward pass works in the storage dtype.
Convolution is cross-correlation (no kernel flip): tap ``(i, j)`` of the
3x3 kernel reads the input at offset ``(dilation*(i-1), dilation*(j-1))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .tensor import default_dtype

KERNEL = 3
ACCUMULATE = np.float64


@dataclass
class ConvParams:
    weights: np.ndarray  # (C_out, C_in, 3, 3)
    bias: np.ndarray  # (C_out,)
    dilation: int = 1
    padding: int | None = None

    def __post_init__(self):
        if self.dilation < 1:
            raise ValueError(f"dilation must be >= 1, got {self.dilation}")
        if self.padding is None:
            self.padding = self.dilation
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")
        if self.weights.ndim != 4 or self.weights.shape[2:] != (KERNEL, KERNEL):
            raise ShapeError(f"weights must be (C_out, C_in, 3, 3), got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match C_out={self.weights.shape[0]}")

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        shrink = 2 * self.padding - (KERNEL - 1) * self.dilation
        return h + shrink, w + shrink


def _conv_geometry(x: np.ndarray, p: ConvParams) -> tuple[int, int]:
    if x.ndim != 4:
        raise ShapeError(f"input must be rank 4 (N, C, H, W), got shape {x.shape}")
    if x.shape[1] != p.c_in:
        raise ShapeError(f"input has {x.shape[1]} channels, weights expect {p.c_in}")
    ho, wo = p.output_hw(x.shape[2], x.shape[3])
    if ho < 1 or wo < 1:
        extent = (KERNEL - 1) * p.dilation + 1
        raise ShapeError(
            f"padded input {x.shape[2] + 2 * p.padding}x{x.shape[3] + 2 * p.padding} "
            f"is smaller than the dilated kernel extent {extent}"
        )
    return ho, wo


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if not pad:
        return x
    out = np.zeros(x.shape[:-2] + (x.shape[-2] + 2 * pad, x.shape[-1] + 2 * pad), dtype=x.dtype)
    out[..., pad : pad + x.shape[-2], pad : pad + x.shape[-1]] = x
    return out


def _im2col(xp: np.ndarray, dilation: int, ho: int, wo: int, dtype=None) -> np.ndarray:
    """Gather the 9 dilated taps of one padded (C, H, W) sample into a (C*9, Ho*Wo) matrix."""
    extent = (KERNEL - 1) * dilation + 1
    # (C, Ho, Wo, 3, 3) view of the dilated taps
    windows = sliding_window_view(xp, (extent, extent), axis=(1, 2))[:, :ho, :wo, ::dilation, ::dilation]
    return windows.transpose(0, 3, 4, 1, 2).astype(dtype or xp.dtype, order="C").reshape(-1, ho * wo)


# Samples are processed one at a time so the im2col matrix stays cache-resident.


def dilated_conv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    ho, wo = _conv_geometry(x, p)
    xp = _pad(x, p.padding)
    w = p.weights.reshape(p.c_out, -1).astype(ACCUMULATE, copy=False)
    bias = p.bias.astype(ACCUMULATE, copy=False)[:, None]
    out = np.empty((x.shape[0], p.c_out, ho, wo), dtype=x.dtype)
    for n in range(x.shape[0]):
        cols = _im2col(xp[n], p.dilation, ho, wo, ACCUMULATE)
        out[n] = (w @ cols + bias).reshape(p.c_out, ho, wo)
    return out


def dilated_conv2d_backward(x: np.ndarray, p: ConvParams, grad_out: np.ndarray):
    """Return ``(grad_input, grad_weights, grad_bias)``.

    The input gradient is itself a dilated correlation of ``grad_out`` with
    the spatially flipped, channel-transposed kernel.
    """
    ho, wo = _conv_geometry(x, p)
    n_batch, c, h, w = x.shape
    if grad_out.shape != (n_batch, p.c_out, ho, wo):
        raise ShapeError(f"grad_out dims {grad_out.shape} != forward output dims {(n_batch, p.c_out, ho, wo)}")

    pad, d = p.padding, p.dilation
    xp = _pad(x, pad)
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    grad_w = np.zeros((p.c_out, c * KERNEL * KERNEL), dtype=x.dtype)
    for n in range(n_batch):
        grad_w += grad_out[n].reshape(p.c_out, -1) @ _im2col(xp[n], d, ho, wo).T

    full_pad = (KERNEL - 1) * d - pad
    if full_pad >= 0:
        flipped = p.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).astype(x.dtype)
        wflip = flipped.reshape(c, -1)
        gp = _pad(grad_out, full_pad)
        grad_input = np.empty_like(x)
        for n in range(n_batch):
            grad_input[n] = (wflip @ _im2col(gp[n], d, h, w)).reshape(c, h, w)
    else:
        # padding wider than the kernel reach: scatter the column gradients back
        wmat = p.weights.reshape(p.c_out, -1).astype(x.dtype, copy=False)
        grad_padded = np.zeros_like(xp)
        for n in range(n_batch):
            gcols = (wmat.T @ grad_out[n].reshape(p.c_out, -1)).reshape(c, KERNEL, KERNEL, ho, wo)
            for i in range(KERNEL):
                for j in range(KERNEL):
                    grad_padded[n, :, i * d : i * d + ho, j * d : j * d + wo] += gcols[:, i, j]
        grad_input = grad_padded[:, :, pad : pad + h, pad : pad + w].astype(x.dtype)
    grad_w = grad_w.reshape(p.weights.shape).astype(p.weights.dtype, copy=False)
    return grad_input, grad_w, grad_bias.astype(p.bias.dtype, copy=False)


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    if x.shape != grad_out.shape:
        raise ShapeError(f"relu_backward: dims {x.shape} and {grad_out.shape} differ")
    return np.where(x > 0, grad_out, 0).astype(grad_out.dtype, copy=False)


def concat_channels(inputs) -> np.ndarray:
    if not inputs:
        raise ValueError("concat_channels needs at least one tensor")
    first = inputs[0].shape
    for t in inputs[1:]:
        if t.ndim != 4 or (t.shape[0], t.shape[2], t.shape[3]) != (first[0], first[2], first[3]):
            raise ShapeError(f"cannot concatenate {t.shape} with {first} along channels")
    return np.concatenate(inputs, axis=1)


def split_channels(t: np.ndarray, sizes) -> list[np.ndarray]:
    sizes = list(sizes)
    if sum(sizes) != t.shape[1]:
        raise ShapeError(f"split sizes {sizes} do not sum to {t.shape[1]} channels")
    offsets = np.cumsum(sizes)[:-1]
    return [np.ascontiguousarray(part) for part in np.split(t, offsets, axis=1)]


def mse_loss(pred: np.ndarray, target: np.ndarray, normalize: bool = True):
    """Half mean squared error per sample, averaged over the batch.

    With ``normalize`` the per-sample squared norm is divided by the number of
    elements per sample, making the value independent of patch and batch size.
    Returns ``(loss, grad_pred)``.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: pred {pred.shape} and target {target.shape} differ")
    batch = pred.shape[0]
    per_sample = pred[0].size if normalize else 1
    scale = 1.0 / (batch * per_sample)
    diff = pred - target
    flat = diff.astype(np.float64, copy=False).reshape(-1)
    loss = 0.5 * scale * float(np.dot(flat, flat))
    grad = (diff * scale).astype(pred.dtype, copy=False)
    return loss, grad


def he_uniform_init(dims, fan_in: int, rng: np.random.Generator, dtype=None) -> np.ndarray:
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=tuple(dims)).astype(dtype or default_dtype())
