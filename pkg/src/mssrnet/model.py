"""Multi-scale super-resolution network built from dilated inception modules.

Topology (all layers keep the spatial size of their input)::

    x -> [inception(c -> 3n), ReLU] -> [conv 3n -> 3n, ReLU]          feature extraction
      -> m x ([inception(3n -> 3n), ReLU] -> [conv 3n -> 3n, ReLU])    feature enhancement
      -> conv 3n -> c                                                  reconstruction (residual)

An inception module runs three 3x3 convolutions with dilations 1, 2 and 3
over the same input, applies ReLU to each branch and concatenates the
results along the channel axis. The network predicts the high-frequency
residual; ``predict_hr`` adds it back onto the interpolated input.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import nn_ops
from .errors import ShapeError, StateError
from .nn_ops import ConvParams
from .tensor import default_dtype

DILATIONS = (1, 2, 3)


@dataclass
class NetConfig:
    n: int = 8
    m: int = 5
    c: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError(f"branch width n must be >= 1, got {self.n}")
        if self.m < 0:
            raise ValueError(f"enhancement depth m must be >= 0, got {self.m}")
        if self.c not in (1, 3):
            raise ValueError(f"image channels c must be 1 or 3, got {self.c}")


@dataclass
class InceptionModule:
    branches: list[ConvParams]

    def __post_init__(self):
        if tuple(b.dilation for b in self.branches) != DILATIONS:
            raise ValueError(f"inception branches must have dilations {DILATIONS}")
        if len({b.c_in for b in self.branches}) != 1:
            raise ShapeError("inception branches must share their input channel count")

    @property
    def c_out(self) -> int:
        return sum(b.c_out for b in self.branches)


@dataclass
class MSSRNet:
    config: NetConfig
    fe_inception: InceptionModule
    fe_fuse: ConvParams
    blocks: list[tuple[InceptionModule, ConvParams]]
    recon: ConvParams

    def layers(self) -> list:
        """Layers in evaluation order; inceptions and plain convs interleaved."""
        out: list = [self.fe_inception, self.fe_fuse]
        for inception, fuse in self.blocks:
            out += [inception, fuse]
        out.append(self.recon)
        return out

    def convolutions(self) -> Iterator[ConvParams]:
        """Every ConvParams in build (serialization) order."""
        for layer in self.layers():
            if isinstance(layer, InceptionModule):
                yield from layer.branches
            else:
                yield layer

    def parameters(self) -> list[np.ndarray]:
        params = []
        for conv in self.convolutions():
            params += [conv.weights, conv.bias]
        return params

    @property
    def inception_count(self) -> int:
        return sum(isinstance(layer, InceptionModule) for layer in self.layers())

    @property
    def conv_count(self) -> int:
        return sum(isinstance(layer, ConvParams) for layer in self.layers())

    def astype(self, dtype) -> "MSSRNet":
        """Convert all parameters in place to ``dtype``; returns self."""
        for conv in self.convolutions():
            conv.weights = conv.weights.astype(dtype)
            conv.bias = conv.bias.astype(dtype)
        return self


def _conv(c_in: int, c_out: int, dilation: int, rng: np.random.Generator, dtype) -> ConvParams:
    fan_in = c_in * nn_ops.KERNEL * nn_ops.KERNEL
    weights = nn_ops.he_uniform_init((c_out, c_in, 3, 3), fan_in, rng, dtype)
    return ConvParams(weights, np.zeros(c_out, dtype=dtype), dilation, dilation)


def _inception(c_in: int, n: int, rng, dtype) -> InceptionModule:
    return InceptionModule([_conv(c_in, n, d, rng, dtype) for d in DILATIONS])


def build_network(cfg: NetConfig, dtype=None) -> MSSRNet:
    cfg.validate()
    dtype = dtype or default_dtype()
    rng = np.random.default_rng(cfg.seed)
    width = 3 * cfg.n
    fe_inception = _inception(cfg.c, cfg.n, rng, dtype)
    fe_fuse = _conv(width, width, 1, rng, dtype)
    blocks = []
    for _ in range(cfg.m):
        inception = _inception(width, cfg.n, rng, dtype)
        blocks.append((inception, _conv(width, width, 1, rng, dtype)))
    recon = _conv(width, cfg.c, 1, rng, dtype)
    return MSSRNet(cfg, fe_inception, fe_fuse, blocks, recon)


@dataclass
class ForwardCache:
    net: MSSRNet
    input_shape: tuple
    # per layer: (input, output); recon output has no ReLU
    records: list = field(default_factory=list)
    consumed: bool = False


def forward(net: MSSRNet, x: np.ndarray):
    """Return ``(residual, cache)``; the cache feeds exactly one ``backward``."""
    if x.ndim != 4 or x.shape[1] != net.config.c:
        raise ShapeError(f"input dims {x.shape} do not match a {net.config.c}-channel network")
    cache = ForwardCache(net, x.shape)
    h = x
    for layer in net.layers():
        if isinstance(layer, InceptionModule):
            outs = [nn_ops.relu_forward(nn_ops.dilated_conv2d_forward(h, b)) for b in layer.branches]
            out = nn_ops.concat_channels(outs)
        else:
            z = nn_ops.dilated_conv2d_forward(h, layer)
            out = z if layer is net.recon else nn_ops.relu_forward(z)
        cache.records.append((h, out))
        h = out
    return h, cache


def backward(net: MSSRNet, cache: ForwardCache, grad_residual: np.ndarray) -> list[np.ndarray]:
    """Gradients for every array in ``net.parameters()``, same order."""
    if cache.net is not net:
        raise StateError("forward cache belongs to a different network")
    if cache.consumed:
        raise StateError("forward cache was already used by a backward pass")
    if grad_residual.shape != cache.input_shape:
        raise ShapeError(f"grad dims {grad_residual.shape} != residual dims {cache.input_shape}")
    cache.consumed = True

    layers = net.layers()
    grads_per_layer: list[list[np.ndarray]] = [None] * len(layers)
    g = grad_residual
    for idx in range(len(layers) - 1, -1, -1):
        layer = layers[idx]
        x_in, out = cache.records[idx]
        if isinstance(layer, InceptionModule):
            g_out = nn_ops.relu_backward(out, g)
            parts = nn_ops.split_channels(g_out, [b.c_out for b in layer.branches])
            g_in = np.zeros_like(x_in)
            layer_grads = []
            for branch, gb in zip(layer.branches, parts):
                gi, gw, gbias = nn_ops.dilated_conv2d_backward(x_in, branch, gb)
                g_in += gi
                layer_grads += [gw, gbias]
            g = g_in
        else:
            if layer is not net.recon:
                g = nn_ops.relu_backward(out, g)
            g, gw, gbias = nn_ops.dilated_conv2d_backward(x_in, layer, g)
            layer_grads = [gw, gbias]
        grads_per_layer[idx] = layer_grads
    return [grad for layer_grads in grads_per_layer for grad in layer_grads]


def predict_hr(net: MSSRNet, lr_interp: np.ndarray) -> np.ndarray:
    residual, _ = forward(net, lr_interp)
    return np.clip(lr_interp + residual, 0.0, 1.0)


def receptive_field(cfg: NetConfig) -> int:
    cfg.validate()
    widest = 2 * max(DILATIONS)
    return 1 + widest * (cfg.m + 1) + 2 * (cfg.m + 2)


def parameter_count(cfg: NetConfig) -> int:
    cfg.validate()
    n, m, c = cfg.n, cfg.m, cfg.c
    w = 3 * n
    fe_inception = 3 * (9 * c * n + n)
    fuse = 9 * w * w + w
    block_inception = 3 * (9 * w * n + n)
    recon = 9 * w * c + c
    return fe_inception + (m + 1) * fuse + m * block_inception + recon
