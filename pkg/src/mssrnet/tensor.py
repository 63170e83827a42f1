"""Dense NCHW tensors backed by C-contiguous numpy arrays.

A tensor is a rank-4 ``numpy.ndarray`` of shape ``(N, C, H, W)`` in
row-major order, so flat index ``((n*C + c)*H + h)*W + w`` addresses
element ``[n, c, h, w]``. Two precisions are supported: ``"std"``
(float32) and ``"high"`` (float64). The module-level precision controls
what new tensors are created with; every op keeps the dtype of its inputs.
"""
from __future__ import annotations

import contextlib
from typing import Iterator

import numpy as np

from .errors import DimensionError, ShapeError

PRECISIONS = {"std": np.float32, "high": np.float64}

# Upper bound on element count; guards against overflow-sized requests.
MAX_ELEMENTS = 1 << 34

_precision = "std"


def set_precision(mode: str) -> None:
    global _precision
    if mode not in PRECISIONS:
        raise ValueError(f"unknown precision {mode!r}; expected one of {sorted(PRECISIONS)}")
    _precision = mode


def get_precision() -> str:
    return _precision


def default_dtype() -> np.dtype:
    return np.dtype(PRECISIONS[_precision])


@contextlib.contextmanager
def precision(mode: str) -> Iterator[None]:
    """Temporarily switch the global precision."""
    previous = _precision
    set_precision(mode)
    try:
        yield
    finally:
        set_precision(previous)


def _check_dims(dims) -> tuple[int, int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4:
        raise DimensionError(f"expected 4 dims (N, C, H, W), got {dims}")
    if any(d < 1 for d in dims):
        raise DimensionError(f"all dims must be >= 1, got {dims}")
    total = 1
    for d in dims:
        total *= d
    if total > MAX_ELEMENTS:
        raise DimensionError(f"tensor of dims {dims} has {total} elements, above the {MAX_ELEMENTS} limit")
    return dims


def create(dims, fill: float = 0.0, dtype=None) -> np.ndarray:
    dims = _check_dims(dims)
    return np.full(dims, fill, dtype=dtype or default_dtype())


def as_tensor(data, dtype=None) -> np.ndarray:
    """Copy ``data`` into a contiguous rank-4 tensor of the current precision."""
    arr = np.array(data, dtype=dtype or default_dtype(), order="C", copy=True)
    _check_dims(arr.shape)
    return arr


def flat_index(dims, n: int, c: int, h: int, w: int) -> int:
    _, C, H, W = dims
    return ((n * C + c) * H + h) * W + w


def get(t: np.ndarray, idx) -> float:
    return t.reshape(-1)[flat_index(t.shape, *idx)].item()


def set_(t: np.ndarray, idx, value: float) -> None:
    t.reshape(-1)[flat_index(t.shape, *idx)] = value


_ELEMENTWISE = {"add": np.add, "sub": np.subtract, "mul": np.multiply}


def elementwise(a: np.ndarray, b: np.ndarray, op: str) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"elementwise {op}: dims {a.shape} and {b.shape} differ")
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(a, b)


def reduce_mean_square(a: np.ndarray) -> float:
    """Mean of squared elements, accumulated in float64."""
    flat = np.asarray(a, dtype=np.float64).reshape(-1)
    return float(np.dot(flat, flat) / flat.size)
