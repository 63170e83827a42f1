"""Binary weight files.

Layout (all integers u32, little-endian)::

    b"MSSR" | version | n | m | c | scale
    per parameter tensor, in build order:
        rank | dims[rank] | float32 data (row-major)

Build order is: feature-extraction inception branches (dilation 1, 2, 3;
weights then bias each), fusion conv, then for each enhancement block its
three branches and fusion conv, and finally the reconstruction conv.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .model import MSSRNet, NetConfig, build_network, parameter_count

MAGIC = b"MSSR"
VERSION = 1
HEADER = struct.Struct("<4s5I")


def encode(net: MSSRNet, scale: int) -> bytes:
    cfg = net.config
    chunks = [HEADER.pack(MAGIC, VERSION, cfg.n, cfg.m, cfg.c, scale)]
    for param in net.parameters():
        chunks.append(struct.pack(f"<{1 + param.ndim}I", param.ndim, *param.shape))
        chunks.append(np.ascontiguousarray(param, dtype="<f4").tobytes())
    return b"".join(chunks)


def save_weights(net: MSSRNet, path, scale: int = 0) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(net, scale))
    tmp.replace(path)


def expected_size(cfg: NetConfig) -> int:
    """Exact file size for a network of configuration ``cfg``."""
    convs = 3 * (cfg.m + 1) + (cfg.m + 2)
    record_headers = convs * ((1 + 4) + (1 + 1)) * 4
    return HEADER.size + record_headers + 4 * parameter_count(cfg)


def decode(raw: bytes, dtype=None) -> tuple[MSSRNet, int]:
    if len(raw) < HEADER.size:
        raise FormatError(f"file too short for header ({len(raw)} < {HEADER.size} bytes)")
    magic, version, n, m, c, scale = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported weight format version {version}")
    cfg = NetConfig(n=n, m=m, c=c)
    try:
        cfg.validate()
    except ValueError as exc:
        raise FormatError(f"invalid header: {exc}") from exc

    net = build_network(cfg, dtype=dtype or np.float32)
    params = net.parameters()
    offset = HEADER.size
    loaded = 0
    for index, param in enumerate(params):
        if offset + 4 > len(raw):
            raise FormatError(f"record {index}: file ends before the record header")
        (rank,) = struct.unpack_from("<I", raw, offset)
        if rank != param.ndim:
            raise FormatError(f"record {index}: rank {rank}, expected {param.ndim}")
        if offset + 4 * (1 + rank) > len(raw):
            raise FormatError(f"record {index}: file ends inside the dims list")
        dims = struct.unpack_from(f"<{rank}I", raw, offset + 4)
        if tuple(dims) != param.shape:
            raise FormatError(f"record {index}: dims {dims}, expected {param.shape}")
        offset += 4 * (1 + rank)
        nbytes = 4 * param.size
        if offset + nbytes > len(raw):
            raise FormatError(f"record {index}: incomplete data ({len(raw) - offset} of {nbytes} bytes)")
        param[...] = np.frombuffer(raw, dtype="<f4", count=param.size, offset=offset).reshape(param.shape)
        offset += nbytes
        loaded += param.size
    if offset != len(raw):
        raise FormatError(f"{len(raw) - offset} trailing bytes after the last record")
    if loaded != parameter_count(cfg):
        raise FormatError(f"loaded {loaded} values, expected {parameter_count(cfg)}")
    return net, scale


def load_weights(path, dtype=None) -> tuple[MSSRNet, int]:
    """Return ``(network, scale_tag)``."""
    return decode(Path(path).read_bytes(), dtype)
