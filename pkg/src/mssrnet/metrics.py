"""PSNR and SSIM on luminance planes, with border shaving."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _plane(img) -> np.ndarray:
    data = getattr(img, "data", img)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 3:
        if data.shape[0] != 1:
            raise ShapeError(f"metrics need a single-channel plane, got {data.shape[0]} channels")
        data = data[0]
    if data.ndim != 2:
        raise ShapeError(f"metrics need a 2-D plane, got shape {data.shape}")
    return data


def _shaved(a, b, shave: int) -> tuple[np.ndarray, np.ndarray]:
    a, b = _plane(a), _plane(b)
    if a.shape != b.shape:
        raise ShapeError(f"image dims differ: {a.shape} vs {b.shape}")
    if shave < 0 or 2 * shave >= min(a.shape):
        raise ValueError(f"shave {shave} must be below half the smallest dimension of {a.shape}")
    if shave:
        a = a[shave:-shave, shave:-shave]
        b = b[shave:-shave, shave:-shave]
    return a * PEAK, b * PEAK


def psnr(a, b, shave: int = 0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    a, b = _shaved(a, b, shave)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(PEAK**2 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2 * sigma**2))
    g /= g.sum()
    return g


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = g.size
    rows = np.lib.stride_tricks.sliding_window_view(x, k, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ g


def ssim(a, b, shave: int = 0) -> float:
    """Mean SSIM over all valid 11x11 Gaussian windows."""
    a, b = _shaved(a, b, shave)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image region {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    g = gaussian_window()
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class EvalReport:
    scale: int
    shave: int
    rows: list[tuple[str, float, float]] = field(default_factory=list)

    def add(self, name: str, psnr_db: float, ssim_score: float) -> None:
        self.rows.append((name, psnr_db, ssim_score))

    @property
    def avg_psnr(self) -> float:
        finite = [p for _, p, _ in self.rows if math.isfinite(p)]
        if len(finite) < len(self.rows):
            warnings.warn(f"{len(self.rows) - len(finite)} image(s) with infinite PSNR excluded from the average")
        return float(np.mean(finite)) if finite else math.nan

    @property
    def avg_ssim(self) -> float:
        return float(np.mean([s for _, _, s in self.rows])) if self.rows else math.nan

    def to_lines(self) -> str:
        """Machine-readable ``image<TAB>psnr_db<TAB>ssim`` lines."""
        return "".join(f"{name}\t{p:.4f}\t{s:.4f}\n" for name, p, s in self.rows)

    def to_table(self) -> str:
        width = max([len("image"), len("average")] + [len(name) for name, _, _ in self.rows])
        lines = [f"scale x{self.scale}, shave {self.shave}px", f"{'image':<{width}}  {'PSNR':>8}  {'SSIM':>7}"]
        lines += [f"{name:<{width}}  {p:8.2f}  {s:7.4f}" for name, p, s in self.rows]
        lines.append(f"{'average':<{width}}  {self.avg_psnr:8.2f}  {self.avg_ssim:7.4f}")
        return "\n".join(lines) + "\n"
