"""Training corpus: augmentation, degradation and random patch batches."""
from __future__ import annotations

import functools
import logging
from pathlib import Path

import numpy as np

from .errors import StateError
from .imaging import ImagePlane, degrade, load_image, modcrop, rgb_to_y
from .tensor import default_dtype

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".bmp", ".png")


def rot90(img: ImagePlane) -> ImagePlane:
    """Quarter turn; a 2x1 column ``[a; b]`` becomes the row ``[b a]``."""
    return ImagePlane(np.rot90(img.data, k=-1, axes=(1, 2)).copy(), img.mode)


def hflip(img: ImagePlane) -> ImagePlane:
    return ImagePlane(img.data[:, :, ::-1].copy(), img.mode)


def augment(img: ImagePlane) -> list[ImagePlane]:
    """The eight rotations/flips: rot0, flip(rot0), rot90, flip(rot90), ..."""
    out = []
    current = img
    for _ in range(4):
        out += [current, hflip(current)]
        current = rot90(current)
    return out


def list_images(directory) -> list[Path]:
    """Sorted .bmp/.png files in ``directory``; other files are skipped with a warning."""
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"data directory {directory} does not exist")
    paths = []
    for path in sorted(directory.iterdir()):
        if path.is_dir():
            continue
        if path.suffix.lower() in IMAGE_SUFFIXES:
            paths.append(path)
        else:
            log.warning("ignoring non-image file %s", path)
    return paths


def load_luminance(path) -> ImagePlane:
    return rgb_to_y(load_image(path))


def _transform(a: np.ndarray, variant: int) -> np.ndarray:
    """Apply augmentation ``variant`` (same order as ``augment``) to a 2-D array view."""
    turns, flip = divmod(variant, 2)
    a = np.rot90(a, k=-turns)
    return a[:, ::-1] if flip else a


class TrainCorpus:
    """HR luminance planes with precomputed (interpolated LR, residual) pairs.

    Each source image is degraded once at full size. Augmented variants are
    rotated/flipped views of that pair; the bicubic pipeline is symmetric
    under these transforms, so this equals degrading each augmented image.
    In lazy mode a source is degraded the first time a patch is drawn from it.
    """

    def __init__(self, images, scale: int, patch_size: int = 48, augmentation: bool = True, lazy: bool = False):
        self.scale = scale
        self.patch_size = patch_size
        self.augmentation = augmentation
        self.lazy = lazy
        self._sources: list[ImagePlane] = []
        for img in images:
            if img.mode != "Y":
                raise ValueError(f"corpus images must be luminance planes, got {img.mode}")
            cropped = modcrop(img, scale)
            if min(cropped.height, cropped.width) < patch_size:
                log.warning("skipping %dx%d image smaller than patch size %d", img.width, img.height, patch_size)
                continue
            self._sources.append(cropped)
        self.variants_per_source = 8 if augmentation else 1
        if lazy:
            self._degraded = functools.lru_cache(maxsize=None)(self._degrade_source)
        else:
            pairs = [self._degrade_source(i) for i in range(len(self._sources))]
            self._degraded = pairs.__getitem__

    @classmethod
    def from_directory(cls, directory, scale: int, **kwargs) -> "TrainCorpus":
        return cls([load_luminance(p) for p in list_images(directory)], scale, **kwargs)

    def __len__(self) -> int:
        return len(self._sources) * self.variants_per_source

    @property
    def source_count(self) -> int:
        return len(self._sources)

    def _degrade_source(self, source: int):
        lr_interp, residual = degrade(self._sources[source], self.scale)
        return lr_interp.data[0], residual[0]

    def hr(self, index: int) -> np.ndarray:
        """HR plane of variant ``index`` as an (H, W) array."""
        source, variant = divmod(index, self.variants_per_source)
        return _transform(self._sources[source].data[0], variant)

    def pair(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        """``(lr_interp, residual_target)`` arrays of shape (H, W) for variant ``index``."""
        source, variant = divmod(index, self.variants_per_source)
        lr_interp, residual = self._degraded(source)
        return _transform(lr_interp, variant), _transform(residual, variant)

    def sample_batch(self, batch: int, rng: np.random.Generator, dtype=None, return_index: bool = False):
        """Draw ``batch`` aligned patches: an image uniformly, then a uniform offset.

        Returns ``(x, y)`` tensors of shape (batch, 1, P, P); with
        ``return_index`` also the list of ``(image, top, left)`` picks.
        """
        if len(self) == 0:
            raise StateError("cannot sample from an empty corpus")
        dtype = dtype or default_dtype()
        p = self.patch_size
        x = np.empty((batch, 1, p, p), dtype=dtype)
        y = np.empty((batch, 1, p, p), dtype=dtype)
        picks = []
        for b in range(batch):
            index = int(rng.integers(len(self)))
            lr_interp, residual = self.pair(index)
            top = int(rng.integers(lr_interp.shape[0] - p + 1))
            left = int(rng.integers(lr_interp.shape[1] - p + 1))
            x[b, 0] = lr_interp[top : top + p, left : left + p]
            y[b, 0] = residual[top : top + p, left : left + p]
            picks.append((index, top, left))
        if return_index:
            return x, y, picks
        return x, y
