"""Image/label augmentations. Every random choice comes from an RngStream."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .dataset import Sample, Source
from .errors import ConfigError
from .imageio import resize_bilinear
from .rng import RngStream

CUTOUT_FILL = 0.5


class MixMode(str, enum.Enum):
    PROPORTIONAL = "proportional"
    UNION = "union"


def _check_pair(a: Sample, b: Sample):
    if a.image.shape != b.image.shape:
        raise ConfigError(f"image shapes differ: {a.image.shape} vs {b.image.shape}")


def mix_labels(ya, yb, lam: float, mode: MixMode) -> np.ndarray:
    """Combined label for a blend carrying weight lam of `a`.

    lam == 1 (or 0) means the other operand contributed nothing and its label
    is dropped in either mode.
    """
    mode = MixMode(mode)
    if lam >= 1.0:
        return np.array(ya, dtype=float)
    if lam <= 0.0:
        return np.array(yb, dtype=float)
    if mode is MixMode.PROPORTIONAL:
        return lam * np.asarray(ya, float) + (1.0 - lam) * np.asarray(yb, float)
    return np.maximum(np.asarray(ya) >= 0.5, np.asarray(yb) >= 0.5).astype(float)


def _mixed_source(a: Sample, b: Sample, lam: float) -> Source:
    if lam >= 1.0:
        return a.source
    if lam <= 0.0:
        return b.source
    if a.dominant != b.dominant:
        return Source.SYNTHESIZED_COMPOUND
    return a.source


def mixup(a: Sample, b: Sample, lam: float, mode=MixMode.PROPORTIONAL) -> Sample:
    """image = lam * a + (1 - lam) * b."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    _check_pair(a, b)
    if lam == 1.0:
        return Sample(a.image.copy(), np.array(a.label, float), a.source)
    image = lam * a.image + (1.0 - lam) * b.image
    return Sample(image, mix_labels(a.label, b.label, lam, mode), _mixed_source(a, b, lam))


@dataclass(frozen=True)
class Rect:
    y0: int
    y1: int
    x0: int
    x1: int

    @property
    def area(self) -> int:
        return max(self.y1 - self.y0, 0) * max(self.x1 - self.x0, 0)


def cutmix_rect(height: int, width: int, lam: float, rng: RngStream, center=None) -> Rect:
    scale = np.sqrt(1.0 - lam)
    cut_h = int(np.round(height * scale))
    cut_w = int(np.round(width * scale))
    if center is None:
        cy = int(rng.integers(height))
        cx = int(rng.integers(width))
    else:
        cy, cx = center
    y0, x0 = cy - cut_h // 2, cx - cut_w // 2
    return Rect(int(np.clip(y0, 0, height)), int(np.clip(y0 + cut_h, 0, height)),
                int(np.clip(x0, 0, width)), int(np.clip(x0 + cut_w, 0, width)))


def cutmix(a: Sample, b: Sample, lam: float, rng: RngStream, mode=MixMode.PROPORTIONAL,
           center=None) -> tuple[Sample, Rect, float]:
    """Paste a (H*sqrt(1-lam)) x (W*sqrt(1-lam)) patch of b onto a.

    The patch centre is uniform over pixels and the rectangle is clipped to the
    image; the returned effective lambda is 1 - patch_area / (H*W) after clipping.
    """
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    _check_pair(a, b)
    h, w = a.image.shape[:2]
    rect = cutmix_rect(h, w, lam, rng, center)
    image = a.image.copy()
    image[rect.y0:rect.y1, rect.x0:rect.x1] = b.image[rect.y0:rect.y1, rect.x0:rect.x1]
    lam_hat = 1.0 - rect.area / (h * w)
    out = Sample(image, mix_labels(a.label, b.label, lam_hat, mode), _mixed_source(a, b, lam_hat))
    return out, rect, lam_hat


def cutout(img: np.ndarray, rng: RngStream, hole_size: int, fill: float = CUTOUT_FILL,
           corner=None) -> np.ndarray:
    """Blank one hole_size x hole_size square placed fully inside the image."""
    h, w = img.shape[:2]
    if not 0 <= hole_size <= min(h, w):
        raise ConfigError(f"hole_size must lie in [0, {min(h, w)}], got {hole_size}")
    out = img.copy()
    if hole_size == 0:
        return out
    if corner is None:
        y0 = int(rng.integers(h - hole_size + 1))
        x0 = int(rng.integers(w - hole_size + 1))
    else:
        y0, x0 = corner
    out[y0:y0 + hole_size, x0:x0 + hole_size] = fill
    return out


def hflip(img: np.ndarray) -> np.ndarray:
    return img[:, ::-1].copy()


def color_jitter(img: np.ndarray, rng: RngStream, strength: float) -> np.ndarray:
    if strength == 0:
        return img.copy()
    factors = rng.uniform(1.0 - strength, 1.0 + strength, size=img.shape[-1])
    return np.clip(img * factors, 0.0, 1.0)


def random_crop(img: np.ndarray, rng: RngStream, scale: float) -> np.ndarray:
    """Crop `scale` of the area (same aspect ratio) and resize back."""
    h, w = img.shape[:2]
    side = np.sqrt(scale)
    ch = max(1, int(np.round(h * side)))
    cw = max(1, int(np.round(w * side)))
    if (ch, cw) == (h, w):
        return img.copy()
    y0 = int(rng.integers(h - ch + 1))
    x0 = int(rng.integers(w - cw + 1))
    return resize_bilinear(img[y0:y0 + ch, x0:x0 + cw], h, w)


@dataclass(frozen=True)
class AugmentConfig:
    flip_p: float = 0.5
    jitter_strength: float = 0.2
    crop_scale: float = 0.85
    cutout_size: int = 0
    cutout_p: float = 0.5

    def __post_init__(self):
        if not 0 <= self.flip_p <= 1:
            raise ConfigError("flip_p must lie in [0, 1]")
        if not 0 < self.crop_scale <= 1:
            raise ConfigError("crop_scale must lie in (0, 1]")
        if self.jitter_strength < 0:
            raise ConfigError("jitter_strength must be >= 0")
        if self.cutout_size < 0 or not 0 <= self.cutout_p <= 1:
            raise ConfigError("cutout_size must be >= 0 and cutout_p in [0, 1]")

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(flip_p=0.0, jitter_strength=0.0, crop_scale=1.0, cutout_size=0)


def basic_augment(sample: Sample, rng: RngStream, config: AugmentConfig) -> Sample:
    """Single-expression augmentations: crop, flip, colour jitter, optional cutout."""
    img = sample.image
    if config.crop_scale < 1:
        img = random_crop(img, rng.sub("crop"), config.crop_scale)
    if config.flip_p > 0 and rng.sub("flip").random() < config.flip_p:
        img = hflip(img)
    if config.jitter_strength > 0:
        img = color_jitter(img, rng.sub("jitter"), config.jitter_strength)
    if config.cutout_size > 0 and rng.sub("cutout-gate").random() < config.cutout_p:
        size = min(config.cutout_size, *img.shape[:2])
        img = cutout(img, rng.sub("cutout"), size)
    if img is sample.image:
        img = img.copy()
    return replace(sample, image=img)
