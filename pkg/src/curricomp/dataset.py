"""Samples, manifest ingestion, splitting and the procedural glyph generator."""
from __future__ import annotations

import csv
import enum
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imageio
from .errors import ConfigError, IngestionError
from .rng import RngStream
from .taxonomy import BASIC_NAMES, CATALOG, MANIFEST_COLUMNS, BasicClass

log = logging.getLogger(__name__)


class Source(str, enum.Enum):
    BASIC = "basic"
    NATURAL_COMPOUND = "natural_compound"
    SYNTHESIZED_COMPOUND = "synthesized_compound"


@dataclass(frozen=True, eq=False)
class Sample:
    image: np.ndarray
    label: np.ndarray
    source: Source = Source.BASIC
    neutral: float = 0.0
    path: str | None = None

    @property
    def dominant(self) -> int:
        return int(np.argmax(self.label))

    @property
    def support(self) -> frozenset:
        return frozenset(int(i) for i in np.flatnonzero(self.label > 0))


def one_hot(cls: int) -> np.ndarray:
    y = np.zeros(len(BasicClass))
    y[int(cls)] = 1.0
    return y


def stack(samples) -> tuple[np.ndarray, np.ndarray]:
    images = np.stack([s.image for s in samples])
    labels = np.stack([s.label for s in samples])
    return images, labels


def _resolution(res) -> tuple[int, int]:
    if isinstance(res, int):
        return res, res
    h, w = res
    return int(h), int(w)


# --- manifest ingestion ----------------------------------------------------

def _parse_row(row, rownum):
    if len(row) != len(MANIFEST_COLUMNS):
        raise IngestionError(f"expected {len(MANIFEST_COLUMNS)} cells, found {len(row)}", row=rownum)
    rel = row[0].strip()
    if not rel:
        raise IngestionError("empty path", row=rownum)
    try:
        values = np.array([float(v) for v in row[1:]])
    except ValueError as exc:
        raise IngestionError(f"non-numeric label cell ({exc})", row=rownum) from None
    if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
        raise IngestionError("label values must lie in [0, 1]", row=rownum)
    if not np.any(values > 0):
        raise IngestionError("row has no positive label", row=rownum)
    return rel, values[:6], float(values[6])


def _load_row(args):
    rownum, rel, label, neutral, root, size = args
    try:
        img = imageio.read_image(root / rel)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read image {rel!r}: {exc}", row=rownum) from exc
    img = imageio.resize_bilinear(img, *size)
    nonzero = int(np.count_nonzero(label))
    source = Source.NATURAL_COMPOUND if nonzero >= 2 else Source.BASIC
    return Sample(img, label, source, neutral, rel)


def load_manifest(path, image_root=None, resolution=32, threads: int = 1) -> list[Sample]:
    """Read a label manifest CSV; images are decoded, resized and scaled to [0, 1].

    Row numbers in errors count data rows from 1 (the header is not counted).
    """
    path = Path(path)
    root = Path(image_root) if image_root is not None else path.parent
    size = _resolution(resolution)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open manifest {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise IngestionError(f"manifest header must be {','.join(MANIFEST_COLUMNS)}")
        jobs = []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            rel, label, neutral = _parse_row(row, rownum)
            jobs.append((rownum, rel, label, neutral, root, size))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_load_row, jobs))
    return [_load_row(job) for job in jobs]


def write_manifest(path, samples, image_root=None, names=None) -> Path:
    """Write samples as PPM files plus a manifest. Images are quantized to 8 bits."""
    path = Path(path)
    root = Path(image_root) if image_root is not None else path.parent
    rows = []
    for i, s in enumerate(samples):
        rel = names[i] if names is not None else (s.path or f"images/{i:05d}.ppm")
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        imageio.write_ppm(target, s.image)
        rows.append([rel] + [_fmt(v) for v in s.label] + [_fmt(s.neutral)])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)
    return path


def _fmt(v: float) -> str:
    return repr(float(v)) if v not in (0.0, 1.0) else str(int(v))


def filter_neutral(samples) -> list[Sample]:
    return [s for s in samples if not s.neutral > 0]


# --- splitting --------------------------------------------------------------

@dataclass
class DatasetSplit:
    train: list[Sample]
    val: list[Sample]
    seed: int
    train_index: list[int] = field(default_factory=list)
    val_index: list[int] = field(default_factory=list)


def split(samples, val_fraction: float, seed: int) -> DatasetSplit:
    """Stratified train/val split keyed on each sample's dominant class."""
    if not 0 < val_fraction < 1:
        raise ConfigError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    samples = list(samples)
    rng = np.random.default_rng(seed)
    groups: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        groups.setdefault(s.dominant, []).append(i)
    val_idx: list[int] = []
    if any(len(g) < 2 for g in groups.values()):
        warnings.warn("a class has fewer than 2 samples; falling back to an unstratified split",
                      stacklevel=2)
        order = rng.permutation(len(samples))
        n_val = int(round(len(samples) * val_fraction))
        val_idx = order[:n_val].tolist()
    else:
        for cls in sorted(groups):
            idx = groups[cls]
            n_val = int(round(len(idx) * val_fraction))
            n_val = min(max(n_val, 1), len(idx) - 1)
            val_idx += [idx[j] for j in rng.permutation(len(idx))[:n_val]]
    val_set = set(val_idx)
    train_index = [i for i in range(len(samples)) if i not in val_set]
    val_index = sorted(val_set)
    return DatasetSplit([samples[i] for i in train_index], [samples[i] for i in val_index],
                        seed, train_index, val_index)


# --- procedural glyphs ------------------------------------------------------

# one oriented grating family per basic class: (angle in degrees, cycles per image)
GLYPHS = {
    BasicClass.ANGER: (0.0, 2.0),
    BasicClass.DISGUST: (30.0, 3.0),
    BasicClass.FEAR: (60.0, 2.5),
    BasicClass.HAPPINESS: (90.0, 3.5),
    BasicClass.SADNESS: (120.0, 2.0),
    BasicClass.SURPRISE: (150.0, 4.0),
}


@dataclass(frozen=True)
class GlyphConfig:
    n_per_class: int = 200
    resolution: int = 32
    noise_sigma: float = 0.1
    seed: int = 0
    amplitude: tuple[float, float] = (0.3, 0.4)
    angle_jitter: float = 4.0
    phase_jitter: float = 0.5
    blend_range: tuple[float, float] = (0.15, 0.85)

    def __post_init__(self):
        if self.resolution < 16:
            raise ConfigError("resolution must be >= 16")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.n_per_class < 0:
            raise ConfigError("n_per_class must be >= 0")


def _grating(cls: int, cfg: GlyphConfig, rng: RngStream) -> np.ndarray:
    """Zero-mean grating pattern (H, W) for one class with seeded jitter."""
    angle, cycles = GLYPHS[BasicClass(cls)]
    theta = np.deg2rad(angle + rng.uniform(-cfg.angle_jitter, cfg.angle_jitter))
    phase = rng.uniform(-cfg.phase_jitter, cfg.phase_jitter)
    amp = rng.uniform(*cfg.amplitude)
    n = cfg.resolution
    coords = (np.arange(n) + 0.5) / n - 0.5
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    u = xx * np.cos(theta) + yy * np.sin(theta)
    return amp * np.cos(2 * np.pi * cycles * u + phase)


def _finish(pattern: np.ndarray, cfg: GlyphConfig, rng: RngStream) -> np.ndarray:
    img = np.repeat((0.5 + pattern)[:, :, None], 3, axis=2)
    if cfg.noise_sigma > 0:
        img = img + rng.normal(0.0, cfg.noise_sigma, size=img.shape)
    return imageio.quantize(np.clip(img, 0.0, 1.0))


def render_glyph(cls: int, cfg: GlyphConfig, rng: RngStream) -> np.ndarray:
    return _finish(_grating(cls, cfg, rng.sub("shape")), cfg, rng.sub("noise"))


def render_compound_glyph(classes, cfg: GlyphConfig, rng: RngStream) -> np.ndarray:
    a, b = classes
    w = rng.sub("weight").uniform(*cfg.blend_range)
    pattern = w * _grating(a, cfg, rng.sub("shape-a")) + (1 - w) * _grating(b, cfg, rng.sub("shape-b"))
    return _finish(pattern, cfg, rng.sub("noise"))


def generate_synthetic(config: GlyphConfig | None = None, out_dir=None, **kwargs) -> list[Sample]:
    """One-hot glyph samples, n_per_class per basic class, in class-major order.

    When out_dir is given, PPM files and ``manifest.csv`` are written there.
    """
    cfg = config or GlyphConfig(**kwargs)
    root = RngStream(cfg.seed).sub("basic")
    samples = []
    for cls in BasicClass:
        for i in range(cfg.n_per_class):
            img = render_glyph(cls, cfg, root.child(int(cls), i))
            samples.append(Sample(img, one_hot(cls), Source.BASIC, 0.0,
                                  f"images/basic/{cls.label}_{i:04d}.ppm"))
    if out_dir is not None:
        write_manifest(Path(out_dir) / "manifest.csv", samples)
    return samples


def generate_compound_glyphs(n_per_compound: int, config: GlyphConfig | None = None,
                             catalog=CATALOG, tag="compound", out_dir=None,
                             manifest_name="compound_manifest.csv") -> list[Sample]:
    """Two-grating blends labelled with both constituents, one block per catalog entry."""
    cfg = config or GlyphConfig()
    root = RngStream(cfg.seed).sub(tag)
    samples = []
    for k, entry in enumerate(catalog):
        for i in range(n_per_compound):
            rng = root.child(k, i)
            pair = list(entry.indices)
            if rng.sub("order").random() < 0.5:
                pair.reverse()
            img = render_compound_glyph(pair, cfg, rng)
            label = np.zeros(len(BasicClass))
            label[list(entry.indices)] = 1.0
            samples.append(Sample(img, label, Source.NATURAL_COMPOUND, 0.0,
                                  f"images/{tag}/{entry.name}_{i:04d}.ppm"))
    if out_dir is not None:
        write_manifest(Path(out_dir) / manifest_name, samples)
    return samples


def class_counts(samples) -> dict[str, int]:
    counts = {name: 0 for name in BASIC_NAMES}
    for s in samples:
        counts[BASIC_NAMES[s.dominant]] += 1
    return counts
