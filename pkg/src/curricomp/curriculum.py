"""Staged compound-proportion schedules and on-the-fly compound synthesis."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .augment import MixMode, cutmix, mixup
from .dataset import Sample, Source
from .errors import ConfigError, PoolError, SynthesisError
from .rng import as_stream
from .taxonomy import CATALOG


@dataclass(frozen=True)
class StageSpec:
    epochs: int
    compound_proportion: float

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError(f"stage epochs must be a positive integer, got {self.epochs}")
        if not 0.0 <= self.compound_proportion <= 1.0:
            raise ConfigError(f"compound proportion must lie in [0, 1], got {self.compound_proportion}")


@dataclass(frozen=True)
class CurriculumSchedule:
    stages: tuple[StageSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ConfigError("schedule must contain at least one stage")

    @classmethod
    def from_arrays(cls, epoch_dis: Sequence[int], compound_prop: Sequence[float]) -> "CurriculumSchedule":
        if len(epoch_dis) != len(compound_prop):
            raise ConfigError(
                f"epoch_dis has {len(epoch_dis)} entries but compound_prop has {len(compound_prop)}"
            )
        return cls(tuple(StageSpec(e, float(p)) for e, p in zip(epoch_dis, compound_prop)))

    @property
    def epoch_dis(self) -> list[int]:
        return [int(s.epochs) for s in self.stages]

    @property
    def compound_prop(self) -> list[float]:
        return [s.compound_proportion for s in self.stages]

    @property
    def total_epochs(self) -> int:
        return sum(self.epoch_dis)

    def __str__(self):
        return f"{format_list(self.epoch_dis)} / {format_list(self.compound_prop)}"


def format_list(values) -> str:
    """Bracketed list in ablation-table style, e.g. "[0, 0.2, 0.4, 1]"."""
    return "[" + ", ".join(f"{v:g}" for v in values) + "]"


DEFAULT_SCHEDULE = CurriculumSchedule.from_arrays([5, 5, 3, 3], [0.0, 0.2, 0.4, 1.0])

# curriculum ablation grid; row 1 trains on single-label data only
STOCK_SCHEDULES = {
    1: CurriculumSchedule.from_arrays([15], [0.0]),
    2: CurriculumSchedule.from_arrays([5, 15], [0.0, 1.0]),
    3: CurriculumSchedule.from_arrays([5, 5, 5], [0.0, 0.5, 1.0]),
    4: DEFAULT_SCHEDULE,
    5: CurriculumSchedule.from_arrays([5, 3, 3, 3, 3], [0.0, 0.2, 0.4, 0.6, 1.0]),
}


class PlanEntry(NamedTuple):
    epoch: int  # 1-based, global
    stage: int  # 1-based
    compound_proportion: float


def plan(schedule: CurriculumSchedule) -> list[PlanEntry]:
    if not isinstance(schedule, CurriculumSchedule):
        schedule = CurriculumSchedule(tuple(schedule))
    out = []
    epoch = 0
    for stage_idx, stage in enumerate(schedule.stages, start=1):
        for _ in range(int(stage.epochs)):
            epoch += 1
            out.append(PlanEntry(epoch, stage_idx, stage.compound_proportion))
    return out


def compound_count(proportion: float, batch_size: int) -> int:
    """round(p * B), halves rounded up."""
    return int(math.floor(proportion * batch_size + 0.5))


# --- compound sources -------------------------------------------------------

MIXUP, CUTMIX, NATURAL = "mixup", "cutmix", "natural"
_KINDS = (MIXUP, CUTMIX, NATURAL)


@dataclass(frozen=True)
class CompoundSource:
    mixup: float = 0.5
    cutmix: float = 0.5
    natural: float = 0.0

    def __post_init__(self):
        w = self.weights
        if min(w) < 0 or not math.isclose(sum(w), 1.0, abs_tol=1e-9):
            raise ConfigError(f"compound source weights must be >= 0 and sum to 1, got {w}")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.mixup, self.cutmix, self.natural)

    @classmethod
    def default(cls, mixup_enabled=True, cutmix_enabled=True, has_natural=False) -> "CompoundSource":
        synth = [k for k, on in ((MIXUP, mixup_enabled), (CUTMIX, cutmix_enabled)) if on]
        if not synth and not has_natural:
            raise ConfigError("no compound source: enable mixup/cutmix or supply a natural compound pool")
        weights = dict.fromkeys(_KINDS, 0.0)
        synth_share = 0.5 if has_natural and synth else 1.0
        if has_natural:
            weights[NATURAL] = 1.0 - synth_share if synth else 1.0
        for k in synth:
            weights[k] = synth_share / len(synth)
        return cls(weights[MIXUP], weights[CUTMIX], weights[NATURAL])


@dataclass(frozen=True)
class SynthesisConfig:
    mode: MixMode = MixMode.UNION
    mixup_lambda: float = 0.1
    mixup_alpha: float | None = None  # draw lambda ~ Beta(a, a) instead of the fixed weight
    cutmix_range: tuple[float, float] = (0.1, 0.9)
    restrict_to_catalog: bool = True
    randomize_order: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", MixMode(self.mode))
        lo, hi = self.cutmix_range
        if not 0 <= lo <= hi <= 1:
            raise ConfigError("cutmix_range must satisfy 0 <= lo <= hi <= 1")
        if not 0 <= self.mixup_lambda <= 1:
            raise ConfigError("mixup_lambda must lie in [0, 1]")
        if self.mixup_alpha is not None and self.mixup_alpha <= 0:
            raise ConfigError("mixup_alpha must be > 0")


class Pools:
    """Basic and natural-compound sample pools with a per-class index."""

    def __init__(self, basic: Sequence[Sample], natural: Sequence[Sample] = ()):
        self.basic = list(basic)
        self.natural = list(natural)
        self.by_class: dict[int, list[int]] = {}
        for i, s in enumerate(self.basic):
            self.by_class.setdefault(s.dominant, []).append(i)

    def available(self) -> set[int]:
        return set(self.by_class)


def _as_pools(pool) -> Pools:
    return pool if isinstance(pool, Pools) else Pools(pool)


def realizable_pairs(pools: Pools, catalog=CATALOG, restrict=True) -> list[tuple[int, int]]:
    have = pools.available()
    if restrict:
        return [e.indices for e in catalog if set(e.indices) <= have]
    return list(itertools.combinations(sorted(have), 2))


_CUTMIX_TRIES = 100


def synthesize_compound(basic_pool, catalog=CATALOG, method=MIXUP, mode=None,
                        rng=0, config: SynthesisConfig | None = None) -> Sample:
    """Blend one sample from each constituent class of a uniformly chosen compound.

    ``mode`` overrides ``config.mode`` when given.
    """
    pools = _as_pools(basic_pool)
    rng = as_stream(rng)
    cfg = config or SynthesisConfig()
    mode = MixMode(mode) if mode is not None else cfg.mode
    pairs = realizable_pairs(pools, catalog, cfg.restrict_to_catalog)
    if not pairs:
        raise SynthesisError("basic pool cannot realize any compound class")
    pair = list(pairs[int(rng.integers(len(pairs)))])
    if cfg.randomize_order and rng.random() < 0.5:
        pair.reverse()
    a_idx, b_idx = (pools.by_class[c] for c in pair)
    a = pools.basic[a_idx[int(rng.integers(len(a_idx)))]]
    b = pools.basic[b_idx[int(rng.integers(len(b_idx)))]]
    if method == MIXUP:
        lam = cfg.mixup_lambda if cfg.mixup_alpha is None else float(rng.beta(cfg.mixup_alpha, cfg.mixup_alpha))
        return mixup(a, b, lam, mode)
    if method == CUTMIX:
        # on tiny images the patch can cover all or none of the image; redraw so
        # both constituents stay visible
        for _ in range(_CUTMIX_TRIES):
            lam = float(rng.uniform(*cfg.cutmix_range))
            out, _, lam_hat = cutmix(a, b, lam, rng.sub("cutmix"), mode)
            if 0.0 < lam_hat < 1.0:
                return out
        raise SynthesisError("cutmix patch keeps covering all or none of the image")
    raise ConfigError(f"unknown synthesis method {method!r}")


def sample_batch(pools, compound_source: CompoundSource, proportion: float, batch_size: int,
                 rng, *, catalog=CATALOG, synthesis: SynthesisConfig | None = None,
                 threads: int = 1) -> list[Sample]:
    """Exactly round(p*B) compound samples and B - round(p*B) basic ones, shuffled.

    Basic and natural samples are drawn without replacement within the batch.
    Each synthesized slot uses its own sub-stream, so threading never changes
    the result.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    pools = _as_pools(pools)
    rng = as_stream(rng)
    synthesis = synthesis or SynthesisConfig()
    n_comp = compound_count(proportion, batch_size)
    n_basic = batch_size - n_comp
    if n_basic > len(pools.basic):
        raise PoolError(f"batch needs {n_basic} basic samples but the pool has {len(pools.basic)}")
    picks = rng.sub("basic").choice(len(pools.basic), size=n_basic, replace=False) if n_basic else []
    batch = [pools.basic[i] for i in picks]
    if n_comp:
        kinds = rng.sub("kinds").choice(len(_KINDS), size=n_comp, p=compound_source.weights)
        n_nat = int(np.sum(kinds == 2))
        if n_nat > len(pools.natural):
            raise PoolError(f"batch needs {n_nat} natural compound samples but the pool has {len(pools.natural)}")
        nat = iter(rng.sub("natural").choice(len(pools.natural), size=n_nat, replace=False)) if n_nat else iter(())
        slots = list(enumerate(kinds))

        def make(slot):
            j, kind = slot
            if kind == 2:
                return None
            return synthesize_compound(pools, catalog, _KINDS[kind], synthesis.mode,
                                       rng.child("slot", j), synthesis)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                made = list(ex.map(make, slots))
        else:
            made = [make(s) for s in slots]
        for (j, kind), s in zip(slots, made):
            batch.append(pools.natural[next(nat)] if kind == 2 else s)
    order = rng.sub("order").permutation(batch_size)
    return [batch[i] for i in order]


class BatchItem(NamedTuple):
    epoch: int
    stage: int
    compound_proportion: float
    batch_index: int
    samples: list


def batches_per_epoch(n_basic: int, batch_size: int) -> int:
    return max(1, math.ceil(n_basic / batch_size))


def stage_iterator(schedule: CurriculumSchedule, pools, batch_size: int, batches_per_epoch_=None,
                   rng=0, *, compound_source: CompoundSource | None = None, catalog=CATALOG,
                   synthesis: SynthesisConfig | None = None, start_epoch: int = 1,
                   threads: int = 1) -> Iterator[BatchItem]:
    """Yield (epoch, stage, proportion, batch index, samples) across the whole schedule.

    The stream for batch b of epoch e is derived from (seed, e, b), so resuming
    from a later epoch reproduces the same batches.
    """
    pools = _as_pools(pools)
    root = as_stream(rng)
    per_epoch = batches_per_epoch_ or batches_per_epoch(len(pools.basic), batch_size)
    source = compound_source or CompoundSource.default(has_natural=bool(pools.natural))
    for entry in plan(schedule):
        if entry.epoch < start_epoch:
            continue
        for b in range(per_epoch):
            samples = sample_batch(pools, source, entry.compound_proportion, batch_size,
                                   root.child("batch", entry.epoch, b), catalog=catalog,
                                   synthesis=synthesis, threads=threads)
            yield BatchItem(entry.epoch, entry.stage, entry.compound_proportion, b, samples)


def is_compound(sample: Sample) -> bool:
    return sample.source is not Source.BASIC
