"""Curriculum training loop over the staged batch stream."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds
from .augment import basic_augment
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig
from .curriculum import CompoundSource, Pools, batches_per_epoch, stage_iterator
from .dataset import Sample, Source
from .errors import ConfigError, DivergenceError, NumericError, PoolError
from .metrics import Metrics, bce_loss, evaluate
from .nn import ModelSpec, ModelState, backward_parallel, forward, forward_backward, init_state
from .optim import init_slots, step
from .rng import RngStream
from .taxonomy import CATALOG

log = logging.getLogger(__name__)

TRAINLOG = "trainlog.jsonl"
TIMING = "timing.jsonl"
LAST = "last.ckpt"
BEST = "best.ckpt"


@dataclass
class EpochRecord:
    epoch: int
    stage: int
    compound_proportion: float
    mean_loss: float
    val_macro_f1: float
    wall_time: float = 0.0

    def log_dict(self) -> dict:
        # wall time lives in a separate file so the log itself stays reproducible
        d = asdict(self)
        d.pop("wall_time")
        return d


@dataclass
class TrainResult:
    spec: ModelSpec
    state: ModelState
    log: list[EpochRecord]
    best_macro_f1: float
    best_epoch: int
    final_metrics: Metrics | None = None
    checkpoints: dict[str, Path] = field(default_factory=dict)


def synthetic_eval_set(val_basic, n_per_compound: int, seed: int, catalog=CATALOG) -> list[Sample]:
    """50/50 mixup blends of held-out basic samples, one block per catalog entry."""
    from .augment import MixMode, mixup

    pools = Pools(val_basic)
    rng = RngStream(seed).sub("eval-blend")
    out = []
    for k, entry in enumerate(catalog):
        a_cls, b_cls = entry.indices
        if a_cls not in pools.by_class or b_cls not in pools.by_class:
            continue
        for i in range(n_per_compound):
            r = rng.child(k, i)
            a = pools.basic[pools.by_class[a_cls][int(r.integers(len(pools.by_class[a_cls])))]]
            b = pools.basic[pools.by_class[b_cls][int(r.integers(len(pools.by_class[b_cls])))]]
            out.append(mixup(a, b, 0.5, MixMode.UNION))
    return out


def prepare_data(config: RunConfig) -> tuple[Pools, list[Sample]]:
    """Training pools and a compound validation set, from manifests or the glyph generator."""
    d = config["data"]
    res = config["resolution"]
    seed = config.seed
    threads = config["threads"]
    natural: list[Sample] = []
    if d["train_manifest"]:
        loaded = ds.filter_neutral(ds.load_manifest(d["train_manifest"], d["image_root"], res, threads))
        basic = [s for s in loaded if s.source is Source.BASIC]
        natural = [s for s in loaded if s.source is not Source.BASIC]
    else:
        syn = d["synthetic"]
        gcfg = ds.GlyphConfig(n_per_class=syn["n_per_class"], resolution=res,
                              noise_sigma=syn["noise_sigma"], seed=seed)
        basic = ds.generate_synthetic(gcfg)
        if syn["natural_per_class"]:
            natural = ds.generate_compound_glyphs(syn["natural_per_class"], gcfg, tag="natural")
    if d["natural_manifest"]:
        extra = ds.filter_neutral(ds.load_manifest(d["natural_manifest"], d["image_root"], res, threads))
        natural += [s for s in extra if s.source is not Source.BASIC]
    if not basic:
        raise PoolError("basic training pool is empty (after neutral filtering)")

    if d["val_manifest"]:
        val = ds.filter_neutral(ds.load_manifest(d["val_manifest"], d["image_root"], res, threads))
    elif d["train_manifest"]:
        parts = ds.split(basic, d["val_fraction"], seed)
        basic = parts.train
        val = synthetic_eval_set(parts.val, d["val_per_class"], seed)
    else:
        gcfg = ds.GlyphConfig(n_per_class=0, resolution=res,
                              noise_sigma=d["synthetic"]["noise_sigma"], seed=seed)
        val = ds.generate_compound_glyphs(d["val_per_class"], gcfg, tag="val")
    if not val:
        raise PoolError("validation set is empty")
    return Pools(basic, natural), val


def _augment_batch(samples, rng: RngStream, aug) -> list[Sample]:
    return [basic_augment(s, rng.child(j), aug) if s.source is Source.BASIC else s
            for j, s in enumerate(samples)]


def _ckpt_meta(config: RunConfig, epoch, t, best, best_epoch) -> dict:
    return {"epoch": epoch, "step": t, "best_macro_f1": best, "best_epoch": best_epoch,
            "config": config.fingerprint_dict()}


def train(config: RunConfig, pools: Pools | None = None, val_set=None, out_dir=None,
          resume=None, schedule=None, stop_after: int | None = None) -> TrainResult:
    """Train one model through the curriculum.

    ``stop_after`` ends the run after that epoch (the checkpoint can be resumed).
    Writes ``last.ckpt`` every epoch, ``best.ckpt`` whenever validation macro-F1
    improves, and one JSON line per epoch to ``trainlog.jsonl``.
    """
    if pools is None or val_set is None:
        pools, val_set = prepare_data(config)
    if not pools.basic:
        raise PoolError("basic training pool is empty")
    schedule = schedule or config.schedule
    spec = config.model_spec()
    opt = config.optimizer
    aug = config.augment
    synth = config.synthesis
    threads = config["threads"]
    batch_size = config["batch_size"]
    per_epoch = config["batches_per_epoch"] or batches_per_epoch(len(pools.basic), batch_size)
    needs_compounds = any(s.compound_proportion > 0 for s in schedule.stages)
    source = config.compound_source(bool(pools.natural)) if needs_compounds else CompoundSource()

    out = Path(out_dir if out_dir is not None else config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    root = RngStream(config.seed)

    state = init_state(spec, root.sub("init").generator)
    slots = init_slots(state, opt)
    t = 0
    best, best_epoch = -1.0, 0
    records: list[EpochRecord] = []
    start_epoch = 1
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt.spec != spec:
            raise ConfigError("checkpoint model spec does not match the config")
        state = ckpt.state
        slots = ckpt.slots or init_slots(state, opt)
        t = int(ckpt.meta["step"])
        best, best_epoch = float(ckpt.meta["best_macro_f1"]), int(ckpt.meta["best_epoch"])
        start_epoch = int(ckpt.meta["epoch"]) + 1
        records = [r for r in read_trainlog(out / TRAINLOG) if r.epoch < start_epoch]
        log.info("resuming from epoch %d (step %d)", start_epoch, t)

    logfile = open(out / TRAINLOG, "w", encoding="utf-8")
    timefile = open(out / TIMING, "a" if resume is not None else "w", encoding="utf-8")
    for r in records:
        logfile.write(json.dumps(r.log_dict()) + "\n")
    paths = {"last": out / LAST}

    def close_epoch(epoch, stage, prop, losses, started):
        nonlocal best, best_epoch
        metrics = evaluate(spec, state, val_set, threads=threads)
        rec = EpochRecord(epoch, stage, prop, float(math.fsum(losses) / len(losses)),
                          metrics.macro_f1, time.perf_counter() - started)
        records.append(rec)
        logfile.write(json.dumps(rec.log_dict()) + "\n")
        logfile.flush()
        timefile.write(json.dumps({"epoch": epoch, "wall_time": rec.wall_time}) + "\n")
        timefile.flush()
        if metrics.macro_f1 > best:
            best, best_epoch = metrics.macro_f1, epoch
            paths["best"] = save_checkpoint(out / BEST, Checkpoint(
                spec, state, _ckpt_meta(config, epoch, t, best, best_epoch)))
        save_checkpoint(out / LAST, Checkpoint(spec, state, _ckpt_meta(config, epoch, t, best, best_epoch), slots))
        log.info("epoch %d stage %d p=%.2f loss %.4f val macro-F1 %.4f",
                 epoch, stage, prop, rec.mean_loss, rec.val_macro_f1)
        return metrics

    metrics = None
    current = None  # (epoch, stage, proportion)
    losses: list[float] = []
    started = time.perf_counter()
    try:
        for item in stage_iterator(schedule, pools, batch_size, per_epoch, root.sub("stream"),
                                   compound_source=source, synthesis=synth,
                                   start_epoch=start_epoch, threads=threads):
            if current is not None and item.epoch != current[0]:
                metrics = close_epoch(*current, losses, started)
                if stop_after is not None and current[0] >= stop_after:
                    current = None
                    break
                losses, started = [], time.perf_counter()
                if config["reset_optimizer_on_stage"] and item.stage != current[1]:
                    slots = init_slots(state, opt)
            current = (item.epoch, item.stage, item.compound_proportion)
            batch = _augment_batch(item.samples, root.sub("augment").child(item.epoch, item.batch_index), aug)
            images, labels = ds.stack(batch)
            try:
                if threads > 1:
                    grads = backward_parallel(spec, state, images, labels, threads)
                    probs = forward(spec, state, images)
                else:
                    probs, grads = forward_backward(spec, state, images, labels)
            except NumericError as exc:
                raise DivergenceError(str(exc), epoch=item.epoch, batch=item.batch_index) from exc
            loss = bce_loss(probs, labels)
            if not np.isfinite(loss):
                raise DivergenceError("non-finite loss", epoch=item.epoch, batch=item.batch_index)
            t += 1
            state, slots = step(state, grads, opt, t, slots)
            if not all(np.all(np.isfinite(p)) for p in state.params()):
                raise DivergenceError("non-finite parameters after update", epoch=item.epoch, batch=item.batch_index)
            losses.append(loss)
        if current is not None:
            metrics = close_epoch(*current, losses, started)
    finally:
        logfile.close()
        timefile.close()
    if "best" not in paths and (out / BEST).exists():
        paths["best"] = out / BEST
    return TrainResult(spec, state, records, best, best_epoch, metrics, paths)


def read_trainlog(path) -> list[EpochRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(EpochRecord(**json.loads(line)))
    return out


def predict_basic(spec: ModelSpec, state: ModelState, image) -> np.ndarray:
    """Six basic-class probabilities for one (H, W, C) image or a (B, H, W, C) batch."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        return forward(spec, state, image[None])[0]
    return forward(spec, state, image)
