"""Ablation sweeps over schedules and augmentation switches."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .config import RunConfig
from .curriculum import format_list
from .errors import ConfigError
from .train import prepare_data, train

log = logging.getLogger(__name__)

SWEEP_HEADER = ("exp", "epoch_dis", "compound_prop", "mixup", "cutmix", "macro_f1")
RUNS_HEADER = ("exp", "seed", "epoch_dis", "compound_prop", "mixup", "cutmix",
               "macro_f1", "best_macro_f1", "error")
PRESETS = ("table1", "table2")


@dataclass(frozen=True)
class Experiment:
    exp: int | str
    epoch_dis: tuple[int, ...]
    compound_prop: tuple[float, ...]
    mixup: bool = True
    cutmix: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "Experiment":
        unknown = set(d) - {"exp", "epoch_dis", "compound_prop", "mixup", "cutmix"}
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(d["exp"], tuple(d["epoch_dis"]), tuple(float(p) for p in d["compound_prop"]),
                   bool(d.get("mixup", True)), bool(d.get("cutmix", True)))

    def overrides(self, seed: int) -> dict:
        return {
            "seed": seed,
            "epoch_dis": list(self.epoch_dis),
            "compound_prop": list(self.compound_prop),
            "mixup": {"enabled": self.mixup},
            "cutmix": {"enabled": self.cutmix},
        }


@dataclass
class SweepSpec:
    name: str
    experiments: list[Experiment]
    seeds: list[int]
    base: dict

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        exps = [Experiment.from_dict(e) for e in d.get("experiments", [])]
        if not exps:
            raise ConfigError("sweep needs at least one experiment")
        seeds = [int(s) for s in d.get("seeds", [0])]
        if not seeds:
            raise ConfigError("sweep needs at least one seed")
        return cls(d.get("name", "sweep"), exps, seeds, d.get("base", {}))

    @classmethod
    def load(cls, path_or_preset) -> "SweepSpec":
        name = str(path_or_preset)
        if name in PRESETS:
            text = resources.files("curricomp.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
        else:
            try:
                text = Path(name).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read sweep config {name}: {exc}") from exc
        return cls.from_dict(json.loads(text))


@dataclass
class RunRow:
    exp: int | str
    seed: int
    epoch_dis: str
    compound_prop: str
    mixup: bool
    cutmix: bool
    macro_f1: float
    best_macro_f1: float
    error: str = ""


def _flag(v: bool) -> str:
    return "yes" if v else "no"


def summarize(runs: list[RunRow]) -> list[dict]:
    """Mean final macro-F1 per experiment over its successful seeds."""
    out, order = {}, []
    for r in runs:
        if r.exp not in out:
            order.append(r.exp)
            out[r.exp] = {"exp": r.exp, "epoch_dis": r.epoch_dis, "compound_prop": r.compound_prop,
                          "mixup": _flag(r.mixup), "cutmix": _flag(r.cutmix), "scores": []}
        if not r.error:
            out[r.exp]["scores"].append(r.macro_f1)
    rows = []
    for exp in order:
        row = out[exp]
        scores = row.pop("scores")
        row["macro_f1"] = math.fsum(scores) / len(scores) if scores else float("nan")
        rows.append(row)
    return rows


def run_sweep(spec: SweepSpec, base: RunConfig | None = None, out_dir="runs/sweep",
              figures: bool = True) -> tuple[list[dict], list[RunRow]]:
    """Train one model per (experiment, seed); failures are recorded and skipped."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = (base or RunConfig()).with_overrides(spec.base)
    runs: list[RunRow] = []
    for seed in spec.seeds:
        seeded = base.with_overrides({"seed": seed})
        pools, val = prepare_data(seeded)
        for e in spec.experiments:
            row = RunRow(e.exp, seed, format_list(e.epoch_dis), format_list(e.compound_prop),
                         e.mixup, e.cutmix, float("nan"), float("nan"))
            try:
                cfg = base.with_overrides(e.overrides(seed))
                result = train(cfg, pools, val, out_dir=out / f"exp{e.exp}_seed{seed}")
                row.macro_f1 = result.log[-1].val_macro_f1
                row.best_macro_f1 = result.best_macro_f1
            except Exception as exc:  # noqa: BLE001 - one bad row must not sink the sweep
                log.error("exp %s seed %s failed: %s", e.exp, seed, exc)
                row.error = f"{type(exc).__name__}: {exc}"
            log.info("exp %s seed %s macro-F1 %.4f", e.exp, seed, row.macro_f1)
            runs.append(row)
    summary = summarize(runs)
    write_sweep_csv(out / "sweep.csv", summary)
    write_runs_csv(out / "sweep_runs.csv", runs)
    if figures:
        from .report import plot_sweep
        plot_sweep(summary, runs, out / "sweep.png", title=spec.name)
    return summary, runs


def write_sweep_csv(path, summary: list[dict]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for row in summary:
            w.writerow([row["exp"], row["epoch_dis"], row["compound_prop"], row["mixup"],
                        row["cutmix"], f"{row['macro_f1']:.4f}"])


def write_runs_csv(path, runs: list[RunRow]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUNS_HEADER)
        for r in runs:
            w.writerow([r.exp, r.seed, r.epoch_dis, r.compound_prop, _flag(r.mixup), _flag(r.cutmix),
                        f"{r.macro_f1:.4f}", f"{r.best_macro_f1:.4f}", r.error])
