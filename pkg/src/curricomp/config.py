"""JSON run configuration.

Precedence: built-in defaults < config file < command-line flags.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path

from .augment import AugmentConfig, MixMode
from .curriculum import CompoundSource, CurriculumSchedule, SynthesisConfig
from .errors import ConfigError
from .nn import ModelSpec
from .optim import OptimizerConfig

DEFAULTS: dict = {
    "seed": 0,
    "resolution": 32,
    "channels": 3,
    "model": {"hidden": [128, 64], "layers": None},
    "optimizer": {"kind": "adam", "learning_rate": 1e-3, "momentum": 0.9, "beta1": 0.9,
                  "beta2": 0.999, "eps": 1e-8, "weight_decay": 0.0},
    "batch_size": 64,
    "batches_per_epoch": None,
    "epoch_dis": [5, 5, 3, 3],
    "compound_prop": [0.0, 0.2, 0.4, 1.0],
    "mixup": {"enabled": True, "lambda": 0.1, "alpha": None},
    "cutmix": {"enabled": True, "range": [0.1, 0.9]},
    "mix_mode": "union",
    "restrict_to_catalog": True,
    "compound_source": None,
    "augment": {"flip_p": 0.5, "jitter_strength": 0.2, "crop_scale": 0.85,
                "cutout_size": 8, "cutout_p": 0.5},
    "reset_optimizer_on_stage": False,
    "data": {
        "train_manifest": None,
        "image_root": None,
        "natural_manifest": None,
        "val_manifest": None,
        "val_fraction": 0.2,
        "val_per_class": 50,
        "synthetic": {"n_per_class": 200, "natural_per_class": 0, "noise_sigma": 0.1},
    },
    "output_dir": "runs/default",
    "threads": 1,
    "figures": True,
}


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


class RunConfig:
    """Validated view over the nested config dict."""

    def __init__(self, raw: dict | None = None):
        self.raw = _merge(DEFAULTS, raw or {})
        self._validate()

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls(raw)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        return RunConfig(_merge(self.raw, overrides))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def __getitem__(self, key):
        return self.raw[key]

    def _validate(self):
        r = self.raw
        if len(r["epoch_dis"]) != len(r["compound_prop"]):
            raise ConfigError(
                f"epoch_dis has {len(r['epoch_dis'])} entries but compound_prop has {len(r['compound_prop'])}"
            )
        if r["batch_size"] < 1:
            raise ConfigError("batch_size must be >= 1")
        if r["threads"] < 1:
            raise ConfigError("threads must be >= 1")
        # building each piece runs its own checks
        self.schedule, self.model_spec().require_hidden(), self.optimizer, self.augment, self.synthesis
        for key in ("train_manifest", "natural_manifest", "val_manifest", "image_root"):
            value = r["data"][key]
            if value is not None and not Path(value).exists():
                raise ConfigError(f"data.{key} does not exist: {value}")
        if r["data"]["train_manifest"] is None and r["data"]["synthetic"]["n_per_class"] < 1:
            raise ConfigError("data.synthetic.n_per_class must be >= 1")

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def schedule(self) -> CurriculumSchedule:
        return CurriculumSchedule.from_arrays(self.raw["epoch_dis"], self.raw["compound_prop"])

    def model_spec(self) -> ModelSpec:
        res = self.raw["resolution"]
        dims = (res, res, self.raw["channels"])
        model = self.raw["model"]
        if model.get("layers"):
            return ModelSpec.from_dict({"input_dims": dims, "layers": model["layers"]})
        return ModelSpec.mlp(dims, model.get("hidden", [128, 64]))

    @property
    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(**self.raw["optimizer"])

    @property
    def augment(self) -> AugmentConfig:
        return AugmentConfig(**self.raw["augment"])

    @property
    def synthesis(self) -> SynthesisConfig:
        r = self.raw
        return SynthesisConfig(
            mode=MixMode(r["mix_mode"]),
            mixup_lambda=r["mixup"]["lambda"],
            mixup_alpha=r["mixup"]["alpha"],
            cutmix_range=tuple(r["cutmix"]["range"]),
            restrict_to_catalog=r["restrict_to_catalog"],
        )

    def compound_source(self, has_natural: bool) -> CompoundSource:
        explicit = self.raw["compound_source"]
        if explicit is not None:
            return CompoundSource(**explicit)
        return CompoundSource.default(self.raw["mixup"]["enabled"], self.raw["cutmix"]["enabled"], has_natural)

    def fingerprint_dict(self) -> dict:
        """Config content that affects results (output location and threading excluded)."""
        d = self.to_dict()
        for key in ("output_dir", "threads", "figures"):
            d.pop(key)
        return d
