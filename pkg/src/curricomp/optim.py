from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .nn import ModelState


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"optimizer kind must be sgd or adam, got {self.kind!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        for name in ("momentum", "beta1", "beta2"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {v}")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def init_slots(state: ModelState, opt: OptimizerConfig) -> dict[str, list[np.ndarray]]:
    zeros = [np.zeros_like(p) for p in state.params()]
    if opt.kind == "sgd":
        return {"velocity": zeros}
    return {"m": zeros, "v": [z.copy() for z in zeros]}


def step(state: ModelState, gradients: ModelState, opt: OptimizerConfig, t: int,
         slots: dict | None = None) -> tuple[ModelState, dict]:
    """One optimizer update. Returns the new state and the slot buffers.

    SGD:  buf = momentum*buf + (g + wd*w);  w -= lr*buf
    Adam: L2 weight decay folded into g, bias-corrected moments.

    Slot buffers are updated in place; parameters are never mutated.
    """
    params = state.params()
    grads = gradients.params()
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ConfigError("gradient shapes do not match model state")
    if slots is None:
        slots = init_slots(state, opt)
    lr, wd = opt.learning_rate, opt.weight_decay
    new_params = []

    if opt.kind == "sgd":
        for p, g, buf in zip(params, grads, slots["velocity"]):
            d = g + wd * p if wd else g
            if opt.momentum:
                buf *= opt.momentum
                buf += d
            else:
                buf[...] = d
            new_params.append(p - lr * buf)
    else:
        if t < 1:
            raise ConfigError("adam step index t must be >= 1")
        c1 = 1.0 - opt.beta1 ** t
        c2 = 1.0 - opt.beta2 ** t
        for p, g, m, v in zip(params, grads, slots["m"], slots["v"]):
            d = g + wd * p if wd else g
            m *= opt.beta1
            m += (1.0 - opt.beta1) * d
            v *= opt.beta2
            v += (1.0 - opt.beta2) * (d * d)
            denom = np.sqrt(v / c2)
            denom += opt.eps
            update = m / denom
            update *= lr / c1
            new_params.append(p - update)
    return ModelState.from_params(new_params), slots
