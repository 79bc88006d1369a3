"""Small feed-forward classifier with hand-written backprop.

Images are flattened row-major (H, W, C) and pushed through a stack of
Dense / ReLU / Sigmoid layers. The network must end in Dense(num_classes)
followed by Sigmoid so every class gets an independent probability.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError

NUM_CLASSES = 6

DENSE = "dense"
RELU = "relu"
SIGMOID = "sigmoid"
_KINDS = (DENSE, RELU, SIGMOID)


@dataclass(frozen=True)
class Layer:
    kind: str
    units: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == DENSE and (self.units is None or self.units < 1):
            raise ConfigError("dense layer needs a positive unit count")
        if self.kind != DENSE and self.units is not None:
            raise ConfigError(f"{self.kind} layer takes no units")

    def to_dict(self) -> dict:
        if self.kind == DENSE:
            return {"kind": DENSE, "units": self.units}
        return {"kind": self.kind}


def Dense(units: int) -> Layer:
    return Layer(DENSE, units)


def ReLU() -> Layer:
    return Layer(RELU)


def Sigmoid() -> Layer:
    return Layer(SIGMOID)


@dataclass(frozen=True)
class ModelSpec:
    input_dims: tuple[int, int, int]
    layers: tuple[Layer, ...]
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.input_dims) != 3 or min(self.input_dims) < 1:
            raise ConfigError(f"input_dims must be (height, width, channels), got {self.input_dims}")
        if len(self.layers) < 2:
            raise ConfigError("model needs at least Dense(num_classes) + Sigmoid")
        last, head = self.layers[-1], self.layers[-2]
        if last.kind != SIGMOID or head.kind != DENSE or head.units != self.num_classes:
            raise ConfigError(
                f"model must end with Dense({self.num_classes}) followed by Sigmoid"
            )

    @classmethod
    def mlp(cls, input_dims, hidden=(128, 64), num_classes=NUM_CLASSES) -> "ModelSpec":
        layers = []
        for units in hidden:
            layers += [Dense(units), ReLU()]
        layers += [Dense(num_classes), Sigmoid()]
        return cls(tuple(input_dims), tuple(layers), num_classes)

    @property
    def input_size(self) -> int:
        h, w, c = self.input_dims
        return h * w * c

    @property
    def hidden_layers(self) -> int:
        return sum(1 for layer in self.layers if layer.kind == DENSE) - 1

    def require_hidden(self):
        if self.hidden_layers < 1:
            raise ConfigError("model needs at least one hidden layer")

    def dense_shapes(self) -> list[tuple[int, int]]:
        shapes, fan_in = [], self.input_size
        for layer in self.layers:
            if layer.kind == DENSE:
                shapes.append((fan_in, layer.units))
                fan_in = layer.units
        return shapes

    def num_params(self) -> int:
        return sum(i * o + o for i, o in self.dense_shapes())

    def to_dict(self) -> dict:
        return {
            "input_dims": list(self.input_dims),
            "layers": [layer.to_dict() for layer in self.layers],
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        layers = tuple(Layer(item["kind"], item.get("units")) for item in d["layers"])
        return cls(tuple(d["input_dims"]), layers, int(d.get("num_classes", NUM_CLASSES)))


@dataclass
class ModelState:
    """Weights (fan_in, fan_out) and biases (fan_out,) per Dense layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_params(cls, params) -> "ModelState":
        params = list(params)
        return cls(params[0::2], params[1::2])

    def copy(self) -> "ModelState":
        return ModelState([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def check(self, spec: ModelSpec):
        shapes = spec.dense_shapes()
        if len(shapes) != len(self.weights) or len(shapes) != len(self.biases):
            raise ConfigError("state layer count does not match spec")
        for k, ((fi, fo), w, b) in enumerate(zip(shapes, self.weights, self.biases)):
            if w.shape != (fi, fo) or b.shape != (fo,):
                raise ConfigError(f"dense layer {k}: expected {(fi, fo)}/{(fo,)}, got {w.shape}/{b.shape}")


HEAD_INIT_SCALE = 0.1


def init_state(spec: ModelSpec, seed: int | np.random.Generator,
               head_scale: float = HEAD_INIT_SCALE) -> ModelState:
    """Glorot-uniform weights, zero biases.

    The output layer's range is shrunk by ``head_scale`` so a fresh model
    predicts close to 0.5 even on uncentred [0, 1] inputs.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    shapes = spec.dense_shapes()
    for k, (fan_in, fan_out) in enumerate(shapes):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        if k == len(shapes) - 1:
            limit *= head_scale
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelState(weights, biases)


def zero_state(spec: ModelSpec) -> ModelState:
    shapes = spec.dense_shapes()
    return ModelState([np.zeros(s) for s in shapes], [np.zeros(s[1]) for s in shapes])


_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _flatten(spec: ModelSpec, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 4 or tuple(x.shape[1:]) != spec.input_dims:
        raise ConfigError(f"batch shape {x.shape} does not match (B, {', '.join(map(str, spec.input_dims))})")
    return x.reshape(x.shape[0], -1)


def _run(spec: ModelSpec, state: ModelState, x: np.ndarray):
    """Forward pass up to the head logits; returns logits and per-layer cache."""
    cache = []
    k = 0
    h = x
    for idx, layer in enumerate(spec.layers[:-1]):
        if layer.kind == DENSE:
            cache.append((layer.kind, h))
            h = h @ state.weights[k] + state.biases[k]
            k += 1
        elif layer.kind == RELU:
            cache.append((layer.kind, h))
            h = np.maximum(h, 0.0)
        else:
            h = sigmoid(h)
            cache.append((layer.kind, h))
        if not np.all(np.isfinite(h)):
            raise NumericError(f"non-finite activation after layer {idx} ({layer.kind})", layer=idx)
    return h, cache


def logits(spec: ModelSpec, state: ModelState, batch) -> np.ndarray:
    return _run(spec, state, _flatten(spec, batch))[0]


def forward(spec: ModelSpec, state: ModelState, batch) -> np.ndarray:
    """Class probabilities, shape (B, num_classes), strictly inside (0, 1)."""
    return np.clip(sigmoid(logits(spec, state, batch)), _P_LO, _P_HI)


def loss_from_logits(z: np.ndarray, labels: np.ndarray) -> float:
    """Mean over samples of summed binary cross-entropy, evaluated on logits.

    softplus(z) - y*z equals -[y log p + (1-y) log(1-p)] for p = sigmoid(z),
    without ever forming log(0).
    """
    per = np.logaddexp(0.0, z) - labels * z
    return float(per.sum(axis=1).mean())


def model_loss(spec: ModelSpec, state: ModelState, batch, labels) -> float:
    return loss_from_logits(logits(spec, state, batch), np.asarray(labels, dtype=np.float64))


def _check_labels(labels, batch_size, num_classes) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (batch_size, num_classes):
        raise ConfigError(f"labels shape {y.shape} != {(batch_size, num_classes)}")
    if np.any(y < 0) or np.any(y > 1):
        raise ConfigError("label entries must lie in [0, 1]")
    return y


def forward_backward(spec: ModelSpec, state: ModelState, batch, labels) -> tuple[np.ndarray, ModelState]:
    """Probabilities and the gradient of the mean multi-label BCE loss."""
    x = _flatten(spec, batch)
    y = _check_labels(labels, x.shape[0], spec.num_classes)
    z, cache = _run(spec, state, x)
    probs = sigmoid(z)
    # sigmoid + BCE collapses to (p - y) at the head pre-activation
    delta = (probs - y) / x.shape[0]
    grad_w = [None] * len(state.weights)
    grad_b = [None] * len(state.biases)
    k = len(state.weights)
    for idx in range(len(cache) - 1, -1, -1):
        kind, saved = cache[idx]
        if kind == DENSE:
            k -= 1
            grad_w[k] = saved.T @ delta
            grad_b[k] = delta.sum(axis=0)
            if idx > 0:
                delta = delta @ state.weights[k].T
        elif kind == RELU:
            delta = delta * (saved > 0)
        else:
            delta = delta * saved * (1.0 - saved)
        if not np.all(np.isfinite(delta)):
            raise NumericError(f"non-finite gradient at layer {idx} ({kind})", layer=idx)
    return probs, ModelState(grad_w, grad_b)


def backward(spec: ModelSpec, state: ModelState, batch, labels) -> ModelState:
    """Gradient of the mean multi-label BCE loss w.r.t. every parameter."""
    return forward_backward(spec, state, batch, labels)[1]


def backward_parallel(spec: ModelSpec, state: ModelState, batch, labels, threads: int = 1) -> ModelState:
    """Chunked backward pass on a thread pool, reduced in chunk order.

    With threads > 1 the float summation order differs from the single-pass
    gradient, so results match only to rounding; use threads=1 for bitwise
    reproducibility.
    """
    batch = np.asarray(batch)
    labels = np.asarray(labels)
    n = batch.shape[0]
    if threads <= 1 or n < 2 * threads:
        return backward(spec, state, batch, labels)
    bounds = np.linspace(0, n, threads + 1).astype(int)
    chunks = [(bounds[i], bounds[i + 1]) for i in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: backward(spec, state, batch[c[0]:c[1]], labels[c[0]:c[1]]), chunks))
    total = None
    for (lo, hi), g in zip(chunks, parts):
        scaled = [p * ((hi - lo) / n) for p in g.params()]
        total = scaled if total is None else [t + s for t, s in zip(total, scaled)]
    return ModelState.from_params(total)


@dataclass
class GradCheckReport:
    max_rel_err: float
    max_abs_err: float
    checked: int
    passed: bool
    worst: tuple[int, tuple[int, ...]] | None = None
    per_param: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "max_rel_err": self.max_rel_err,
            "max_abs_err": self.max_abs_err,
            "checked": self.checked,
            "pass": self.passed,
        }


def grad_check(spec, state, batch, labels, eps=1e-5, tol=1e-4, *, max_full=5000,
               sample_size=500, seed=0, floor=1e-6, backward_fn=backward) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    Relative error per parameter is |a - n| / max(|a|, |n|, floor). Models with
    more than max_full parameters are probed on a seeded random subset.
    """
    if not 0 < eps <= 1e-2:
        raise ConfigError(f"eps must lie in (0, 1e-2], got {eps}")
    batch = np.asarray(batch, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    base = state.copy()
    params = [p.astype(np.float64) for p in base.params()]
    base = ModelState.from_params(params)
    analytic = [np.asarray(g, dtype=np.float64) for g in backward_fn(spec, base, batch, labels).params()]

    coords = [(i, idx) for i, p in enumerate(params) for idx in np.ndindex(p.shape)]
    if len(coords) > max_full:
        pick = np.random.default_rng(seed).choice(len(coords), size=sample_size, replace=False)
        coords = [coords[j] for j in sorted(pick)]

    max_rel = max_abs = 0.0
    worst = None
    errs = []
    for i, idx in coords:
        p = params[i]
        orig = p[idx]
        p[idx] = orig + eps
        up = model_loss(spec, base, batch, labels)
        p[idx] = orig - eps
        down = model_loss(spec, base, batch, labels)
        p[idx] = orig
        numeric = (up - down) / (2 * eps)
        a = analytic[i][idx]
        abs_err = abs(a - numeric)
        rel = abs_err / max(abs(a), abs(numeric), floor)
        errs.append(rel)
        max_abs = max(max_abs, abs_err)
        if rel > max_rel:
            max_rel, worst = rel, (i, idx)
    return GradCheckReport(max_rel, max_abs, len(coords), max_rel <= tol, worst, errs)


def random_problem(seed: int, max_params: int = 5000):
    """Small random (spec, state, batch, labels) for gradient checks.

    Mixes ReLU and Sigmoid hidden layers, non-zero biases and soft labels.
    """
    rng = np.random.default_rng(seed)
    while True:
        dims = (int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(1, 4)))
        layers = []
        for _ in range(int(rng.integers(1, 4))):
            layers += [Dense(int(rng.integers(2, 12))), Layer(RELU if rng.random() < 0.6 else SIGMOID)]
        spec = ModelSpec(dims, tuple(layers) + (Dense(NUM_CLASSES), Sigmoid()))
        if spec.num_params() <= max_params:
            break
    state = init_state(spec, rng, head_scale=1.0)
    state = ModelState(state.weights, [rng.normal(0, 0.3, size=b.shape) for b in state.biases])
    batch = rng.uniform(0, 1, size=(int(rng.integers(2, 6)),) + dims)
    labels = rng.uniform(0, 1, size=(batch.shape[0], NUM_CLASSES))
    labels[:, ::2] = np.round(labels[:, ::2])
    return spec, state, batch, labels


def flip_layer_sign(layer: int, backward_fn=None):
    """A backward function with the gradient of one Dense layer negated (fault injection)."""
    inner = backward_fn or backward

    def faulty(spec, state, batch, labels):
        grads = inner(spec, state, batch, labels)
        grads.weights[layer] = -grads.weights[layer]
        grads.biases[layer] = -grads.biases[layer]
        return grads

    return faulty
