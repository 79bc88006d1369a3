"""BCE objective, catalog-constrained compound decisions and macro-F1 scoring."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .nn import forward
from .taxonomy import CATALOG, catalog_index_for

PROB_EPS = 1e-7


def bce_loss(p, y, eps: float = PROB_EPS) -> float:
    """Mean over samples of the per-class binary cross-entropy summed over classes.

    Each log argument is floored at eps, so exact 0/1 predictions on matching
    targets still give zero loss.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 2:
        raise ConfigError(f"p and y must be matching (N, C) arrays, got {p.shape} and {y.shape}")
    if np.any(y < 0) or np.any(y > 1):
        raise ConfigError("targets must lie in [0, 1]")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise NumericError("predicted probabilities must be finite and inside [0, 1]")
    log_p = np.log(np.maximum(p, eps))
    log_q = np.log1p(-np.minimum(p, 1.0 - eps))
    terms = np.where(y > 0, y * log_p, 0.0) + np.where(y < 1, (1.0 - y) * log_q, 0.0)
    return float(-terms.sum(axis=1).mean())


def compound_scores(p, catalog=CATALOG) -> np.ndarray:
    """Per-entry sums of constituent probabilities; works on (6,) or (B, 6)."""
    p = np.asarray(p, dtype=np.float64)
    return np.stack([p[..., i] + p[..., j] for i, j in (e.indices for e in catalog)], axis=-1)


def constrain_to_compound(p, catalog=CATALOG) -> tuple[int, np.ndarray]:
    """argmax over summed constituent probabilities; ties go to the lowest catalog index."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (6,):
        raise ConfigError(f"expected 6 basic probabilities, got shape {p.shape}")
    scores = compound_scores(p, catalog)
    return int(np.argmax(scores)), scores


def constrain_batch(p, catalog=CATALOG) -> np.ndarray:
    return np.argmax(compound_scores(p, catalog), axis=-1)


@dataclass
class Metrics:
    names: tuple[str, ...]
    precision: list[float]
    recall: list[float]
    per_class_f1: list[float]
    support: list[int]
    confusion: list[list[int]]  # rows: truth, columns: prediction
    macro_f1: float
    zero_support: list[str]

    def to_dict(self) -> dict:
        per_class = [
            {"name": n, "precision": p, "recall": r, "f1": f, "support": s, "zero_support": s == 0}
            for n, p, r, f, s in zip(self.names, self.precision, self.recall, self.per_class_f1, self.support)
        ]
        return {
            "macro_f1": self.macro_f1,
            "per_class": per_class,
            "confusion": self.confusion,
            "zero_support": self.zero_support,
            "n": int(sum(self.support)),
        }


def _safe_div(a, b):
    return a / b if b else 0.0


def compute_metrics(y_true, y_pred, names=tuple(e.name for e in CATALOG)) -> Metrics:
    """Per-class precision/recall/F1 and their unweighted mean over all classes.

    Classes with no support still count in the denominator with F1 = 0.
    """
    k = len(names)
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ConfigError("y_true and y_pred differ in length")
    if y_true.size == 0:
        raise ConfigError("cannot score an empty evaluation set")
    if y_true.min() < 0 or y_pred.min() < 0 or max(y_true.max(), y_pred.max()) >= k:
        raise ConfigError(f"class indices must lie in [0, {k})")
    cm = np.zeros((k, k), dtype=int)
    np.add.at(cm, (y_true, y_pred), 1)
    tp = np.diag(cm)
    prec = [_safe_div(tp[c], cm[:, c].sum()) for c in range(k)]
    rec = [_safe_div(tp[c], cm[c].sum()) for c in range(k)]
    f1 = [_safe_div(2 * p * r, p + r) for p, r in zip(prec, rec)]
    support = cm.sum(axis=1).tolist()
    return Metrics(
        names=tuple(names),
        precision=[float(v) for v in prec],
        recall=[float(v) for v in rec],
        per_class_f1=[float(v) for v in f1],
        support=[int(s) for s in support],
        confusion=cm.tolist(),
        macro_f1=float(math.fsum(f1) / k),
        zero_support=[n for n, s in zip(names, support) if s == 0],
    )


def ground_truth(samples, catalog=CATALOG) -> np.ndarray:
    return np.array([catalog_index_for(s.label, catalog) for s in samples], dtype=int)


def predict_probs(spec, state, samples, batch_size: int = 256, threads: int = 1) -> np.ndarray:
    chunks = [samples[i:i + batch_size] for i in range(0, len(samples), batch_size)]

    def run(chunk):
        return forward(spec, state, np.stack([s.image for s in chunk]))

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts, axis=0)


def evaluate(spec, state, eval_set, catalog=CATALOG, threads: int = 1) -> Metrics:
    """Macro-F1 over the catalog classes using constrained compound decisions."""
    eval_set = list(eval_set)
    if not eval_set:
        raise ConfigError("evaluation set is empty")
    probs = predict_probs(spec, state, eval_set, threads=threads)
    return compute_metrics(ground_truth(eval_set, catalog), constrain_batch(probs, catalog),
                           tuple(e.name for e in catalog))
