"""Stage-2 classification over fused feature vectors.

A pair's classifier input concatenates, for the source then the target, the
issuer's task features with its pre-trained embedding row. The in-repo model
is L2-regularized logistic regression on train-standardized inputs (other
kinds can be registered); headline metric is micro-F1, which equals accuracy
for single-label binary prediction, with AUC as a rank-based diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import atomic_write_text
from .pairs import PairDatasetSplit, PropagationPair


@dataclass
class FusionVector:
    source: np.ndarray
    target: np.ndarray
    merged: np.ndarray


def build_fusion(
    pair: PropagationPair, task: dict[int, np.ndarray], embeddings: np.ndarray
) -> FusionVector:
    """[task_s | emb_s | task_t | emb_t]; missing rows are hard errors."""
    halves = []
    for nid in (pair.source_id, pair.target_id):
        if nid not in task:
            raise KeyError(f"no task features for node {nid}")
        if not 0 <= nid < embeddings.shape[0]:
            raise KeyError(f"no embedding row for node {nid}")
        halves.append(np.concatenate([task[nid], embeddings[nid]]))
    return FusionVector(source=halves[0], target=halves[1], merged=np.concatenate(halves))


def make_fusion_fn(task: dict[int, np.ndarray], embeddings: np.ndarray):
    return lambda pair: build_fusion(pair, task, embeddings).merged


def fusion_inputs(pairs: list[PropagationPair], fusion_fn) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([fusion_fn(p) for p in pairs])
    y = np.array([p.label for p in pairs], dtype=np.float64)
    return X, y


@dataclass
class ClassifierConfig:
    kind: str = "logistic"
    iterations: int = 500
    lr: float = 0.1
    l2: float = 1e-3


@dataclass
class ClassifierModel:
    """Trained model plus the train-split standardization stats it bakes in."""

    kind: str
    weights: np.ndarray
    bias: float
    feat_mean: np.ndarray
    feat_std: np.ndarray

    def scores(self, X: np.ndarray) -> np.ndarray:
        Xs = (X - self.feat_mean) / self.feat_std
        return _sigmoid(Xs @ self.weights + self.bias)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) >= 0.5).astype(np.int64)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t, dtype=np.float64)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def standardization_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dim mean/std; constant dims get std 1 so they standardize to zero."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return mean, std


def logistic_loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss + 0.5*l2*|w|^2 (bias unregularized), with gradients."""
    m = X.shape[0]
    logits = X @ w + b
    p = _sigmoid(logits)
    # log(1+exp(-|t|)) form avoids overflow in both tails
    nll = np.mean(np.log1p(np.exp(-np.abs(logits))) + np.maximum(logits, 0.0) - y * logits)
    loss = float(nll + 0.5 * l2 * float(w @ w))
    gw = X.T @ (p - y) / m + l2 * w
    gb = float(np.mean(p - y))
    return loss, gw, gb


def _train_logistic(X: np.ndarray, y: np.ndarray, cfg: ClassifierConfig) -> ClassifierModel:
    mean, std = standardization_stats(X)
    Xs = (X - mean) / std
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(cfg.iterations):
        loss, gw, gb = logistic_loss_and_grad(w, b, Xs, y, cfg.l2)
        if not np.isfinite(loss):
            raise FloatingPointError("logistic training diverged: non-finite loss")
        w -= cfg.lr * gw
        b -= cfg.lr * gb
    return ClassifierModel(kind="logistic", weights=w, bias=b, feat_mean=mean, feat_std=std)


CLASSIFIER_TRAINERS = {"logistic": _train_logistic}


def train_classifier(
    split: PairDatasetSplit, fusion_fn, cfg: ClassifierConfig | None = None
) -> ClassifierModel:
    cfg = cfg or ClassifierConfig()
    if cfg.kind not in CLASSIFIER_TRAINERS:
        raise ValueError(
            f"unknown classifier kind {cfg.kind!r}; registered: {sorted(CLASSIFIER_TRAINERS)}"
        )
    if not split.train:
        raise ValueError("empty train split")
    X, y = fusion_inputs(split.train, fusion_fn)
    return CLASSIFIER_TRAINERS[cfg.kind](X, y, cfg)


# ---------------------------------------------------------------------------
# metrics


def micro_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """F1 from TP/FP/FN pooled over classes; equals accuracy for single-label
    binary predictions."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    tp = fp = fn = 0
    for cls in np.unique(np.concatenate([y_true, y_pred])):
        tp += int(np.sum((y_pred == cls) & (y_true == cls)))
        fp += int(np.sum((y_pred == cls) & (y_true != cls)))
        fn += int(np.sum((y_pred != cls) & (y_true == cls)))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true)
    return float(np.mean(y_true == np.asarray(y_pred)))


def binary_auc(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Rank-statistic AUC with tie credit 1/2; nan when a class is absent."""
    y_true = np.asarray(y_true, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(np.sum(y_true == 1))
    n_neg = int(np.sum(y_true == 0))
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = float(ranks[y_true == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(model: ClassifierModel, pairs: list[PropagationPair], fusion_fn) -> dict[str, float]:
    """micro_f1 / accuracy / auc over the given pairs (normally the test split)."""
    if not pairs:
        raise ValueError("nothing to evaluate: empty pair list")
    X, y = fusion_inputs(pairs, fusion_fn)
    scores = model.scores(X)
    preds = (scores >= 0.5).astype(np.int64)
    return {
        "micro_f1": micro_f1(y, preds),
        "accuracy": accuracy(y, preds),
        "auc": binary_auc(y, scores),
    }


# ---------------------------------------------------------------------------
# classifier checkpoint I/O


def save_classifier(model: ClassifierModel, path: Path | str) -> None:
    lines = [
        f"kind\t{model.kind}",
        f"bias\t{format(model.bias, '.17g')}",
        "weights\t" + " ".join(format(x, ".17g") for x in model.weights),
        "feat_mean\t" + " ".join(format(x, ".17g") for x in model.feat_mean),
        "feat_std\t" + " ".join(format(x, ".17g") for x in model.feat_std),
    ]
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def load_classifier(path: Path | str) -> ClassifierModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"classifier file not found: {path}")
    raw: dict[str, str] = {}
    for line in path.read_text().splitlines():
        key, val = line.split("\t", 1)
        raw[key] = val
    vec = lambda s: np.array([float(t) for t in s.split(" ")]) if s else np.zeros(0)
    return ClassifierModel(
        kind=raw["kind"],
        weights=vec(raw["weights"]),
        bias=float(raw["bias"]),
        feat_mean=vec(raw["feat_mean"]),
        feat_std=vec(raw["feat_std"]),
    )
