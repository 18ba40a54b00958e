"""Score calibration: per-head F1-maximizing thresholds from the
precision-recall sweep, and a shallow gated mapper from head scores to a
single class distribution (optionally consuming a subset of heads)."""

import numpy as np
import torch
from torch import nn

from .records import CANONICAL_NAMES

#: Classes assigned by the fixed-order rule: the six canonical labels
#: plus the percolating-without-specific-pattern fallback.
CLASS_NAMES = CANONICAL_NAMES + ("percolating",)


class DegenerateHeadError(ValueError):
    """A head whose validation labels contain a single class."""


def f1_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = int(np.sum(y_pred & y_true))
    fp = int(np.sum(y_pred & ~y_true))
    fn = int(np.sum(~y_pred & y_true))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def f1_max_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """F1-maximizing threshold over all midpoints between distinct
    scores; ties broken toward the larger threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if labels.all() or not labels.any():
        raise DegenerateHeadError("validation labels are single-class")
    distinct = np.unique(scores)
    if len(distinct) == 1:
        raise DegenerateHeadError("scores are identical for all samples")
    candidates = (distinct[:-1] + distinct[1:]) / 2
    best_tau, best_f1 = candidates[0], -1.0
    for tau in candidates:
        f1 = f1_score(labels, scores > tau)
        if f1 >= best_f1:  # >= keeps the larger threshold on ties
            best_tau, best_f1 = tau, f1
    return float(best_tau)


def calibrate_pr(scores: np.ndarray, labels: np.ndarray) -> dict[str, float]:
    """Per-head thresholds tau_k from validation scores (n, 6)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    return {name: f1_max_threshold(scores[:, k], labels[:, k])
            for k, name in enumerate(CANONICAL_NAMES)}


def fixed_order_class(target) -> int:
    """Class index from a six-bit target via the fixed-order rule:
    last pattern flag set wins; A when its bit is set; percolating
    without a specific pattern otherwise."""
    target = tuple(bool(b) for b in target)
    winner = None
    for k in range(1, 6):
        if target[k]:
            winner = k
    if winner is not None:
        return winner
    return 0 if target[0] else 6


class SwiGLUMapper(nn.Module):
    """Shallow gated feed-forward mapper from head scores to a class
    distribution; consumes only the selected heads."""

    def __init__(self, subset: tuple[str, ...] = CANONICAL_NAMES,
                 hidden: int = 64):
        super().__init__()
        if not subset:
            raise ValueError("head subset must be nonempty")
        unknown = set(subset) - set(CANONICAL_NAMES)
        if unknown:
            raise ValueError(f"unknown heads: {sorted(unknown)}")
        self.subset = tuple(subset)
        self.indices = [CANONICAL_NAMES.index(n) for n in self.subset]
        self.gate = nn.Linear(len(self.subset), hidden)
        self.value = nn.Linear(len(self.subset), hidden)
        self.out = nn.Linear(hidden, len(CLASS_NAMES))

    def forward(self, scores: torch.Tensor) -> torch.Tensor:
        """scores (batch, 6) -> class distribution (batch, 7)."""
        x = scores[:, self.indices]
        h = torch.nn.functional.silu(self.gate(x)) * self.value(x)
        return torch.softmax(self.out(h), dim=-1)

    def logits(self, scores: torch.Tensor) -> torch.Tensor:
        x = scores[:, self.indices]
        h = torch.nn.functional.silu(self.gate(x)) * self.value(x)
        return self.out(h)

    @torch.no_grad()
    def predict(self, scores: np.ndarray) -> np.ndarray:
        probs = self.forward(torch.as_tensor(scores, dtype=torch.float32))
        return probs.argmax(dim=-1).numpy()


def calibrate_mapper(scores: np.ndarray, class_indices: np.ndarray,
                     subset: tuple[str, ...] = CANONICAL_NAMES,
                     hidden: int = 64, epochs: int = 300, lr: float = 1e-2,
                     seed: int = 0) -> SwiGLUMapper:
    """Fit the mapper with cross-entropy on raw head scores."""
    torch.manual_seed(seed)
    mapper = SwiGLUMapper(subset, hidden)
    x = torch.as_tensor(np.asarray(scores, dtype=np.float32))
    y = torch.as_tensor(np.asarray(class_indices, dtype=np.int64))
    optimizer = torch.optim.Adam(mapper.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    for _ in range(epochs):
        optimizer.zero_grad()
        loss = loss_fn(mapper.logits(x), y)
        loss.backward()
        optimizer.step()
    mapper.eval()
    return mapper
