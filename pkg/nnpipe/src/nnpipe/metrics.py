"""Ranking and classification metrics: ROC-AUC / PR-AUC / F1 per head,
6x6 head-vs-class cross matrices, bootstrap confidence intervals, and
reliability tables for post-sigmoid probabilities."""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .calibrate import f1_score
from .records import CANONICAL_NAMES


def roc_auc(scores, labels) -> float:
    """Rank-statistic ROC-AUC with tie correction; NaN when the labels
    are single-class."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    # average ranks over tied groups
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    rank_sum = ranks[labels].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average precision (step-wise PR-curve integral); NaN when there
    are no positives."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        return math.nan
    order = np.argsort(-scores, kind="mergesort")
    hits = labels[order].astype(float)
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, len(hits) + 1)
    return float((precision * hits).sum() / n_pos)


def f1_at(scores, labels, threshold: float) -> float:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    return f1_score(labels, scores > threshold)


def bootstrap_ci(metric, scores, labels, n_boot: int = 200, seed: int = 0,
                 alpha: float = 0.05) -> tuple[float, float]:
    """Percentile confidence interval, resampling systems with
    replacement."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    gen = np.random.default_rng(seed)
    values = []
    for _ in range(n_boot):
        idx = gen.integers(0, len(scores), len(scores))
        v = metric(scores[idx], labels[idx])
        if not math.isnan(v):
            values.append(v)
    if not values:
        return math.nan, math.nan
    lo, hi = np.quantile(values, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


def cross_matrix(metric, scores, class_indices,
                 thresholds: dict[str, float] | None = None) -> np.ndarray:
    """6x6 matrix of metric(score of head k -> ground-truth class c).

    Rows = heads, columns = classes, both in canonical order.
    Degenerate columns yield NaN entries rather than being dropped.
    """
    scores = np.asarray(scores, dtype=float)
    class_indices = np.asarray(class_indices)
    out = np.full((6, 6), math.nan)
    for k, name in enumerate(CANONICAL_NAMES):
        for c in range(6):
            labels = class_indices == c
            if thresholds is not None:
                out[k, c] = f1_at(scores[:, k], labels, thresholds[name])
            else:
                out[k, c] = metric(scores[:, k], labels)
    return out


def reliability_table(probs, labels, n_bins: int = 10) -> list[dict]:
    """Per-bin mean predicted probability vs empirical frequency."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    rows = []
    for b in range(n_bins):
        mask = (probs >= edges[b]) & (
            probs < edges[b + 1] if b < n_bins - 1 else probs <= edges[b + 1])
        rows.append({
            "bin_lo": float(edges[b]),
            "bin_hi": float(edges[b + 1]),
            "count": int(mask.sum()),
            "mean_prob": float(probs[mask].mean()) if mask.any() else math.nan,
            "frequency": float(labels[mask].mean()) if mask.any() else math.nan,
        })
    return rows


@dataclass
class MetricsReport:
    roc: dict[str, float]
    pr: dict[str, float]
    f1: dict[str, float]
    roc_ci: dict[str, tuple[float, float]]
    pr_ci: dict[str, tuple[float, float]]
    roc_matrix: np.ndarray
    pr_matrix: np.ndarray
    f1_matrix: np.ndarray
    reliability: dict[str, list[dict]] = dc_field(default_factory=dict)


def metrics_report(scores, targets, thresholds: dict[str, float],
                   class_indices=None, n_boot: int = 200,
                   seed: int = 0) -> MetricsReport:
    """Full metric suite for (n, 6) scores against (n, 6) binary targets.

    class_indices (from the fixed-order rule) drive the cross matrices;
    when omitted the matrices are computed against the per-head targets'
    argmax-free class derivation is skipped and matrices use targets of
    each column directly.
    """
    scores = np.asarray(scores, dtype=float)
    targets = np.asarray(targets, dtype=bool)
    roc, pr, f1, roc_ci, pr_ci, reliability = {}, {}, {}, {}, {}, {}
    for k, name in enumerate(CANONICAL_NAMES):
        roc[name] = roc_auc(scores[:, k], targets[:, k])
        pr[name] = pr_auc(scores[:, k], targets[:, k])
        f1[name] = f1_at(scores[:, k], targets[:, k], thresholds[name])
        roc_ci[name] = bootstrap_ci(roc_auc, scores[:, k], targets[:, k],
                                    n_boot, seed)
        pr_ci[name] = bootstrap_ci(pr_auc, scores[:, k], targets[:, k],
                                   n_boot, seed)
        reliability[name] = reliability_table(scores[:, k], targets[:, k])
    if class_indices is None:
        class_indices = np.full(len(scores), -1)
    return MetricsReport(
        roc=roc, pr=pr, f1=f1, roc_ci=roc_ci, pr_ci=pr_ci,
        roc_matrix=cross_matrix(roc_auc, scores, class_indices),
        pr_matrix=cross_matrix(pr_auc, scores, class_indices),
        f1_matrix=cross_matrix(None, scores, class_indices, thresholds),
        reliability=reliability,
    )
