"""Export calibrated head probabilities in the score-table format the
sweep CLI ingests, plus the per-head threshold sidecar."""

import csv

import numpy as np
import torch

from .records import CANONICAL_NAMES

SCORE_HEADER = ["p", "q", "realization", *CANONICAL_NAMES]


@torch.no_grad()
def score_records(model, records, batch_size: int = 64) -> tuple[np.ndarray, list]:
    """Probabilities (n, 6) plus (p, q) metadata, preserving order."""
    model.eval()
    probs, meta, batch = [], [], []

    def flush():
        x = torch.from_numpy(np.stack([r.field for r in batch])).float()
        probs.append(model(x).numpy())
        batch.clear()

    for record in records:
        if batch and batch[0].field.shape != record.field.shape:
            flush()
        batch.append(record)
        meta.append((record.p, record.q))
        if len(batch) == batch_size:
            flush()
    if batch:
        flush()
    if not probs:
        raise ValueError("no records to score")
    return np.concatenate(probs, axis=0), meta


def export_scores(model, records, out_csv,
                  thresholds: dict[str, float] | None = None,
                  thresholds_path=None) -> np.ndarray:
    """Write the score table; realization indices count per (p, q)."""
    probs, meta = score_records(model, records)
    counters: dict[tuple, int] = {}
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_HEADER)
        for row, (p, q) in zip(probs, meta):
            r = counters.get((p, q), 0)
            counters[(p, q)] = r + 1
            writer.writerow([p, q, r, *(float(v) for v in row)])
    if thresholds is not None and thresholds_path is not None:
        write_thresholds(thresholds_path, thresholds)
    return probs


def write_thresholds(path, thresholds: dict[str, float]) -> None:
    with open(path, "w") as fh:
        for name in CANONICAL_NAMES:
            if name in thresholds:
                fh.write(f"{name}={thresholds[name]}\n")
