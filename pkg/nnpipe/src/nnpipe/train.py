"""Training loop: streamed record batches, summed per-head binary
cross-entropy, fixed seeds for reproducible runs."""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .model import ModelConfig, PatternNet
from .records import count_records, read_records


def record_tensors(records) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack same-shape records into (fields, targets) float tensors."""
    records = list(records)
    x = torch.from_numpy(np.stack([r.field for r in records])).float()
    y = torch.tensor([r.target for r in records], dtype=torch.float32)
    return x, y


def iter_batches(paths, batch_size: int, seed: int, shuffle: bool = True):
    """Yield (fields, targets) batches, streaming records from disk.

    Only the index lives in memory; records are read per batch.  Files
    are visited in order (records within a file share dimensions);
    record order within each file is shuffled when requested.
    """
    gen = np.random.default_rng(seed)
    for path in paths:
        n = count_records(path)
        order = gen.permutation(n) if shuffle else np.arange(n)
        for start in range(0, n, batch_size):
            chunk = order[start:start + batch_size].tolist()
            yield record_tensors(read_records(path, indices=chunk))


@dataclass
class TrainResult:
    model: PatternNet
    epoch_losses: list[float]          # mean per-sample summed-head BCE


def constant_predictor_loss() -> float:
    """Summed-head BCE of the always-0.5 predictor (learnability floor)."""
    return 6 * float(np.log(2.0))


def train(paths, config: ModelConfig, epochs: int = 10, batch_size: int = 32,
          lr: float = 1e-3, seed: int = 0) -> TrainResult:
    """Minimize the sum of six per-head binary cross-entropies."""
    paths = list(paths)
    if not paths or all(count_records(p) == 0 for p in paths):
        raise ValueError("no training records")
    torch.manual_seed(seed)
    model = PatternNet(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    bce = nn.BCEWithLogitsLoss(reduction="mean")
    losses = []
    for epoch in range(epochs):
        model.train()
        total, count = 0.0, 0
        for x, y in iter_batches(paths, batch_size, seed=seed * 1000 + epoch):
            optimizer.zero_grad()
            loss = 6 * bce(model.logits(x), y)   # sum over heads, mean over batch
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(x)
            count += len(x)
        losses.append(total / count)
    model.eval()
    return TrainResult(model, losses)


@torch.no_grad()
def score_paths(model: PatternNet, paths, batch_size: int = 64) -> np.ndarray:
    """Post-sigmoid probabilities for every record, in file order."""
    model.eval()
    out = []
    for path in paths:
        for start in range(0, count_records(path), batch_size):
            chunk = list(range(start, min(start + batch_size,
                                          count_records(path))))
            x, _ = record_tensors(read_records(path, indices=chunk))
            out.append(model(x).numpy())
    return np.concatenate(out, axis=0)
