"""Multi-head sequence classifier for binary space-time fields.

A field is treated as a length-T multivariate time series with N binary
channels.  Architecture: point-wise 1x1 convolution projecting N to
d_model, a stack of causal dilated convolution blocks with residual
connections (temporal average-pooling between blocks keeps the GRU
input short for long sequences), a GRU whose final hidden state
summarizes the sequence, and a small MLP emitting six logits in the
canonical order [A, PL, Q+, D+, Q, D].  Nothing reads the sequence
length from configuration, so one model serves any T.
"""

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class ModelConfig:
    n_channels: int                       # spatial sites per row
    d_model: int = 64
    tcn_blocks: int = 4
    kernel_size: int = 3
    dilations: tuple[int, ...] = (1, 2, 4, 8)
    pool: int = 4                         # temporal downsampling between blocks
    gru_hidden: int = 128
    head_hidden: int = 64
    n_heads: int = 6

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if len(self.dilations) != self.tcn_blocks:
            raise ValueError("need one dilation per encoder block")
        if self.pool < 1:
            raise ValueError("pool must be >= 1")


class CausalConvBlock(nn.Module):
    """Dilated causal convolution with a residual connection."""

    def __init__(self, width: int, kernel_size: int, dilation: int):
        super().__init__()
        self.pad = (kernel_size - 1) * dilation
        self.conv = nn.Conv1d(width, width, kernel_size, dilation=dilation)
        self.act = nn.GELU()

    def forward(self, x):  # x: (batch, width, time)
        y = self.conv(nn.functional.pad(x, (self.pad, 0)))
        return x + self.act(y)


class PatternNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.mix = nn.Conv1d(config.n_channels, config.d_model, 1)
        self.blocks = nn.ModuleList(
            CausalConvBlock(config.d_model, config.kernel_size, d)
            for d in config.dilations
        )
        self.pool = (nn.AvgPool1d(config.pool, ceil_mode=True)
                     if config.pool > 1 else None)
        self.gru = nn.GRU(config.d_model, config.gru_hidden, batch_first=True)
        self.head = nn.Sequential(
            nn.Linear(config.gru_hidden, config.head_hidden),
            nn.GELU(),
            nn.Linear(config.head_hidden, config.n_heads),
        )

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        """x: (batch, time, n_channels) float in {0, 1} -> (batch, 6)."""
        if x.shape[-1] != self.config.n_channels:
            raise ValueError(
                f"field has {x.shape[-1]} channels, "
                f"model expects {self.config.n_channels}")
        h = x.transpose(1, 2)
        h = self.mix(h)
        for i, block in enumerate(self.blocks):
            h = block(h)
            if self.pool is not None and i < len(self.blocks) - 1:
                h = self.pool(h)
        _, hidden = self.gru(h.transpose(1, 2))
        return self.head(hidden[-1])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Post-sigmoid head probabilities, shape (batch, 6)."""
        return torch.sigmoid(self.logits(x))


def save_model(path, model: PatternNet) -> None:
    """Self-describing checkpoint with the configuration embedded."""
    torch.save({"config": asdict(model.config),
                "state": model.state_dict()}, path)


def load_model(path) -> PatternNet:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    cfg = dict(blob["config"])
    cfg["dilations"] = tuple(cfg["dilations"])
    model = PatternNet(ModelConfig(**cfg))
    model.load_state_dict(blob["state"])
    model.eval()
    return model
