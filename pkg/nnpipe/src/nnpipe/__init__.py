"""Neural pattern classifier for binary space-time lattice fields.

Consumes labeled datasets in the DPDS/DPIX record format, trains a
multi-head sequence classifier (1x1 channel mixer -> temporal
convolutional encoder -> GRU summarizer -> six sigmoid heads),
calibrates its scores, and exports calibrated probabilities in the
score-table format the sweep CLI ingests.
"""

__version__ = "0.1.0"

from .records import CANONICAL_NAMES, Record, load_index, read_records
from .model import ModelConfig, PatternNet, load_model, save_model

__all__ = [
    "CANONICAL_NAMES",
    "Record",
    "load_index",
    "read_records",
    "ModelConfig",
    "PatternNet",
    "load_model",
    "save_model",
]
