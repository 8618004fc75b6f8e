"""Reduced-scale residual-network trainer for multi-typed character attributes.

Reads the core toolkit's sample stores, dictionaries, and schema manifests;
writes predictions in the interchange format its reader accepts, plus a
checkpoint for later prediction runs.  The two packages share only files,
never code.
"""

from .formats import (
    FILLER,
    GLYPH_SIZE,
    FormatError,
    Manifest,
    Sample,
    format_prediction_line,
    load_dictionary_targets,
    load_manifest,
    load_samples,
    parse_manifest,
    read_image_list,
    read_pgm,
    targets_from_row,
    write_predictions,
)
from .model import DESIGN_NOTES, AttributeNet, ResidualBlock, init_xavier
from .train import (
    DeepConfig,
    DeepResult,
    TrainerError,
    emit_predictions,
    load_checkpoint,
    predict_probs,
    save_checkpoint,
    train_deep,
)

__version__ = "0.1.0"
