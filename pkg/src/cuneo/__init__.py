"""cuneo: glyph recognition for wedge-written tablets.

Image primitives, page segmentation, dataset synthesis, a from-scratch
convolutional classifier, evaluation metrics, and lexicon-based
translation — all deterministic under explicit seeds.  See the
subcommand help of the ``cuneo`` executable for the workflow view.
"""

from . import imaging, imageio, segmentation, synthetic, dataset, metrics, lexicon, nn
from .errors import (
    CatalogError,
    ConfigError,
    CuneoError,
    FormatError,
    LexiconError,
    TrainingError,
    VerificationError,
)

__version__ = "0.1.0"

__all__ = [
    "CatalogError",
    "ConfigError",
    "CuneoError",
    "FormatError",
    "LexiconError",
    "TrainingError",
    "VerificationError",
    "dataset",
    "imageio",
    "imaging",
    "lexicon",
    "metrics",
    "nn",
    "segmentation",
    "synthetic",
]
