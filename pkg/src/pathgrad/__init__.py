"""Path-integrated gradient attributions (IG, anchored DIG-style walks, UDIG) for token embeddings."""

from .attribution import AttributionResult, attribute
from .embeddings import EmbeddingStore, knn, load_embeddings, save_embeddings
from .metrics import MaskingProtocol, MetricReport, evaluate_method
from .model import LinearSurrogate, ReferenceModelParams, TargetSelector, TokenSequence
from .paths import InterpolationPath, PathSpec, build_dig_path, build_ig_path, build_udig_path

__version__ = "0.1.0"

__all__ = [
    "AttributionResult",
    "EmbeddingStore",
    "InterpolationPath",
    "LinearSurrogate",
    "MaskingProtocol",
    "MetricReport",
    "PathSpec",
    "ReferenceModelParams",
    "TargetSelector",
    "TokenSequence",
    "attribute",
    "build_dig_path",
    "build_ig_path",
    "build_udig_path",
    "evaluate_method",
    "knn",
    "load_embeddings",
    "save_embeddings",
]
