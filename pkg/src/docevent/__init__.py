"""Document-level event extraction with schema-query aggregation.

Pipeline: transformer document encoder with CRF entity recognition ->
learnable event type/role queries re-encoded per sentence -> heterogeneous
graph GCN aggregating sentence/mention information into type/role nodes ->
type-aware detection and role-by-role record expansion. Built on a small
numpy autodiff backend.
"""

from .autodiff import Tensor, no_grad, set_debug_nan, set_default_dtype
from .corpus import (Document, EventRecord, EventSchema, EventType, GoldMention,
                     bucketize, load_corpus, load_schema, save_corpus, save_schema)
from .generate import GenConfig, generate_synthetic
from .metrics import MetricsReport, evaluate_predictions, match_records
from .model import ExtractionModel, ModelConfig
from .trainer import TrainConfig, build_model, evaluate, load_model, save_model, train

__all__ = [
    "Tensor", "no_grad", "set_debug_nan", "set_default_dtype",
    "Document", "EventRecord", "EventSchema", "EventType", "GoldMention",
    "bucketize", "load_corpus", "load_schema", "save_corpus", "save_schema",
    "GenConfig", "generate_synthetic",
    "MetricsReport", "evaluate_predictions", "match_records",
    "ExtractionModel", "ModelConfig",
    "TrainConfig", "build_model", "evaluate", "load_model", "save_model", "train",
]

__version__ = "0.1.0"
