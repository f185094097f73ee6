"""Export adapters for the serbias audit toolkit's file formats."""

from .export import (
    ExportStats,
    PredictionItem,
    export_embeddings,
    export_layer_weights,
    export_predictions,
    softmax,
    time_average_layers,
)

__version__ = "0.1.0"

__all__ = [
    "ExportStats",
    "PredictionItem",
    "export_embeddings",
    "export_layer_weights",
    "export_predictions",
    "softmax",
    "time_average_layers",
]
