"""Training side of the learned move scorer.

Consumes the search engine's line-delimited dataset files and exports
weight containers the engine loads directly; the two packages share only
those file formats.
"""
from .container import tensor_specs, write_container
from .dataset import (
    DatasetHeader,
    EncodedDataset,
    Record,
    encode,
    query_ids,
    read_dataset,
    split_by_query,
)
from .errors import ConfigError, DataError, TrainError, TrainerError
from .network import MoveScorerNet
from .training import EpochMetrics, TrainConfig, TrainReport, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "DatasetHeader",
    "EncodedDataset",
    "EpochMetrics",
    "MoveScorerNet",
    "Record",
    "TrainConfig",
    "TrainError",
    "TrainReport",
    "TrainerError",
    "encode",
    "query_ids",
    "read_dataset",
    "split_by_query",
    "tensor_specs",
    "train",
    "write_container",
    "__version__",
]
