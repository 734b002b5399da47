"""Batch re-ranking of top-t recommendation lists into fairer top-n
lists via iterative max-flow, with an exposure-metrics evaluation panel.
"""

from .baselines import random_rerank, reverse_rerank
from .core import (
    ExperimentConfig,
    InteractionDataset,
    RankedBatch,
    SupplierCatalog,
    truncate,
)
from .errors import DataError, FairflowError, ParseError, SolverStuckError, UsageError
from .metrics import MetricReport, evaluate_batch
from .recommenders import most_popular, recommend_top_t, train_user_knn
from .rerank import RerankResult, flow_rerank

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "ExperimentConfig",
    "FairflowError",
    "InteractionDataset",
    "MetricReport",
    "ParseError",
    "RankedBatch",
    "RerankResult",
    "SolverStuckError",
    "SupplierCatalog",
    "UsageError",
    "evaluate_batch",
    "flow_rerank",
    "most_popular",
    "random_rerank",
    "recommend_top_t",
    "reverse_rerank",
    "train_user_knn",
    "truncate",
]
