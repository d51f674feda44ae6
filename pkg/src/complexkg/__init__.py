"""Complex-valued embeddings for knowledge-graph completion."""

__version__ = "0.1.0"

from .data import (DatasetSplit, LabeledTriple, Vocabulary, generate_synthetic, kfold_split,
                   load_tsv)
from .evaluation import average_precision, rank_triple, ranking_metrics
from .models import gradient, score
from .params import ModelKind, ParameterSet, init_params, l2_norm_squared, load_params, save_params
from .training import TrainConfig, TrainReport, train

__all__ = [
    "DatasetSplit", "LabeledTriple", "ModelKind", "ParameterSet", "TrainConfig", "TrainReport",
    "Vocabulary", "average_precision", "generate_synthetic", "gradient", "init_params",
    "kfold_split", "l2_norm_squared", "load_params", "load_tsv", "rank_triple", "ranking_metrics",
    "save_params", "score", "train",
]
