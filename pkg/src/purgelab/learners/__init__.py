"""Pluggable classifiers. Importing this package registers the built-ins."""
from .base import (
    BUILTIN_IDS,
    LearnerError,
    LearnerSpec,
    Model,
    SchemaError,
    accuracy,
    builtin_specs,
    class_distribution,
    fit,
    out_of_fold_predictions,
    predict,
    register_learner,
    registered_ids,
    unregister_learner,
)
from .bayes import NaiveBayes
from .distance import heom
from .knn import KNearestNeighbors
from .mlp import MultilayerPerceptron
from .onerule import OneRule
from .tree import DecisionTree

TrainedModel = Model

__all__ = [
    "BUILTIN_IDS", "DecisionTree", "KNearestNeighbors", "LearnerError", "LearnerSpec", "Model",
    "MultilayerPerceptron", "NaiveBayes", "OneRule", "SchemaError", "TrainedModel", "accuracy",
    "builtin_specs", "class_distribution", "fit", "heom", "out_of_fold_predictions", "predict", "register_learner",
    "registered_ids", "unregister_learner",
]
