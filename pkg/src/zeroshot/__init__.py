"""Predict visual classifiers for unseen classes from text descriptions.

The library covers the full workflow: featurizing per-class text
(tf-idf plus a clustered LSI reduction), regressing classifier
hyperplanes from text features (Gaussian-process and twin-Gaussian-
process regression), learning linear and kernelized domain-transfer
maps between the text and visual spaces, and combining those signals
in constrained quadratic programs that output the final classifier.
A small evaluation harness (AUC / multiclass accuracy / seen-plus-one
recall) and a synthetic benchmark generator round it out.
"""

from .data import (
    ClassSplit,
    TextCorpus,
    VisualDataset,
    augment,
    load_dataset,
    load_matrix,
    make_folds,
    save_matrix,
)
from .errors import (
    DataError,
    FeaturizationError,
    OptimizationError,
    PredictorError,
    RegressionError,
    ZeroShotError,
)

__version__ = "0.1.0"
