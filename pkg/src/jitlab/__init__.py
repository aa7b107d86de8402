"""Just-in-time defect prediction laboratory.

Loads change-level datasets, audits them, runs PCA and a small neural
classifier over feature combinations, and ranks changes by risk per unit
of inspection effort.
"""

__version__ = "0.1.0"

from .dataset import (
    ChangeRecord,
    ColumnSchema,
    Dataset,
    audit_dataset,
    load_dataset,
    select_features,
    summarize,
    write_dataset,
)
from .errors import JitError
from .metrics import ConfusionCounts, FileChangeProfile, average_age, entropy, normalize_churn, precision, recall

__all__ = [
    "ChangeRecord",
    "ColumnSchema",
    "ConfusionCounts",
    "Dataset",
    "FileChangeProfile",
    "JitError",
    "audit_dataset",
    "average_age",
    "entropy",
    "load_dataset",
    "normalize_churn",
    "precision",
    "recall",
    "select_features",
    "summarize",
    "write_dataset",
]
