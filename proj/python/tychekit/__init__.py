"""Stochastic in-context segmentation toolkit.

Thin Python layer over the C++ core. The heavy lifting (model, training,
metrics, data generation) lives in the compiled ``_tychekit`` extension.
"""

from _tychekit import (
    Config,
    Dataset,
    Model,
    Splits,
    TrainResult,
    best_candidate_dice,
    dice,
    evaluate,
    ged2,
    generate_dataset,
    hungarian_dice,
    load_dataset,
    sample_diversity,
    save_dataset,
    train,
)

__all__ = [
    "Config",
    "Dataset",
    "Model",
    "Splits",
    "TrainResult",
    "best_candidate_dice",
    "dice",
    "evaluate",
    "ged2",
    "generate_dataset",
    "hungarian_dice",
    "load_dataset",
    "sample_diversity",
    "save_dataset",
    "train",
]
