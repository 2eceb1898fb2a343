"""Toy-scale training for the homography estimation toolkit."""

from .errors import DataError, DivergenceDetected, TrainerError
from .hwts import load_hwts, save_hwts
from .train import (
    TrainConfig,
    mean_corner_error,
    train,
    train_hh_stack,
    train_noise_curriculum,
    zero_predictor_baseline,
)

__all__ = [
    "DataError",
    "DivergenceDetected",
    "TrainerError",
    "TrainConfig",
    "load_hwts",
    "save_hwts",
    "mean_corner_error",
    "train",
    "train_hh_stack",
    "train_noise_curriculum",
    "zero_predictor_baseline",
]

__version__ = "0.1.0"
