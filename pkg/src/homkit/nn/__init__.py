from .core import batchnorm_inference, conv2d, linear, maxpool2, relu
from .weights import WeightStore, load_weights, save_weights

__all__ = [
    "conv2d", "relu", "maxpool2", "linear", "batchnorm_inference",
    "WeightStore", "load_weights", "save_weights",
]
