"""homkit: homography estimation and robustness benchmarking toolkit."""

__version__ = "0.1.0"
