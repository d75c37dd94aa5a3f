"""Weakness, sharpness and region measures for small ReLU classifiers."""
from . import data_io, fcv, mlp, regions, reparam, sharpness, stack_core, stats
from .simplex import BACKEND, KERNELS, get_kernel

__version__ = "0.1.0"

__all__ = ["BACKEND", "KERNELS", "data_io", "fcv", "get_kernel", "mlp", "regions", "reparam",
           "sharpness", "stack_core", "stats"]
