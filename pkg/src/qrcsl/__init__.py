"""Quasirelativistic continuous spontaneous localization: numerical laboratory.

Modules: ``numerics`` (special functions, quadrature, Monte Carlo),
``kernels``, ``free_rates``, ``trajectories``, ``excitation`` and the
``cli`` front end.
"""
__version__ = "0.1.0"

from ._accel import BACKEND
from .numerics import AccuracyError, DomainError
from .params import ModelParams, RateResult

__all__ = ["BACKEND", "AccuracyError", "DomainError", "ModelParams", "RateResult", "__version__"]
