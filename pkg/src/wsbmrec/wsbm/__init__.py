"""Weighted stochastic block model: likelihood, variational EM and model selection."""

from .families import FAMILIES, NormalWeight, PoissonExistence, PoissonWeight, get_family
from .inference import (
    ModelSelection,
    Priors,
    WsbmModel,
    communities,
    nearest_neighbors,
    select_k,
    vb_fit,
)
from .persist import load_model, save_model
from .kernels import BACKENDS, DEFAULT_BACKEND
from .likelihood import log_likelihood

__all__ = [
    "BACKENDS", "DEFAULT_BACKEND", "FAMILIES", "ModelSelection", "NormalWeight", "PoissonExistence",
    "PoissonWeight", "Priors", "WsbmModel", "communities", "get_family", "load_model",
    "log_likelihood", "nearest_neighbors", "save_model", "select_k", "vb_fit",
]
