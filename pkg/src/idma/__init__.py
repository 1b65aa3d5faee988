"""Individualized dynamic mediation analysis with latent factor models."""

from ._backend import BACKEND
from .estimator import IdmaFit, fit_idma, mediation_effects
from .model import CoefficientField, FactorModel, Hyperparams, PanelData, validate_panel
from .simulation import generate_setting1, generate_setting2, run_replications
from .tuning import TuneGrid, tune_bic

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "IdmaFit",
    "fit_idma",
    "mediation_effects",
    "CoefficientField",
    "FactorModel",
    "Hyperparams",
    "PanelData",
    "validate_panel",
    "generate_setting1",
    "generate_setting2",
    "run_replications",
    "TuneGrid",
    "tune_bic",
]
