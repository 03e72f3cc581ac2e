"""Extreme value laws for randomly perturbed dynamical systems.

Simulate noisy maps, extract block maxima of distance observables, fit
generalised extreme value laws and estimate extremal indices.
"""

__version__ = "0.1.0"

from .dynamics import MapKind, MapSpec, NoiseSpec, OrbitConfig, random_orbit, sample_stationary, step
from .evt import GevFit, block_maxima, estimate_extremal_index, fit_gev_mle, ks_test
from .experiments import ExperimentConfig, Target, ei_sweep, figure_dataset, run_ensemble
from .observables import Family, Observable, distance

__all__ = [
    "MapKind",
    "MapSpec",
    "NoiseSpec",
    "OrbitConfig",
    "random_orbit",
    "sample_stationary",
    "step",
    "GevFit",
    "block_maxima",
    "estimate_extremal_index",
    "fit_gev_mle",
    "ks_test",
    "ExperimentConfig",
    "Target",
    "ei_sweep",
    "figure_dataset",
    "run_ensemble",
    "Family",
    "Observable",
    "distance",
]
