"""Coupled granulation: SOM crisp granules regulated by fuzzy or rough-set rules.

The growth of the SOM follows a linear or power law driven by the
regulator's test error, and :mod:`cogran.sweep` studies how that coupled
system moves between ordered and disordered neuron-growth regimes as the
coupling coefficients change.
"""
from .dataset import Dataset, NormalizationInfo, Record, gen_synthetic, load_csv, normalize, split
from .engine import (
    CouplingParams,
    NfisRegulator,
    RstRegulator,
    RunTrace,
    StubRegulator,
    grid_shape,
    growth_linear,
    growth_power,
    run_coupled,
)
from .estimators import SONFIS, SORSTAS, BatchSOM, RoughSetClassifier, SOMDiscretizer, TSKRegressor
from .sweep import SweepSpec, detect_transition, fluctuation, run_sweep

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "NormalizationInfo",
    "Record",
    "gen_synthetic",
    "load_csv",
    "normalize",
    "split",
    "CouplingParams",
    "NfisRegulator",
    "RstRegulator",
    "StubRegulator",
    "RunTrace",
    "grid_shape",
    "growth_linear",
    "growth_power",
    "run_coupled",
    "SweepSpec",
    "run_sweep",
    "fluctuation",
    "detect_transition",
    "BatchSOM",
    "SOMDiscretizer",
    "TSKRegressor",
    "RoughSetClassifier",
    "SONFIS",
    "SORSTAS",
]
