"""Spectral correlations of twin beams from modulational instability in gas-filled hollow-core fiber."""
from .dispersion import ARGON, FiberGasSystem, FiberGeometry, GasState, TaylorDispersion, find_zdw
from .ensemble import ShotEnsemble
from .errors import TwinbeamError
from .pump import PumpGrid, PumpPulse, synthesize_pump
from .sampler import SamplerVariant, sample_ensemble
from .schmidt import SchmidtDecomposition, highgain_weights, schmidt_decompose

__version__ = "0.1.0"

__all__ = [
    "ARGON", "FiberGasSystem", "FiberGeometry", "GasState", "TaylorDispersion", "find_zdw",
    "ShotEnsemble", "TwinbeamError", "PumpGrid", "PumpPulse", "synthesize_pump",
    "SamplerVariant", "sample_ensemble", "SchmidtDecomposition", "highgain_weights",
    "schmidt_decompose",
]
