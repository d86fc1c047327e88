"""Dynamical structure factors of 1D spin chains from simulated perturbation protocols."""
__version__ = "0.1.0"

from .errors import (
    AlignmentError,
    AliasingError,
    ConfigError,
    ConvergenceError,
    DsfError,
    InvalidModelError,
    NormalizationError,
    SizeLimitError,
    StructuralError,
)
from .model import PRESETS, PauliTerm, SpinChainModel, build_nn_xxz, build_nnn_xxz, preset_model
from .circuit import build_plan
from .exact import Statevector, lanczos_ground_state
from .mps import MPS, mps_ground_state
from .rgf import RgfGrid, run_protocol
from .spectrum import DsfGrid, dsf_pipeline, resolution_report, sum_rule_normalize
from .noise import NoiseSpec, noisy_protocol
from .metrics import compare, nqfi, ssim, two_tangle

__all__ = [
    "AlignmentError", "AliasingError", "ConfigError", "ConvergenceError", "DsfError",
    "InvalidModelError", "NormalizationError", "SizeLimitError", "StructuralError",
    "PRESETS", "PauliTerm", "SpinChainModel", "build_nn_xxz", "build_nnn_xxz", "preset_model",
    "build_plan", "Statevector", "lanczos_ground_state", "MPS", "mps_ground_state",
    "RgfGrid", "run_protocol", "DsfGrid", "dsf_pipeline", "resolution_report",
    "sum_rule_normalize", "NoiseSpec", "noisy_protocol", "compare", "nqfi", "ssim", "two_tangle",
]
