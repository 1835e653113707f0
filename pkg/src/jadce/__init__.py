"""Joint activity detection and channel estimation for wideband massive access."""

from .channel import build_dictionaries, synthesize_device, synthesize_population
from .kernels import BACKEND
from .sensing import SensingEnsemble, add_noise, adjoint, forward, generate_ensemble
from .solver import SolverConfig, SolveResult, detect_activity, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "SensingEnsemble",
    "SolveResult",
    "SolverConfig",
    "add_noise",
    "adjoint",
    "build_dictionaries",
    "detect_activity",
    "forward",
    "generate_ensemble",
    "solve",
    "synthesize_device",
    "synthesize_population",
]
