"""Channel spectrum benchmarking of quantum circuits.

Prepare superpositions of eigenstates of a target circuit, repeat the noisy
circuit, extract the damped oscillating modes of the measured signals with the
matrix pencil method and average the resulting channel eigenvalues into
process and stochastic fidelity estimates.
"""

from .circuits import Circuit, Gate, build_target, lift_degeneracy, randomized_compile
from .config import ExperimentConfig, load_config
from .exceptions import (
    CapacityError,
    CSBError,
    DegeneracyError,
    ExportError,
    UnsupportedCycleError,
    ValidationError,
)
from .noise import GroundTruth, NoiseModel, oracle_fidelities
from .pencil import MatrixPencil, ModeSet, Signal, estimate_modes
from .protocol import (
    ChannelSpectrumBenchmark,
    CSBReport,
    RepeatedResult,
    hoeffding_sample_size,
    run_repeated,
)

__all__ = [
    "Circuit",
    "Gate",
    "build_target",
    "lift_degeneracy",
    "randomized_compile",
    "ExperimentConfig",
    "load_config",
    "CSBError",
    "ValidationError",
    "CapacityError",
    "DegeneracyError",
    "ExportError",
    "UnsupportedCycleError",
    "NoiseModel",
    "GroundTruth",
    "oracle_fidelities",
    "Signal",
    "ModeSet",
    "MatrixPencil",
    "estimate_modes",
    "ChannelSpectrumBenchmark",
    "CSBReport",
    "RepeatedResult",
    "hoeffding_sample_size",
    "run_repeated",
]

__version__ = "0.1.0"
