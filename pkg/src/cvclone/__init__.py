"""Simulation of linear-optics cloning of phase-conjugate coherent states."""

from .cloning import (
    CloneReport,
    CloneStats,
    CloningConfig,
    alphabet_average_fidelity,
    clone_variance,
    conventional_fidelity,
    fidelity_gap_sweep,
    optimal_transmission,
    pc_fidelity,
    run_machine_exact,
    run_machine_unitary,
)
from .errors import InvalidArgument, NumericalError
from .experiment import (
    ExperimentPlan,
    RunRecord,
    calibrate_gains,
    efficiency_correct,
    measure_cloning_noise,
    reproduce_published_run,
    run_experiment,
)
from .fidelity import fidelity_from_variances
from .gaussian import GaussianState, SymplecticOp, coherent, vacuum
from .measurement import DetectorModel, FeedforwardGains, ideal_g1

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "alphabet_average_fidelity",
    "calibrate_gains",
    "clone_variance",
    "CloneReport",
    "CloneStats",
    "CloningConfig",
    "coherent",
    "conventional_fidelity",
    "DetectorModel",
    "efficiency_correct",
    "ExperimentPlan",
    "FeedforwardGains",
    "fidelity_from_variances",
    "fidelity_gap_sweep",
    "GaussianState",
    "ideal_g1",
    "InvalidArgument",
    "measure_cloning_noise",
    "NumericalError",
    "optimal_transmission",
    "pc_fidelity",
    "reproduce_published_run",
    "run_experiment",
    "run_machine_exact",
    "run_machine_unitary",
    "RunRecord",
    "SymplecticOp",
    "vacuum",
]
