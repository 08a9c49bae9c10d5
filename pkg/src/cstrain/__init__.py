"""Training-assisted compressed sensing.

Learn a sparse component matrix from easy training problems and use it to
solve harder sparse-recovery problems as l1 problems over a few combinator
coefficients.
"""

from .dictlearn import sparse_factorization
from .errors import CsTrainError
from .harness import ExperimentConfig, run_experiment, run_trial
from .l1 import SolverOptions, basis_pursuit, l1_oracle_bruteforce, min_l1_hyperplane
from .linalg import match_up_to_signed_scaled_permutation, rip_constant, stable_rank, support_size
from .pipeline import sparse_recovery, suggest_parameters, train, train_and_recover
from .rand_models import ModelSpec, RngStream

__version__ = "0.1.0"

__all__ = [
    "CsTrainError", "ExperimentConfig", "ModelSpec", "RngStream", "SolverOptions",
    "basis_pursuit", "l1_oracle_bruteforce", "match_up_to_signed_scaled_permutation",
    "min_l1_hyperplane", "rip_constant", "run_experiment", "run_trial", "sparse_factorization",
    "sparse_recovery", "stable_rank", "suggest_parameters", "support_size", "train",
    "train_and_recover",
]
