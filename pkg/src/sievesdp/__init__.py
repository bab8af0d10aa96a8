"""Coordinate facial-reduction presolver for semidefinite programs."""

from .gen import (
    gen_diagonal_pair,
    gen_example1,
    gen_messy,
    gen_planted,
    gen_posgap,
    gen_posgap_eps,
    posgap_optimal_pair,
    similarity_transform,
)
from .io import ParseError, read_certificate, read_sdpa, read_solution, write_certificate, write_sdpa, write_solution
from .linalg import ConvergenceError, min_eigenvalue, pd_check
from .metrics import (
    SIEVE_INFEASIBLE,
    DimacsErrors,
    SolveReport,
    dimacs_errors,
    help_code,
    reduction_stats,
)
from .model import (
    BlockStructure,
    Certificate,
    Constraint,
    Coordinate,
    ReductionStep,
    SdpProblem,
    SieveOutcome,
    Solution,
    StepKind,
    SymBlockMatrix,
    validate,
)
from .recovery import RecoveryOptions, RecoveryResult, basic_recovery, ideal_recovery_hook, pad_primal, restrict_primal
from .sieve import SieveIterationLimit, SieveOptions, Verdict, classify_constraint, sieve

__version__ = "0.1.0"
