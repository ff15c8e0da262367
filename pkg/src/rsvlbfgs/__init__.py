"""Riemannian stochastic variance-reduced L-BFGS and baselines."""
from .manifold import BaseMismatchError, DomainError, Euclidean, Manifold, ManifoldError
from .sphere import Sphere
from .spd import SPD, sym_funcs
from .problems import (
    EigData,
    FiniteSumProblem,
    KarcherData,
    KarcherProblem,
    OracleError,
    QuadraticProblem,
    RayleighProblem,
    eig_error,
    gen_eig_data,
    gen_spd_data,
    karcher_error,
    karcher_oracle,
    top_eig_oracle,
)
from .lbfgs import OPTION1, OPTION2, CorrectionPair, LbfgsMemory, two_loop, update_memory
from .optimizers import (
    DivergenceError,
    OptimizerConfig,
    RunTrace,
    run_rsv_lbfgs,
    run_rsvrg,
    run_vr_pca,
    vr_gradient,
)

__version__ = "0.1.0"
