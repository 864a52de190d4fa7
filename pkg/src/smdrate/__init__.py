"""Proximal stochastic mirror descent for relatively weakly convex problems.

Set ``SMDRATE_DISABLE_NUMBA=1`` before import to run the numpy fallbacks
instead of the compiled kernels.
"""
from ._accel import backend
from .benchmarks import Benchmark, load_benchmark, make_benchmark, save_benchmark
from .errors import (
    BoundaryPointError,
    ConfigError,
    DegenerateGapError,
    DivergenceError,
    IllPosedProxError,
    InconsistentInputsError,
    InvalidProbeError,
    NumericOverflowError,
    ProxSolverError,
    SMDError,
    StepSolverError,
    UnsupportedDiagnosticError,
)
from .geometry import (
    FeasibleSet,
    Geometry,
    bregman_divergence,
    entropy,
    euclidean,
    make_geometry,
    mirror_step,
    three_point_residual,
)
from .objective import (
    BOUNDED_MOMENT,
    SRC,
    CompositeObjective,
    StochasticOracle,
    certify_rwc,
    compose_subgradient,
    rwc_subgradient,
    src_moment_check,
)
from .regularizer import Regularizer
from .smd import (
    RunConfig,
    Schedule,
    Trace,
    constant_step_rhs,
    corollary_stepsize,
    deterministic_md_run,
    sample_output_index,
    smd_run,
    theorem_rhs,
)
from .stationarity import ProxResult, bregman_prox, envelope_gradient_diag, stationarity_at

__version__ = "0.1.0"
