"""Simulator for decentralized stochastic optimization with momentum tracking."""

from .algorithms import (
    AlgorithmSpec,
    InitMode,
    NodeState,
    SwarmState,
    Variant,
    average_iterate,
    init_swarm,
    step,
    step_dsgd,
    step_dsgdm,
    step_momentum_tracking,
)
from .analysis import (
    RateBound,
    RateBoundInputs,
    heterogeneity_independence_test,
    mt_rate_bound,
    reference_sgdm_xbar,
)
from .config import ProblemConfig, RunConfig, TopologyConfig, X0Config, load_config
from .engine import RoundMetrics, RunResult, consensus_distance, run, sweep
from .exceptions import (
    ConfigError,
    DivergenceError,
    MixingMatrixError,
    SpectralGapError,
    TopologyError,
)
from .problem import (
    ObjectiveSuite,
    QuadraticProblem,
    dump_problem,
    global_gradient,
    global_minimizer,
    load_problem,
    measure_heterogeneity,
    synth_quadratic,
)
from .rng import RandomStream
from .topology import (
    Graph,
    MixingMatrix,
    TopologyKind,
    WeightScheme,
    build_mixing_matrix,
    build_topology,
    spectral_gap,
)

__version__ = "0.1.0"
