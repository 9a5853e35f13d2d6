"""seqfisher: Fisher information of sequential quantum measurement records.

A probe evolves and is projectively measured in repeated cycles without
resetting; this package samples the resulting correlated outcome records,
computes their Fisher information exactly and by Monte-Carlo, and produces
the memory-loss, rank-collapse, and resource-budget diagnostics for spin
chains, a cavity-QED model, and a dissipative chain.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config
from .diagnostics import (
    CurveSeries,
    WignerGrid,
    jc_filter_snapshot,
    memory_loss_curve,
    rank_collapse_curve,
    wigner,
)
from .engine import (
    StepOutcome,
    TrajectoryRecord,
    TrajectoryTree,
    accumulate_operator,
    enumerate_tree,
    paired_trajectory,
    protocol_step,
    sample_trajectory,
    sample_trajectory_batch,
)
from .errors import BranchCapExceeded, ConfigError, ContractError, TrajectoryAborted
from .fisher import (
    FisherSeries,
    GainReport,
    TimeBudgetReport,
    exact_fisher,
    gain_analysis,
    mc_fisher,
    recursion_identity_check,
    step_fisher_contribution,
    time_budget_analysis,
)
from .linalg import (
    ProbeState,
    SubsystemLayout,
    fidelity,
    haar_random_unitary,
    random_pure_state,
    singular_ratio,
    tensor_embed,
    unitary_propagator,
)
from .models import (
    MeasurementScheme,
    ModelSpec,
    build_heisenberg,
    build_ising,
    build_jc,
    build_lindblad_superop,
    coherent_state,
    lindblad_propagator,
    measurement_scheme,
)
from .protocol import Protocol, bernoulli_protocol, compile_protocol, custom_protocol
