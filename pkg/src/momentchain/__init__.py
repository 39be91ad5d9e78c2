"""momentchain: discrete-time quantum evolutions as chains of linked moments.

Dense state-vector simulation of pre/post-selected histories: each time step
connects consecutive moments with an identity, unitary, collapse, or partial
link; von Neumann pointer meters read two-time differences without revealing
single-time values; and the spin protocol maps N moments of one spin onto
2N-1 spins with pair post-selection. A line-oriented scenario format and CLI
sit on top.
"""

from ._kernels import available_backends, backend
from .errors import (
    ConditioningImpossibleError,
    DimensionCapError,
    MomentChainError,
    RegisterNameError,
    ScenarioParseError,
    WraparoundError,
)
from .history import (
    HistoryChain,
    Link,
    MultiSystemChain,
    conditional_outcome_distribution,
    contract,
    decompose_collapse,
    history_probability,
    link_matrix,
    sample_history,
    sample_outcome_distribution,
)
from .meter import (
    CouplingEvent,
    PointerRegister,
    apply_coupling,
    difference_variance_sweep,
    partial_kraus_pair,
    partial_measurement,
    two_time_difference,
)
from .protocol import (
    MeasurementPlan,
    ProtocolInstance,
    build_initial_state,
    equivalence_report,
    post_select_bells,
    product_state_baseline,
    protocol_statistics,
    single_spin_oracle,
)
from .qcore import (
    Operator,
    RegisterLayout,
    StateVector,
    apply_operator,
    bell_basis,
    bell_state,
    condition_on,
    equal_up_to_global_phase,
    identity,
    ket,
    layout,
    make_spin_observable,
    named_state,
    partial_trace,
    pauli,
    project,
    projector_onto,
    rotation,
    singlet,
    tensor,
)
from .scenario import Scenario, parse_scenario, render_scenario, run_scenario
from .experiments import (
    builtin_scenarios,
    double_life_scenario,
    epr_scenario,
    run_double_life,
    run_epr,
)
from .stats import OutcomeStats, report

__version__ = "0.1.0"
