"""Asynchronous approximate consensus ADMM over directed graphs.

A library plus a deterministic discrete-event simulator for distributed
optimization where nodes exchange messages over a digraph with bounded
integer delays.  The coupling variable of the ADMM split is computed by a
finite-time-terminating ratio-consensus protocol, so every node ends each
iteration holding a value within a prescribed tolerance of the network
average.
"""

from .admm import RunRecord, SolverConfig, run, rate_diagnostics
from .consensus import (
    ConsensusResult,
    ProtocolError,
    RatioState,
    TerminationState,
    minmax_step,
    ratio_step,
    run_minmax_consensus,
    run_ratio_consensus,
    run_terminating_consensus,
)
from .digraph import (
    Digraph,
    WeightMatrix,
    build_weights,
    diameter,
    is_strongly_connected,
    load_edge_list,
    random_strongly_connected,
    save_edge_list,
)
from .netsim import DelayModel, EventQueue, Message, MessageKind, broadcast
from .oracle import (
    GroundTruth,
    centralized_solution,
    exact_average,
    synchronous_ratio_oracle,
    synchronous_ratio_trajectory,
)
from .problems import (
    CostFunction,
    LeastSquaresCost,
    LeastSquaresInstance,
    generate_ls,
    load_instance,
    ls_prox,
    save_instance,
)

__all__ = [
    "ConsensusResult",
    "CostFunction",
    "DelayModel",
    "Digraph",
    "EventQueue",
    "GroundTruth",
    "LeastSquaresCost",
    "LeastSquaresInstance",
    "Message",
    "MessageKind",
    "ProtocolError",
    "RatioState",
    "RunRecord",
    "SolverConfig",
    "TerminationState",
    "WeightMatrix",
    "broadcast",
    "build_weights",
    "centralized_solution",
    "diameter",
    "exact_average",
    "generate_ls",
    "is_strongly_connected",
    "load_edge_list",
    "load_instance",
    "ls_prox",
    "minmax_step",
    "random_strongly_connected",
    "ratio_step",
    "run",
    "run_minmax_consensus",
    "run_ratio_consensus",
    "run_terminating_consensus",
    "save_edge_list",
    "save_instance",
    "synchronous_ratio_oracle",
    "synchronous_ratio_trajectory",
    "rate_diagnostics",
]
