"""Solvers and benchmarks for squared-loss Gromov-Wasserstein transport.

The central solver is an inexact projected gradient method whose projection
subproblems stop under a verifiable feasibility-residual condition; four
baseline solvers (conditional gradient with exact OT subproblems, entropic
projected gradient, entropic proximal point, Bregman alternating projection)
and a graph-alignment experiment harness round out the package.

Hot kernels run through a compiled extension when available;
``gwot.COMPILED_KERNELS`` reports which backend is active.
"""

from ._backend import COMPILED as COMPILED_KERNELS
from .baselines import (
    EntropicConfig,
    OtPlan,
    SolverFailure,
    bapg_solve,
    cg_solve,
    epgd_solve,
    ot_network_simplex,
    ppa_solve,
    sinkhorn,
)
from .graph_align import (
    AlignmentInstance,
    MetricsRecord,
    apsp_normalized,
    evaluate,
    flip_noise,
    gen_er_connected,
    hungarian_round,
    load_instance,
    make_instance,
    permute_graph,
    save_instance,
)
from .gw_core import (
    ConstraintImage,
    CostMatrix,
    Marginals,
    apply_A,
    apply_A_adjoint,
    gw_energy,
    gw_gradient,
    gw_quadratic,
    lipschitz_bound,
    marginal_residual,
)
from .ipg import (
    IpgConfig,
    IterationRecord,
    SolverTrace,
    ipg_solve,
    stationarity_measure,
    tolerance_schedule,
    verify_ipg_trace,
)
from .polytope_proj import (
    DualVector,
    ProjectionResult,
    dual_gradient,
    dual_value,
    primal_from_dual,
    round_to_polytope,
    solve_projection_exact,
    solve_projection_inexact,
)

__version__ = "0.1.0"
