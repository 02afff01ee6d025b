"""W- and Dicke-state engineering on Ising-coupled qubit rings.

Library + CLI for preparing W and Dicke states in a ring of qubits under
global transverse control, using the dihedral-symmetry-reduced state space,
instantaneous pulse sequences, shaped continuous pulses, and robustness
analysis of the optimized protocols.
"""

from ._kernels import NUMBA_ENABLED
from .errors import (
    CapacityError,
    DomainError,
    IntegrationError,
    KrylovError,
    RingctlError,
)
from .model import RingModel, TargetState, dicke_state, fidelity, rydberg_coupling, w_state
from .nmr import (
    NmrOptConfig,
    NmrSequence,
    bisect_min_M,
    local_optimize,
    multistart_search,
    nmr_loss,
    simulate_sequence,
    total_interaction_time,
)
from .cw import (
    CwOptConfig,
    SinePulse,
    cw_loss,
    field_value,
    informed_multistart,
    seed_pulse,
    simplify_pulse,
)
from .propagate import (
    IntegratorConfig,
    KrylovConfig,
    apply_uxy,
    apply_uzz,
    dense_oracle,
    evolve_cw,
    expmv,
    integrate_schrodinger,
)
from .robustness import (
    eps_grid,
    parameter_ids,
    pearson_matrix,
    perturb,
    robustness_score,
    select_most_robust,
    sweep_1d,
    sweep_2d,
)
from .symmetry import (
    Orbit,
    ParityOperator,
    SymmetryBasis,
    apply_group_element,
    build_projector,
    enumerate_orbits,
    get_basis,
    parity_restricted_basis,
    reduce_operator,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
