"""Random walks among time-varying conductances and their evolving-set processes."""
from .dyn_graph import (
    DynEnv, MonotonicityReport, laziness_coefficient, monotonicity_report,
    transition_matrix, transition_prob, vertex_conductance,
)
from .errors import (
    CapExceededError, ConfigError, EvosetError, HorizonError, InvalidStateError,
    NonMonotoneError, UnknownVertexError,
)
from .evolving_set import (
    SetDistribution, SetState, SuccessorLaw, conditioned_kernel, df_coupled_step, drift_check,
    exact_set_distribution, joint_exact_distribution, sample_step, successor_law,
)
from .exact_chain import heat_kernel, multi_step_kernel
from .graphs import e2, e3, from_document, to_document, zd_box
from .isoperimetry import IsoConfig, kappa, psi, r_condition

__version__ = "0.1.0"
