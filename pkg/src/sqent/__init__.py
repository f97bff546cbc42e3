"""Squashed entanglement and entanglement of formation for finite truncations,
with energy-constrained continuity bounds."""

from .energy import (
    BoundReport,
    HamiltonianSpectrum,
    UnattainableEnergy,
    cmi_continuity_bound,
    em_continuity_bound,
    fannes_cmi_bound,
    finite_dim_esq_bound,
    gibbs_entropy,
    gibbs_state,
    regularized_bound,
    solve_beta,
    tightness_witness,
)
from .entropic import (
    EntropicInconsistency,
    binary_entropy,
    cmi,
    cmi_forms,
    cmi_truncated_sequence,
    conditional_entropy,
    entropy,
    mutual_information,
    relative_entropy,
    shannon_entropy,
    theta,
)
from .formation import PureDecomposition, concurrence, eof_upper, eof_via_classical_extension, wootters_eof
from .models import ModelStateSpec, build_state, convergence_run, dichotomy_probe
from .squashed import (
    ExtensionCertificate,
    SquashingChannel,
    bounds_sandwich,
    esq_lower,
    esq_sequence,
    esq_upper,
    markov_certificate,
    universal_extension_estimate,
)
from .state import (
    DensityOperator,
    LayoutError,
    LocalProjector,
    PureStateVector,
    StateError,
    SystemLayout,
    compress,
    partial_trace,
    purify,
    tensor,
    trace_distance,
)
from .stiefel import OptimizerConfig

__version__ = "0.1.0"
