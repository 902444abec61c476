"""Retarded Green's functions of lattice models from differentiated
statevector circuits: deterministic parameter-shift and stochastic
simultaneous-perturbation estimators, exact oracles, and frequency-domain
post-processing."""

__version__ = "0.1.0"

from .estimators import (  # noqa: F401
    EstimatorConfig,
    GreenTrace,
    VarianceModel,
    estimate_fd,
    estimate_fermionic_gf,
    estimate_lcp,
    estimate_scp,
    fd_trace,
    lcp_point_variance,
    lcp_trace,
    predicted_variance,
)
from .models import (  # noqa: F401
    HamiltonianTerms,
    HubbardSpec,
    SpinChainSpec,
    SpectralData,
    TrotterPlan,
    build_heisenberg_terms,
    build_hubbard_terms_jw,
    ground_state_exact,
    hubbard_ground_state,
    lehmann_overlaps,
)
from .pauli import PauliString  # noqa: F401
from .statevec import (  # noqa: F401
    Gate,
    NoiseSpec,
    RngStream,
    StateVector,
    apply_depolarizing,
    apply_gate,
    expectation_pauli,
    sample_pauli_outcome,
)
