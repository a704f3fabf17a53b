"""Moment spaces of p x p matrix measures on [0, 1].

Canonical-moment coordinates, moment-space volumes, uniform sampling, and
Monte Carlo checks of the Gaussian-ensemble limit laws, for real symmetric
and complex Hermitian matrices.
"""

__version__ = "0.1.0"

from .canonical import (
    CanonicalSequence,
    ZetaSequence,
    canonical_from_zeta,
    canonical_to_moments,
    canonical_to_moments_batch,
    discrete_measure_canonical,
    discrete_measure_moments,
    moments_to_canonical,
    moments_to_canonical_batch,
    moments_via_k_matrix_oracle,
    nonsymmetric_canonical,
    numerical_jacobian_at_center,
    range_widths,
)
from .linalg import Field, Tolerance
from .moments import (
    MomentSequence,
    arcsine_moments,
    clt_matrix_A,
    extremal_moments,
    hankel_matrices,
    is_interior,
    log_volume,
    standardize_moment_vector,
)
