"""mimocap: capacities and optimal transmit covariances for ergodic MIMO channels.

The library covers two transmitter-knowledge regimes:

* perfect side information: water-filling jointly over space and time with a
  single water level enforcing the long-term average power constraint
  (:mod:`mimocap.waterfill`, :mod:`mimocap.channels`);
* statistical side information: fixed-point optimization of the transmit
  covariance for arbitrary channel laws, via a known diagonalizing basis or a
  Cholesky-factor iteration (:mod:`mimocap.covopt`), with beamforming tests
  and SNR asymptotics in :mod:`mimocap.analysis`.

All rates are natural-log (nats per complex symbol) unless converted at the
CLI boundary.
"""

from .channels import (
    ChannelLaw,
    EmpiricalDensity,
    FiniteMixture,
    Interpolated,
    KroneckerGaussian,
    MatrixGaussian,
    PointMass,
    PointMassDensity,
    WishartDensity,
    empirical_density,
    expected_gram,
    law_from_json,
    law_to_json,
    onoff_density,
    sample,
    sample_batch,
    wishart_density,
)
from .covopt import (
    CovOptResult,
    GradMatrix,
    OptimizerOptions,
    fixed_point_diag,
    grad_matrix,
    iterate_general,
    kkt_residual_diag,
    kkt_residual_general,
    monotonicity_check,
)
from .analysis import (
    BeamformVerdict,
    beamform_boundary,
    beamform_opt_closed,
    beamform_opt_mc,
    high_snr_capacity,
    interp_study,
    low_snr_cov,
    wishart_approx,
    wishart_approx_covariance,
)
from .linalg import (
    chol_upper,
    expint_gamma0,
    herm_eig,
    log_det_plus,
    svd,
    ut_gram,
)
from .montecarlo import McEstimate, SeededStream, ergodic_mi, expect_matrix
from .waterfill import (
    InfeasibleError,
    WaterfillSolution,
    instantaneous_covariance,
    naive_avg_rate,
    papr,
    papr_bound,
    peak_limited_rate,
    power_density,
    st_capacity,
    st_water_level,
    waterfill_det,
)

__version__ = "0.1.0"
