"""Polynomial-expansion channel estimation for large-array uplink training.

Exact MMSE and MVU estimators, their truncated-series approximations
(PEACH, weighted W-PEACH) with closed-form errors, and a sliding-window
estimator of the W-PEACH weights.
"""

from .estimators import (
    MMSEEstimator,
    MVUEstimator,
    PEACHEstimator,
    WPEACHEstimator,
    WeightSystem,
    WeightVector,
    alpha_peach,
    alpha_wpeach,
    mmse_estimate,
    mmse_mse,
    mvu_estimate,
    mvu_variance,
    peach_estimate,
    peach_mse,
    wpeach_estimate,
    wpeach_mse,
    wpeach_weight_system,
    wpeach_weights_lstsq,
    wpeach_weights_optimal,
)
from .scenario import Scenario, SystemDims, identity_scenario, kronecker_scenario

__version__ = "0.1.0"
