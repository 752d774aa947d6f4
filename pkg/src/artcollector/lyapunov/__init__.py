"""Estimators of the top Lyapunov exponent nu(lam, theta)."""

from .boundary import edge_law, nu_boundary
from .cf import cf_certificate, cf_paths, cf_values, nu_cf
from .direct import nu_direct, run_lanes
from .estimate import LyapEstimate, consistent
from .gig import gig_diagonal_integral, nu_gig_diagonal
from .projective import (birkhoff_tau, contraction_theta, hilbert_metric, nu_transfer,
                         nu_via_ratio, transfer_certificate)

__all__ = [
    "LyapEstimate", "consistent", "nu_direct", "run_lanes", "nu_boundary", "edge_law",
    "nu_cf", "cf_certificate", "cf_values", "cf_paths", "nu_via_ratio", "nu_transfer",
    "transfer_certificate", "contraction_theta", "birkhoff_tau", "hilbert_metric",
    "nu_gig_diagonal", "gig_diagonal_integral",
]
