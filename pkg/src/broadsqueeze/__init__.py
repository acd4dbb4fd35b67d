"""Simulation and inference toolkit for broadband multimode squeezed vacuum
measured with a photon-number-resolving detector."""

__version__ = "0.1.0"

from .errors import PhysicsDomainError
from .fock import (
    CountHistogram,
    PhotonDistribution,
    apply_loss,
    compensate_loss,
    estimate_efficiency,
    fano,
    from_counts,
    g_factorial,
    klyshko_figures,
    mean_photon,
)
from .modes import CorrelationPoint, ModeReconstruction, fit_slope, invert_slope_to_mu, reconstruct_modes, solve_B
from .squeezer import (
    SqueezerSpec,
    g_multi_approx,
    g_multi_exact,
    mean_photon_total,
    multimode_distribution,
    single_mode_distribution,
    single_mode_reference,
    thermal_shape_functions,
    thermal_weights,
)
