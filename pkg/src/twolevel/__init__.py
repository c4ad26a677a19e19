"""Photon statistics of the two-level laser: linearized noise theory and jump-process simulation."""

from .steady import (
    LaserParams,
    ParameterError,
    SteadyState,
    balance_residuals,
    load_params,
    params_from_dict,
    steady_state,
    validate_params,
)
from .noise import (
    fano_closed_form,
    fano_quadrature,
    intracavity_psd,
    photocurrent_psd,
    photocurrent_psd_closed_form,
    psd_peak,
    spectrum_sweep,
)

__version__ = "0.1.0"
