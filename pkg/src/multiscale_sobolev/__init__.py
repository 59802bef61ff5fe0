"""Multiscale square functions and the Sobolev-norm equivalences they satisfy.

Submodules:

- ``fields``: periodic grids, spectra, L^p norms
- ``radial``: the ball profile F and the constants M_j, L_j
- ``scales``: quadrature in log t
- ``constants``: the multiplier deficit and the p = 2 constants
- ``multiscale``: ball means, fractional Laplacian, square functions
- ``kernels``: fundamental solutions, K_t, Hörmander scans
- ``mms``: the square function on finite metric measure spaces
- ``cli``: the ``msobolev`` experiment driver
"""

from .constants import constant_I, constant_S0, multiplier_deficit
from .fields import GridSpec, ScalarField, SpectralField, forward_spectrum, inverse_spectrum, lp_norm, make_grid
from .multiscale import (
    AUTO,
    SmoothnessOrder,
    ball_mean,
    equivalence_report,
    frac_laplacian,
    recover_g,
    s0_square_function,
    square_function,
)
from .radial import ball_profile, laplacian_power_L, moment_M
from .scales import ScaleQuadrature, make_scale_quadrature

__version__ = "0.1.0"

__all__ = [
    "AUTO",
    "GridSpec",
    "ScalarField",
    "ScaleQuadrature",
    "SmoothnessOrder",
    "SpectralField",
    "ball_mean",
    "ball_profile",
    "constant_I",
    "constant_S0",
    "equivalence_report",
    "forward_spectrum",
    "frac_laplacian",
    "inverse_spectrum",
    "laplacian_power_L",
    "lp_norm",
    "make_grid",
    "make_scale_quadrature",
    "moment_M",
    "multiplier_deficit",
    "recover_g",
    "s0_square_function",
    "square_function",
]
