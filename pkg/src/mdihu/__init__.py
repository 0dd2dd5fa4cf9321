"""Fully implicit two-phase Darcy flow with buoyancy on 2D Cartesian grids.

Four half-interface upwinding schemes are available (1D-PPU, 1D-IHU,
MultiD-PPU and MultiD-IHU) together with a damped Newton solver, builders for
three benchmark problems and executable checks of the schemes' monotonicity
and bound-preservation properties.
"""

from .fluid import FluidModel, mobilities, relperm, vertex_chi
from .flux import SchemeConfig, limiter_eval, region_fluxes
from .grid import CartesianGrid, DualGrid, build_dual, build_grid, rotate_coords

__version__ = "0.1.0"

__all__ = [
    "CartesianGrid",
    "DualGrid",
    "FluidModel",
    "SchemeConfig",
    "build_dual",
    "build_grid",
    "limiter_eval",
    "mobilities",
    "region_fluxes",
    "relperm",
    "rotate_coords",
    "vertex_chi",
]
