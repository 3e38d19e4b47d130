"""Sparse domination of Calderon-Zygmund operators on dyadic grids."""
from .a2 import PowerWeight, a2_sweep, discrete_a2
from .config import ExperimentConfig
from .estimator import SparseDomination
from .geometry import ConcentricBox, DyadicCube, Region, ScaleConstants, dilate, scale_constants
from .gridfunc import GridFunction, average, cz_decompose, maximal, maximal_superlevel, superlevel
from .kernels import BumpProfile, Kernel, Truncation, dini_integral, get_kernel, get_modulus, kernel_truncated
from .pairing import QuadratureConfig, apply_operator, check_localization, pair
from .sparse import (
    DominationCertificate,
    SparseFamily,
    SparseParams,
    apply_sparse,
    build_sparse,
    dominate,
    sparse_form,
    stopping_region,
)
from .whitney import WhitneyCover, check_cover, whitney_decompose

__version__ = "0.1.0"

__all__ = [
    "PowerWeight",
    "a2_sweep",
    "discrete_a2",
    "ExperimentConfig",
    "SparseDomination",
    "ConcentricBox",
    "DyadicCube",
    "Region",
    "ScaleConstants",
    "dilate",
    "scale_constants",
    "GridFunction",
    "average",
    "cz_decompose",
    "maximal",
    "maximal_superlevel",
    "superlevel",
    "BumpProfile",
    "Kernel",
    "Truncation",
    "dini_integral",
    "get_kernel",
    "get_modulus",
    "kernel_truncated",
    "QuadratureConfig",
    "apply_operator",
    "check_localization",
    "pair",
    "DominationCertificate",
    "SparseFamily",
    "SparseParams",
    "apply_sparse",
    "build_sparse",
    "dominate",
    "sparse_form",
    "stopping_region",
    "WhitneyCover",
    "check_cover",
    "whitney_decompose",
]
