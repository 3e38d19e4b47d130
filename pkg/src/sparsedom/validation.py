"""Input checks shared by the estimator and the command line."""
from __future__ import annotations

import numbers

import numpy as np

from .geometry import DyadicCube
from .gridfunc import GridFunction

__all__ = ["check_grid_function", "check_pair", "check_cube", "check_eta", "check_positive"]


def check_grid_function(f, grid_level: int = 0, dim: int | None = None, nonnegative: bool = True) -> GridFunction:
    """Accept a GridFunction or an array of cell values anchored at the origin."""
    if not isinstance(f, GridFunction):
        arr = np.asarray(f, dtype=float)
        if arr.ndim == 0:
            raise ValueError("expected an array of cell values, got a scalar")
        f = GridFunction.from_array(arr, grid_level)
    if dim is not None and f.dim != dim:
        raise ValueError(f"expected a {dim}-dimensional function, got {f.dim}")
    if nonnegative and not f.is_nonnegative():
        raise ValueError("function values must be nonnegative")
    return f


def check_pair(f1, f2, grid_level: int = 0):
    f1 = check_grid_function(f1, grid_level)
    f2 = check_grid_function(f2, grid_level, dim=f1.dim)
    if f1.grid_level != f2.grid_level:
        raise ValueError("both functions must live on the same grid")
    return f1, f2


def check_cube(cube, dim: int) -> DyadicCube:
    """Accept a DyadicCube, a ``{"level", "anchor"}`` mapping, or ``None`` for the unit cube."""
    if cube is None:
        return DyadicCube(0, (0,) * dim)
    if isinstance(cube, dict):
        cube = DyadicCube.from_json(cube)
    if not isinstance(cube, DyadicCube):
        raise TypeError(f"expected a DyadicCube, got {type(cube).__name__}")
    if cube.dim != dim:
        raise ValueError(f"root cube has dimension {cube.dim}, functions have {dim}")
    return cube


def check_eta(eta0) -> float:
    if not isinstance(eta0, numbers.Real) or not 0 < float(eta0) < 1:
        raise ValueError(f"eta0 must be a real number in (0, 1), got {eta0!r}")
    return float(eta0)


def check_positive(value, name: str, allow_none: bool = True):
    if value is None and allow_none:
        return None
    if not isinstance(value, numbers.Real) or not float(value) > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return float(value)
