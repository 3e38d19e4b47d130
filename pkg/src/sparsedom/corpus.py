"""Seeded test functions used by the command line and the test suite."""
from __future__ import annotations

import numpy as np

from .gridfunc import GridFunction

__all__ = ["random_function", "random_pair", "resolved_function", "resolved_corpus"]


def random_function(rng: np.random.Generator, n_cells: int = 1024, grid_level: int = -10) -> GridFunction:
    """Bounded nonnegative function on [0, 1): a noisy background, a random
    plateau, and a few tall spikes."""
    v = rng.random(n_cells) * rng.uniform(0.0, 1.0)
    a, b = np.sort(rng.integers(0, n_cells, 2))
    v[a:b + 1] += rng.uniform(0.0, 5.0)
    for _ in range(int(rng.integers(1, 5))):
        c = int(rng.integers(0, n_cells))
        w = int(rng.integers(1, 8))
        v[c:c + w] += rng.uniform(10.0, 1000.0)
    return GridFunction.from_array(v, grid_level)


def random_pair(rng: np.random.Generator, n_cells: int = 1024, grid_level: int = -10):
    return random_function(rng, n_cells, grid_level), random_function(rng, n_cells, grid_level)


def resolved_function(rng: np.random.Generator, coarse_level: int = -7, grid_level: int = -9) -> GridFunction:
    """Function constant on level ``coarse_level`` cells, stored on a finer grid,
    so that grid refinement leaves it unchanged."""
    n = 1 << -coarse_level
    v = rng.random(n) * 0.05
    for _ in range(int(rng.integers(1, 3))):
        v[int(rng.integers(0, n))] += rng.uniform(20.0, 200.0)
    return GridFunction.from_array(v, coarse_level).refine(coarse_level - grid_level)


def resolved_corpus(n_pairs: int = 25, seed: int = 2024, grid_level: int = -9) -> list:
    rng = np.random.default_rng(seed)
    return [(resolved_function(rng, grid_level=grid_level), resolved_function(rng, grid_level=grid_level))
            for _ in range(n_pairs)]
