"""Shared inputs of the acceptance suite and the regression baselines."""
from __future__ import annotations

import numpy as np

from sparsedom.geometry import Region, scale_constants
from sparsedom.gridfunc import GridFunction, cz_decompose, maximal_superlevel
from sparsedom.kernels import BumpProfile, get_kernel
from sparsedom.corpus import resolved_corpus
from sparsedom.geometry import DyadicCube
from sparsedom.sparse import SparseParams, dominate
from sparsedom.whitney import whitney_decompose

ROOT1 = DyadicCube(0, (0,))
CORPUS_SEED = 2024
CORPUS_GRID = -9


def random_region(rng, d):
    """Union of random balls and squares in the unit cube with a few holes."""
    n = 1024 if d == 1 else 64
    shape = (n,) * d
    grids = np.indices(shape)
    mask = np.zeros(shape, dtype=bool)
    for _ in range(int(rng.integers(1, 5))):
        c = rng.uniform(0, n, d).reshape((d,) + (1,) * d)
        r = rng.uniform(n / 8, n / 2)
        if rng.random() < 0.5:
            mask |= ((grids - c) ** 2).sum(axis=0) < r * r
        else:
            mask |= np.all(np.abs(grids - c) < r, axis=0)
    mask &= rng.random(shape) < 0.999
    return Region(d, -int(np.log2(n)), (0,) * d, mask)


def cz_case(seed: int):
    rng = np.random.default_rng(seed)
    v = rng.random(512) * rng.uniform(0.05, 0.5)
    for _ in range(int(rng.integers(1, 4))):
        v[int(rng.integers(0, 512))] += rng.uniform(50, 500)
    f = GridFunction.from_array(v, -9)
    lam = float(rng.uniform(1.0, 4.0))
    omega = maximal_superlevel(f, lam)
    cover = whitney_decompose(omega, scale_constants(1), -9)
    return cz_decompose(f, cover.cubes + cover.frontier, lam, seed=seed)


def domination_runs(floors=(-9, -10, -11)):
    """Certificates for the frozen corpus on its own grid, one level finer,
    and at each floor in ``floors``."""
    kernel, profile = get_kernel("hilbert"), BumpProfile()
    out = []
    for f1, f2 in resolved_corpus(25, CORPUS_SEED, CORPUS_GRID):
        base = dominate(kernel, profile, f1, f2, ROOT1)
        fine = dominate(kernel, profile, f1.refine(1), f2.refine(1), ROOT1)
        by_floor = [dominate(kernel, profile, f1, f2, ROOT1, SparseParams(s_floor=s)) for s in floors]
        out.append((base, fine, by_floor))
    return out
