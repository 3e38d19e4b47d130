"""Weighted L^2 norms of sparse operators against power weights in one dimension."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, svds

from .geometry import ConcentricBox, DyadicCube
from .gridfunc import GridFunction
from .sparse import SparseFamily, SparseParams, build_sparse

__all__ = [
    "PowerWeight",
    "A2Point",
    "A2Sweep",
    "discrete_a2",
    "sparse_matrix_operator",
    "weighted_ratio",
    "singular_family",
    "a2_sweep",
]


@dataclass(frozen=True)
class PowerWeight:
    exponent: float
    center: float

    def cell_averages(self, grid_level: int, box: ConcentricBox) -> np.ndarray:
        """Exact averages of ``|x - center|^a`` over the cells of ``box``."""
        a = self.exponent
        if not -1 < a:
            raise ValueError("power weight is not locally integrable for exponent <= -1")
        h = 2.0 ** grid_level
        b = box.at_level(grid_level)
        edges = (np.arange(b.lo[0], b.hi[0] + 1) * h) - self.center
        prim = np.sign(edges) * np.abs(edges) ** (a + 1) / (a + 1)
        return np.diff(prim) / h


def discrete_a2(w: np.ndarray) -> float:
    """sup over lattice intervals of <w><1/w> for cell values ``w``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("the characteristic is implemented for one dimension")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weight must be positive and finite on every cell")
    inv = 1.0 / w
    if not np.all(np.isfinite(inv)):
        raise ValueError("inverse weight is not finite")
    pw = np.concatenate([[0.0], np.cumsum(w)])
    pi = np.concatenate([[0.0], np.cumsum(inv)])
    best = 0.0
    n = len(w)
    for m in range(1, n + 1):
        prod = (pw[m:] - pw[:-m]) * (pi[m:] - pi[:-m]) / (m * m)
        best = max(best, float(prod.max()))
    if not math.isfinite(best):
        raise ValueError("discrete characteristic is not finite")
    return best


def sparse_matrix_operator(family: SparseFamily, grid_level: int, box: ConcentricBox):
    """The averaging operator on the cells of ``box`` as a symmetric matvec."""
    b = box.at_level(grid_level)
    n = b.n_cells
    lo, hi, size = [], [], []
    for e in family.entries:
        d = e.dilated.at_level(grid_level)
        l, r = max(d.lo[0], b.lo[0]) - b.lo[0], min(d.hi[0], b.hi[0]) - b.lo[0]
        if r > l:
            lo.append(l)
            hi.append(r)
            size.append(d.n_cells)
    lo, hi = np.array(lo, dtype=np.int64), np.array(hi, dtype=np.int64)
    size = np.array(size, dtype=float)

    def apply(v):
        v = np.asarray(v, dtype=float).reshape(n)
        p = np.concatenate([[0.0], np.cumsum(v)])
        avg = (p[hi] - p[lo]) / size
        diff = np.zeros(n + 1)
        np.add.at(diff, lo, avg)
        np.add.at(diff, hi, -avg)
        return np.cumsum(diff[:-1])

    return apply, n


def weighted_ratio(
    family: SparseFamily,
    w: np.ndarray,
    grid_level: int,
    box: ConcentricBox,
    n_random: int = 8,
    seed: int = 0,
) -> float:
    """max over a battery of ||A f||_{L^2(w)} / ||f||_{L^2(w)}.

    The battery holds the top singular vector of ``w^{1/2} A w^{-1/2}`` (which
    attains the norm up to solver tolerance), the functions ``w^{-1} 1_I``
    for intervals centred at the cell of largest or smallest weight, and
    seeded random positive functions.
    """
    apply, n = sparse_matrix_operator(family, grid_level, box)
    sw = np.sqrt(np.asarray(w, dtype=float))
    op = LinearOperator(
        (n, n),
        matvec=lambda v: sw * apply(np.ravel(v) / sw),
        rmatvec=lambda v: apply(sw * np.ravel(v)) / sw,
        dtype=float,
    )

    def ratio(f):
        num = np.sqrt(np.sum(w * apply(f) ** 2))
        den = np.sqrt(np.sum(w * f ** 2))
        return float(num / den) if den > 0 else 0.0

    battery = []
    v0 = np.ones(n) / math.sqrt(n)
    _, _, vt = svds(op, k=1, v0=v0, tol=1e-10, solver="arpack")
    battery.append(np.abs(vt[0]) / sw)
    for c in {int(np.argmax(w)), int(np.argmin(w))}:
        m = 1
        while m <= n:
            f = np.zeros(n)
            f[max(0, c - m):min(n, c + m + 1)] = 1.0
            battery.append(f / w)
            m *= 2
    rng = np.random.default_rng(seed)
    battery.extend(rng.random((n_random, n)))
    return max(ratio(f) for f in battery)


def singular_family(
    grid_level: int = -12,
    center: float | None = None,
    exponent: float = -0.9,
    params: SparseParams = SparseParams(),
) -> SparseFamily:
    """Sparse family the construction assigns to ``f1 = f2 = |x - center|^exponent`` on [0, 1)."""
    root = DyadicCube(0, (0,))
    h = 2.0 ** grid_level
    center = 0.5 + 0.5 * h if center is None else center
    box = root.box.at_level(grid_level)
    f = GridFunction(grid_level, box, PowerWeight(exponent, center).cell_averages(grid_level, box))
    return build_sparse(f, f, root, params)


@dataclass(frozen=True)
class A2Point:
    exponent: float
    characteristic: float
    ratio: float


@dataclass(frozen=True)
class A2Sweep:
    points: list
    slope: float
    intercept: float
    family_entries: int
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "points": [
                {"exponent": p.exponent, "characteristic": p.characteristic, "ratio": p.ratio}
                for p in self.points
            ],
            "loglog_slope": self.slope,
            "loglog_intercept": self.intercept,
            "family_entries": self.family_entries,
            "config": self.config,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["exponent", "characteristic", "ratio"])
        for p in self.points:
            w.writerow([repr(p.exponent), repr(p.characteristic), repr(p.ratio)])
        return buf.getvalue()


def a2_sweep(
    exponents=None,
    grid_level: int = -12,
    center: float | None = None,
    family: SparseFamily | None = None,
    params: SparseParams = SparseParams(),
    seed: int = 0,
) -> A2Sweep:
    """Characteristic and weighted operator ratio for each power weight, plus
    the least-squares slope of log(ratio) against log(characteristic)."""
    if exponents is None:
        exponents = np.linspace(-0.9, 0.9, 13)
    h = 2.0 ** grid_level
    center = 0.5 + 0.5 * h if center is None else center
    if family is None:
        family = singular_family(grid_level, center, params=params)
    box = DyadicCube(0, (0,)).box.at_level(grid_level)
    points = []
    for a in exponents:
        w = PowerWeight(float(a), center).cell_averages(grid_level, box)
        char = discrete_a2(w)
        points.append(A2Point(float(a), char, weighted_ratio(family, w, grid_level, box, seed=seed)))
    x = np.log([p.characteristic for p in points])
    y = np.log([p.ratio for p in points])
    if np.ptp(x) > 0:
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope, intercept = 0.0, float(y.mean())
    config = {
        "grid_level": grid_level,
        "center": center,
        "seed": seed,
        "exponents": [float(a) for a in exponents],
        "c0_used": family.c0_used,
    }
    return A2Sweep(points, float(slope), float(intercept), len(family.entries), config)
