"""Piecewise-constant functions on dyadic grids.

Besides the container itself this module holds the lattice maximal function,
superlevel sets, and the Calderon-Zygmund decomposition relative to a given
family of disjoint dyadic cubes.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from .geometry import ConcentricBox, DyadicCube, Region

__all__ = [
    "GridFunction",
    "CZDecomposition",
    "average",
    "maximal",
    "maximal_superlevel",
    "superlevel",
    "cz_decompose",
    "cube_averages",
]


def _as_box(b) -> ConcentricBox:
    return b.box if isinstance(b, DyadicCube) else b


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nonnegative function, constant on the level-``grid_level`` cells of ``box``.

    ``values[i]`` is the value on the cell with anchor ``box.lo + i``; the
    function vanishes outside ``box``.
    """

    grid_level: int
    box: ConcentricBox
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if self.box.level != self.grid_level:
            object.__setattr__(self, "box", self.box.at_level(self.grid_level))
        if v.shape != self.box.shape:
            raise ValueError(f"values shape {v.shape} does not match box {self.box.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_array(cls, values, grid_level: int = 0, lo=None) -> "GridFunction":
        values = np.asarray(values, dtype=np.float64)
        lo = (0,) * values.ndim if lo is None else tuple(lo)
        hi = tuple(l + n for l, n in zip(lo, values.shape))
        return cls(grid_level, ConcentricBox(grid_level, lo, hi), values)

    @classmethod
    def zeros(cls, box: ConcentricBox, grid_level: int | None = None) -> "GridFunction":
        grid_level = box.level if grid_level is None else grid_level
        b = box.at_level(grid_level)
        return cls(grid_level, b, np.zeros(b.shape))

    @classmethod
    def indicator(cls, box, grid_level: int, window: ConcentricBox | None = None) -> "GridFunction":
        b = _as_box(box).at_level(grid_level)
        f = cls(grid_level, b, np.ones(b.shape))
        return f if window is None else f.embed(window)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (self.dim * self.grid_level)

    @property
    def support_box(self) -> ConcentricBox:
        return self.box

    def integral(self) -> float:
        return math.fsum(self.values.ravel()) * self.cell_volume

    def l1(self) -> float:
        return math.fsum(np.abs(self.values).ravel()) * self.cell_volume

    def l2(self) -> float:
        return math.sqrt(math.fsum((self.values ** 2).ravel()) * self.cell_volume)

    def sup(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0))

    @cached_property
    def _prefix(self) -> np.ndarray:
        # extended precision keeps box sums accurate for small boxes
        p = np.zeros(tuple(n + 1 for n in self.values.shape), dtype=np.longdouble)
        inner = self.values.astype(np.longdouble)
        for ax in range(self.dim):
            inner = np.cumsum(inner, axis=ax)
        p[(slice(1, None),) * self.dim] = inner
        p.setflags(write=False)
        return p

    def box_sum(self, box) -> float:
        """Integral of the cell values over ``box`` (in cell counts, not volume)."""
        b = _as_box(box)
        if not b.aligned(self.grid_level):
            raise ValueError("box is not aligned to the grid")
        b = b.at_level(self.grid_level)
        common = self.box.intersect(b)
        if common.is_empty:
            return 0.0
        lo = [l - o for l, o in zip(common.lo, self.box.lo)]
        hi = [h - o for h, o in zip(common.hi, self.box.lo)]
        p = self._prefix
        total = np.longdouble(0)
        for corner in itertools.product((0, 1), repeat=self.dim):
            idx = tuple(h if c else l for c, l, h in zip(corner, lo, hi))
            sign = (-1) ** (self.dim - sum(corner))
            total += sign * p[idx]
        return float(total)

    def value_at(self, anchor) -> float:
        idx = tuple(int(a) - l for a, l in zip(anchor, self.box.lo))
        if any(i < 0 or i >= n for i, n in zip(idx, self.values.shape)):
            return 0.0
        return float(self.values[idx])

    def embed(self, box: ConcentricBox) -> "GridFunction":
        """Same function described on ``box`` (cropped or zero padded)."""
        b = box.at_level(self.grid_level)
        out = np.zeros(b.shape)
        common = self.box.intersect(b)
        if not common.is_empty:
            out[common.slices(b.lo)] = self.values[common.slices(self.box.lo)]
        return GridFunction(self.grid_level, b, out)

    def localize(self, box) -> "GridFunction":
        """``f * 1_box`` described on the part of ``box`` the grid resolves."""
        b = _as_box(box)
        if not b.aligned(self.grid_level):
            raise ValueError("localization box is finer than the grid")
        return self.embed(b.at_level(self.grid_level))

    def mask(self, region: Region) -> "GridFunction":
        """``f * 1_region`` on the same box."""
        r = region.refine(region.grid_level - self.grid_level) if region.grid_level > self.grid_level else region
        if r.grid_level != self.grid_level:
            raise ValueError("region is finer than the grid")
        return GridFunction(self.grid_level, self.box, self.values * r.in_window(self.box))

    def refine(self, k: int) -> "GridFunction":
        if k < 0:
            raise ValueError("refine expects k >= 0")
        v = self.values
        for ax in range(self.dim):
            v = np.repeat(v, 1 << k, axis=ax)
        return GridFunction(self.grid_level - k, self.box.at_level(self.grid_level - k), v)

    def support_region(self) -> Region:
        return Region(self.dim, self.grid_level, self.box.lo, self.values != 0)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid_level, self.box, values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        win = self.box.hull(other.box)
        return GridFunction(self.grid_level, win, self.embed(win).values + other.embed(win).values)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "grid_level": self.grid_level,
            "support_box": self.box.to_json(),
            "values": [repr(float(v)) for v in self.values.ravel()],
        }

    @classmethod
    def from_json(cls, obj) -> "GridFunction":
        if isinstance(obj, str):
            obj = json.loads(obj)
        box = ConcentricBox.from_json(obj["support_box"])
        vals = np.array([float(v) for v in obj["values"]], dtype=np.float64).reshape(box.shape)
        f = cls(int(obj["grid_level"]), box, vals)
        if f.dim != int(obj["dim"]):
            raise ValueError("dimension mismatch in serialized function")
        return f


def average(f: GridFunction, box) -> float:
    """Mean of ``f`` over ``box``."""
    b = _as_box(box)
    if b.is_empty:
        raise ValueError("average over an empty box")
    if not b.aligned(f.grid_level):
        raise ValueError("box is not aligned to the grid")
    g = b.at_level(f.grid_level)
    return f.box_sum(g) / g.n_cells


def cube_averages(prefix: np.ndarray, m: int) -> np.ndarray:
    """Averages over all side-``m`` lattice cubes fitting in the window."""
    d = prefix.ndim
    n = [s - 1 for s in prefix.shape]
    out_shape = tuple(k - m + 1 for k in n)
    total = np.zeros(out_shape, dtype=np.longdouble)
    for corner in itertools.product((0, 1), repeat=d):
        sl = tuple(slice(m, m + s) if c else slice(0, s) for c, s in zip(corner, out_shape))
        total += (-1) ** (d - sum(corner)) * prefix[sl]
    return (total / (m ** d)).astype(np.float64)


def _window_prefix(f: GridFunction, window: ConcentricBox) -> np.ndarray:
    return f.embed(window)._prefix


def _spread_max_exact(padded: np.ndarray, m: int) -> np.ndarray:
    out = padded
    for ax in range(padded.ndim):
        # running max over the trailing window [c-m+1, c] along this axis
        out = ndimage.maximum_filter1d(
            out, size=m, axis=ax, origin=(m - 1) // 2, mode="constant", cval=-np.inf
        )
    return out


def maximal(f: GridFunction, search_box: ConcentricBox | None = None) -> GridFunction:
    """Lattice maximal function on the cells of ``search_box``.

    The value on a cell is the largest average of ``f`` over lattice cubes
    contained in ``search_box`` that contain the cell.
    """
    if not f.is_nonnegative():
        raise ValueError("maximal function expects a nonnegative function")
    win = (search_box or f.box).at_level(f.grid_level)
    shape = win.shape
    prefix = _window_prefix(f, win)
    mass = float(prefix[tuple(-1 for _ in shape)])
    best = np.zeros(shape)
    d = f.dim
    for m in range(1, min(shape) + 1):
        if m > 1 and mass / m ** d <= best.min():
            break
        avg = cube_averages(prefix, m)
        best = np.maximum(best, _spread_max_exact(_pad(avg, shape), m))
    return GridFunction(f.grid_level, win, best)


def _pad(avg: np.ndarray, shape: tuple) -> np.ndarray:
    padded = np.full(shape, -np.inf)
    padded[tuple(slice(0, s) for s in avg.shape)] = avg
    return padded


def maximal_superlevel(f: GridFunction, threshold: float, search_box: ConcentricBox | None = None) -> Region:
    """``{maximal(f) > threshold}`` without forming the maximal function.

    Only cubes whose average can exceed ``threshold`` are visited, which bounds
    the cube side by ``(mass / threshold) ** (1/d)``.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    win = (search_box or f.box).at_level(f.grid_level)
    g = f.embed(win)
    mass = float(g._prefix[tuple(-1 for _ in win.shape)])
    d = f.dim
    nz = np.argwhere(g.values != 0)
    if len(nz) == 0 or mass <= threshold:
        return Region(d, f.grid_level, win.lo, np.zeros(win.shape, dtype=bool))
    # a cube with average above the threshold meets the support and has side
    # at most reach, so nothing outside this clipped window can be hit
    reach = int(math.floor((mass / threshold) ** (1.0 / d))) + 1
    lo = np.maximum(nz.min(axis=0) + np.asarray(win.lo) - reach, win.lo)
    hi = np.minimum(nz.max(axis=0) + np.asarray(win.lo) + 1 + reach, win.hi)
    win = ConcentricBox(f.grid_level, lo, hi)
    shape = win.shape
    prefix = _window_prefix(g, win)
    hit = np.zeros(shape, dtype=bool)
    m = 1
    while m <= min(shape) and mass / m ** d > threshold:
        avg = cube_averages(prefix, m)
        big = np.zeros(shape, dtype=bool)
        big[tuple(slice(0, s) for s in avg.shape)] = avg > threshold
        if big.any():
            hit |= _spread_max_exact(np.where(big, 1.0, -np.inf), m) > 0
        m += 1
    return Region(f.dim, f.grid_level, win.lo, hit)


def superlevel(mf: GridFunction, threshold: float) -> Region:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return Region(mf.dim, mf.grid_level, mf.box.lo, mf.values > threshold)


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    base: GridFunction
    family: list
    good: GridFunction
    bad_atoms: list
    level: float
    report: dict = field(default_factory=dict)

    def bad(self) -> GridFunction:
        return self.base.with_values(self.base.values - self.good.values)


def _paint(family, grid_level: int, window: ConcentricBox) -> np.ndarray:
    labels = np.full(window.shape, -1, dtype=np.int64)
    for j, q in enumerate(family):
        b = q.box.at_level(grid_level)
        if not window.contains_box(b):
            raise ValueError(f"cube {q} lies outside the decomposition window")
        sl = b.slices(window.lo)
        if np.any(labels[sl] >= 0):
            raise ValueError("family is not pairwise disjoint")
        labels[sl] = j
    return labels


def cz_decompose(
    f: GridFunction,
    family,
    lam: float,
    n_random_probes: int = 100,
    seed: int = 0,
) -> CZDecomposition:
    """Calderon-Zygmund decomposition of ``f`` adapted to ``family``.

    ``g`` equals ``f`` off the cubes and the cube average on each cube; the
    bad atoms are ``(f - <f>_L) 1_L``.  The report records the ratios that the
    classical estimates control: ``sup g / lam``, ``sum ||b_L||_1 / ||f||_1``
    and the largest ``<|b|>_R / lam`` over the probe cubes ``R``.
    """
    if lam <= 0:
        raise ValueError("level must be positive")
    family = list(family)
    for q in family:
        if q.level < f.grid_level:
            raise ValueError(f"cube {q} is finer than the grid")
    win = f.box
    for q in family:
        win = win.hull(q.box.at_level(f.grid_level))
    fw = f.embed(win)
    _paint(family, f.grid_level, win)  # rejects overlaps and cubes outside the window
    vals = fw.values
    good = vals.copy()
    atoms = []
    for j, q in enumerate(family):
        b = q.box.at_level(f.grid_level)
        sl = b.slices(win.lo)
        block = vals[sl]
        mean = math.fsum(block.ravel()) / block.size
        good[sl] = mean
        atoms.append((q, GridFunction(f.grid_level, b, block - mean)))
    g = GridFunction(f.grid_level, win, good)
    bad = vals - good
    f_l1 = fw.l1()
    f_sup = fw.sup()
    vol = fw.cell_volume
    recon = float(np.abs(vals - good - bad).max()) if vals.size else 0.0
    mean_zero = max((abs(a.integral()) for _, a in atoms), default=0.0)
    bad_l1 = math.fsum(a.l1() for _, a in atoms)

    absb = GridFunction(f.grid_level, win, np.abs(bad))
    probes = _probe_boxes(family, f.grid_level, win, n_random_probes, seed)
    probe_ratio = 0.0
    for pb in probes:
        probe_ratio = max(probe_ratio, average(absb, pb) / lam)
    report = {
        "lambda": lam,
        "good_sup_over_lambda": g.sup() / lam,
        "bad_l1_over_f_l1": bad_l1 / f_l1 if f_l1 > 0 else 0.0,
        "bad_l1": bad_l1,
        "f_l1": f_l1,
        "probe_ratio": probe_ratio,
        "n_probes": len(probes),
        "reconstruction_residual": recon,
        "max_atom_mean": mean_zero,
        "f_sup": f_sup,
        "cell_volume": vol,
    }
    return CZDecomposition(fw, family, g, atoms, lam, report)


def _probe_boxes(family, grid_level, window, n_random, seed):
    """Dyadic ancestors of each cube up to the window size, plus random lattice cubes."""
    rng = np.random.default_rng(seed)
    top_side = max(window.shape)
    out = []
    seen = set()
    for q in family:
        a = q
        while True:
            b = a.box.at_level(grid_level)
            if b.shape[0] > 2 * top_side:
                break
            key = (a.level, a.anchor)
            if key not in seen:
                seen.add(key)
                out.append(b)
            a = a.parent()
    if family:
        for _ in range(n_random):
            q = family[int(rng.integers(len(family)))]
            b = q.box.at_level(grid_level)
            side = b.shape[0]
            m = int(rng.integers(side, max(side, top_side) + 1))
            lo = [int(l - rng.integers(0, m - side + 1)) for l in b.lo]
            out.append(ConcentricBox(grid_level, lo, [l + m for l in lo]))
    return out
