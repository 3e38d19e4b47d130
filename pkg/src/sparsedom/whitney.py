"""Whitney decomposition of a cell region, truncated at a floor level."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import ndimage

from .geometry import (
    ConcentricBox,
    DyadicCube,
    Region,
    ScaleConstants,
    dilate,
    dilate_box,
    dist_to_complement,
)

__all__ = ["WhitneyCover", "whitney_decompose", "whitney_thresholds", "check_cover"]


def _lower_threshold(c_w: Fraction, d: int, ell: int) -> int:
    """Smallest integer m with sqrt(m) >= (c_w - sqrt(d)) * ell."""
    a = c_w * ell
    b = d * ell * ell

    def ok(m: int) -> bool:
        # sqrt(m) + sqrt(b) >= a
        if a * a <= b:
            return True
        rhs = a * a + b - m
        if rhs <= 0:
            return True
        return 4 * a * a * b >= rhs * rhs

    hi = max(1, math.ceil(a * a))
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def whitney_thresholds(constants: ScaleConstants, ell: int) -> tuple:
    """Integer squared-distance bounds for a cube of side ``ell`` units.

    A cube satisfies both distance bounds iff ``lo <= dist^2 <= hi``.
    """
    lo = _lower_threshold(constants.c_w, constants.dim, ell)
    hi = math.floor(4 * constants.c_w ** 2 * ell * ell)
    return lo, hi


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    region: Region
    constants: ScaleConstants
    cubes: list
    frontier: list
    s_floor: int
    # squared distance to the complement of every cube, in units 4**s_floor
    cube_dist_sq: list = field(default_factory=list, repr=False)

    @property
    def covered_measure(self) -> Fraction:
        return sum((c.measure for c in self.cubes), Fraction(0)) + sum(
            (c.measure for c in self.frontier), Fraction(0)
        )

    @property
    def frontier_measure(self) -> Fraction:
        return sum((c.measure for c in self.frontier), Fraction(0))

    @cached_property
    def n_cmp(self) -> int:
        """Largest level gap between cubes whose Lambda_d-dilations meet."""
        if len(self.cubes) < 2:
            return 0
        lam = self.constants.lambda_d
        u = min(c.level for c in self.cubes)
        boxes = np.array(
            [dilate(c, lam).at_level(u).lo + dilate(c, lam).at_level(u).hi for c in self.cubes],
            dtype=np.int64,
        )
        d = self.constants.dim
        lo, hi = boxes[:, :d], boxes[:, d:]
        levels = np.array([c.level for c in self.cubes])
        best = 0
        for i in range(len(self.cubes)):
            meet = np.all((lo[i] < hi) & (lo < hi[i]), axis=1)
            best = max(best, int(np.abs(levels[meet] - levels[i]).max()))
        return best

    def to_json(self) -> dict:
        c = self.constants.c_w
        return {
            "cubes": [q.to_json() for q in self.cubes],
            "frontier": [q.to_json() for q in self.frontier],
            "c_w": f"{c.numerator}/{c.denominator}",
            "s_floor": self.s_floor,
        }


def _min_pool(a: np.ndarray) -> np.ndarray:
    shape = []
    for n in a.shape:
        shape += [n // 2, 2]
    axes = tuple(range(1, 2 * a.ndim, 2))
    return a.reshape(shape).min(axis=axes)


def _upsample(a: np.ndarray) -> np.ndarray:
    for ax in range(a.ndim):
        a = np.repeat(a, 2, axis=ax)
    return a


def _cell_distances(mask: np.ndarray) -> np.ndarray:
    """Exact squared distance from each cell to the closed complement.

    For unit lattice cells the distance between two closed cells equals the
    smallest distance between their corners, so an exact distance transform
    on the corner lattice suffices.  Everything outside ``mask`` counts as
    complement.
    """
    d = mask.ndim
    comp = np.pad(~mask, 1, constant_values=True)
    # corner p touches cells p-1 and p along every axis
    feature = np.zeros(tuple(n + 1 for n in mask.shape), dtype=bool)
    for offs in np.ndindex(*(2,) * d):
        sl = tuple(slice(o, o + n + 1) for o, n in zip(offs, mask.shape))
        feature |= comp[sl]
    _, idx = ndimage.distance_transform_edt(~feature, return_distances=True, return_indices=True)
    grid = np.indices(feature.shape)
    corner_d2 = ((idx - grid).astype(np.int64) ** 2).sum(axis=0)
    cell_d2 = None
    for offs in np.ndindex(*(2,) * d):
        sl = tuple(slice(o, o + n) for o, n in zip(offs, mask.shape))
        part = corner_d2[sl]
        cell_d2 = part if cell_d2 is None else np.minimum(cell_d2, part)
    return cell_d2


def whitney_decompose(region: Region, constants: ScaleConstants, s_floor: int | None = None) -> WhitneyCover:
    """Whitney cubes of ``region`` down to level ``s_floor``.

    Candidates are the dyadic cubes ``L`` with level at least ``s_floor`` whose
    exact distance to the complement satisfies
    ``(C_W - sqrt(d)) l(L) <= dist(L, complement) <= 2 C_W l(L)``;
    every cube of the layer construction is such a candidate.  The emitted
    cubes are the maximal candidates.  Points of the region not covered by any
    candidate are returned as level ``s_floor`` frontier cells.
    """
    if region.dim != constants.dim:
        raise ValueError("region and constants disagree on the dimension")
    if s_floor is None:
        s_floor = region.grid_level
    if s_floor > region.grid_level:
        raise ValueError("s_floor must not be coarser than the region grid")
    d = region.dim
    if region.is_empty:
        return WhitneyCover(region, constants, [], [], s_floor)
    u = s_floor
    r = region.crop().refine(region.grid_level - u)
    extent = max(r.mask.shape)
    # candidates need dist >= (C_W - sqrt d) l, and dist <= extent
    slack = float(constants.c_w) - math.sqrt(d)
    top_len = max(1.0, extent / slack)
    top = u + max(0, math.ceil(math.log2(top_len))) + 1
    step = 1 << (top - u)
    lo = [((o - 1) // step) * step for o in r.origin]
    hi = [-((-(o + n + 1)) // step) * step for o, n in zip(r.origin, r.mask.shape)]
    win = ConcentricBox(u, lo, hi)
    mask = r.in_window(win)

    dist = {u: _cell_distances(mask)}
    for s in range(u + 1, top + 1):
        dist[s] = _min_pool(dist[s - 1])

    cand = {}
    for s in range(u, top + 1):
        lo_t, hi_t = whitney_thresholds(constants, 1 << (s - u))
        cand[s] = (dist[s] >= lo_t) & (dist[s] <= hi_t)

    cubes, cube_d2 = [], []
    above = np.zeros(dist[top].shape, dtype=bool)
    for s in range(top, u - 1, -1):
        emit = cand[s] & ~above
        base = np.asarray(lo, dtype=np.int64) >> (s - u)
        for idx in np.argwhere(emit):
            cubes.append(DyadicCube(s, tuple(int(v) for v in idx + base)))
            cube_d2.append(int(dist[s][tuple(idx)]))
        covered = above | cand[s]
        if s > u:
            above = _upsample(covered)
    frontier_mask = mask & ~covered
    base = np.asarray(lo, dtype=np.int64)
    frontier = [DyadicCube(u, tuple(int(v) for v in idx + base)) for idx in np.argwhere(frontier_mask)]
    order = sorted(range(len(cubes)), key=lambda i: (cubes[i].level, cubes[i].anchor))
    return WhitneyCover(
        region,
        constants,
        [cubes[i] for i in order],
        sorted(frontier),
        s_floor,
        [cube_d2[i] for i in order],
    )


def check_cover(cover: WhitneyCover) -> dict:
    """Recheck every cube of ``cover`` against the region with exact integers.

    Distances come from the box-to-cell formula in the geometry module, not
    from the distance transform used to build the cover.  The report lists
    violations of the two distance bounds, of ``2 Lambda L`` lying inside the
    region, of pairwise disjointness, and of exact coverage.
    """
    region = cover.region
    c = cover.constants
    violations = []
    for q in cover.cubes:
        dc = dist_to_complement(q, region)
        ell = 1 << (q.level - dc.unit_level)
        lo, hi = whitney_thresholds(c, ell)
        if not lo <= dc.squared <= hi:
            violations.append({"cube": q.to_json(), "check": "distance", "dist_sq": dc.squared, "bounds": [lo, hi]})
        if not region.contains_box(dilate_box(q, 2 * c.lambda_d)):
            violations.append({"cube": q.to_json(), "check": "dilation_inside"})
    for q in cover.frontier:
        if not region.contains_box(q.box):
            violations.append({"cube": q.to_json(), "check": "frontier_inside"})
    level = min([region.grid_level, cover.s_floor])
    r = region.refine(region.grid_level - level)
    win = r.window
    counts = np.zeros(win.shape, dtype=np.int64)
    outside = 0
    for q in list(cover.cubes) + list(cover.frontier):
        b = q.box.at_level(level)
        common = b.intersect(win)
        counts[common.slices(win.lo)] += 1
        outside += b.n_cells - common.n_cells
    overlap = int((counts > 1).sum())
    if overlap:
        violations.append({"check": "overlap", "cells": overlap})
    covered = counts > 0
    exact = outside == 0 and bool(np.array_equal(covered, r.mask))
    if not exact:
        violations.append({"check": "coverage", "outside_cells": outside})
    return {
        "n_cubes": len(cover.cubes),
        "n_frontier": len(cover.frontier),
        "covered_measure": str(cover.covered_measure),
        "region_measure": str(region.measure),
        "violations": violations,
        "passed": not violations,
    }
