"""Exact dyadic geometry on integer lattices.

A point set at level ``s`` is described by integer anchors; the physical
coordinate of anchor ``a`` is ``a * 2**s``.  Every comparison in this module
is carried out on Python integers or :class:`fractions.Fraction` values, so
nothing here depends on floating point rounding.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "DyadicCube",
    "ConcentricBox",
    "Region",
    "ScaleConstants",
    "ComplementDistance",
    "Annulus",
    "scale_constants",
    "dilate",
    "dilate_box",
    "dist_to_complement",
    "box_distance_sq",
    "scale_index",
    "annulus",
    "ceil_sqrt",
]


def ceil_sqrt(n: int) -> int:
    """Smallest integer ``r`` with ``r*r >= n``."""
    if n <= 0:
        return 0
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def _pow2(k: int) -> Fraction:
    return Fraction(2) ** k


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Half-open cube ``prod_i [a_i 2^s, (a_i+1) 2^s)``."""

    level: int
    anchor: tuple

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(int(a) for a in self.anchor))
        if not self.anchor:
            raise ValueError("cube needs at least one coordinate")

    @property
    def dim(self) -> int:
        return len(self.anchor)

    @property
    def side(self) -> Fraction:
        return _pow2(self.level)

    @property
    def measure(self) -> Fraction:
        return _pow2(self.level * self.dim)

    @property
    def center(self) -> tuple:
        return tuple((a + Fraction(1, 2)) * self.side for a in self.anchor)

    @property
    def diameter_sq(self) -> Fraction:
        return self.dim * _pow2(2 * self.level)

    @property
    def box(self) -> "ConcentricBox":
        return ConcentricBox(self.level, self.anchor, tuple(a + 1 for a in self.anchor))

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level + 1, tuple(a >> 1 for a in self.anchor))

    def ancestor(self, level: int) -> "DyadicCube":
        if level < self.level:
            raise ValueError("ancestor level must not be finer than the cube")
        k = level - self.level
        return DyadicCube(level, tuple(a >> k for a in self.anchor))

    def children(self) -> list:
        base = tuple(2 * a for a in self.anchor)
        return [
            DyadicCube(self.level - 1, tuple(b + o for b, o in zip(base, offs)))
            for offs in itertools.product((0, 1), repeat=self.dim)
        ]

    def contains_cube(self, other: "DyadicCube") -> bool:
        if other.level > self.level:
            return False
        return other.ancestor(self.level) == self

    def intersects(self, other: "DyadicCube") -> bool:
        return self.contains_cube(other) or other.contains_cube(self)

    def cells(self, level: int) -> np.ndarray:
        """Anchors of the level-``level`` cells partitioning the cube."""
        return self.box.cells(level)

    def to_json(self) -> dict:
        return {"level": self.level, "anchor": list(self.anchor)}

    @classmethod
    def from_json(cls, obj: dict) -> "DyadicCube":
        return cls(int(obj["level"]), tuple(obj["anchor"]))


@dataclass(frozen=True)
class ConcentricBox:
    """Axis-parallel box ``prod_i [lo_i 2^s, hi_i 2^s)`` aligned to level ``s``.

    Concentric dilations of dyadic cubes are stored this way: odd dilations of
    a level-``s`` cube are aligned to level ``s``, even ones to level ``s-1``.
    """

    level: int
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(int(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box with negative extent")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def n_cells(self) -> int:
        return math.prod(self.shape)

    @property
    def measure(self) -> Fraction:
        return self.n_cells * _pow2(self.level * self.dim)

    @property
    def center(self) -> tuple:
        u = _pow2(self.level)
        return tuple(Fraction(l + h, 2) * u for l, h in zip(self.lo, self.hi))

    @property
    def half_side(self) -> Fraction:
        sides = set(self.shape)
        if len(sides) != 1:
            raise ValueError("box is not a cube")
        return Fraction(sides.pop(), 2) * _pow2(self.level)

    @property
    def is_empty(self) -> bool:
        return self.n_cells == 0

    def at_level(self, level: int) -> "ConcentricBox":
        """Same box expressed at a finer (or equal) level."""
        if level > self.level:
            k = level - self.level
            m = 1 << k
            if any(v % m for v in self.lo + self.hi):
                raise ValueError(f"box not aligned to level {level}")
            return ConcentricBox(level, [v >> k for v in self.lo], [v >> k for v in self.hi])
        k = self.level - level
        return ConcentricBox(level, [v << k for v in self.lo], [v << k for v in self.hi])

    def aligned(self, level: int) -> bool:
        if level <= self.level:
            return True
        m = 1 << (level - self.level)
        return all(v % m == 0 for v in self.lo + self.hi)

    def inner(self, level: int) -> "ConcentricBox":
        """Largest level-``level`` aligned box contained in this one."""
        if level <= self.level:
            return self.at_level(level)
        m = 1 << (level - self.level)
        lo = [-((-v) // m) for v in self.lo]
        hi = [v // m for v in self.hi]
        hi = [max(h, l) for l, h in zip(lo, hi)]
        return ConcentricBox(level, lo, hi)

    def outer(self, level: int) -> "ConcentricBox":
        """Smallest level-``level`` aligned box containing this one."""
        if level <= self.level:
            return self.at_level(level)
        m = 1 << (level - self.level)
        return ConcentricBox(level, [v // m for v in self.lo], [-((-v) // m) for v in self.hi])

    def intersect(self, other: "ConcentricBox") -> "ConcentricBox":
        lvl = min(self.level, other.level)
        a, b = self.at_level(lvl), other.at_level(lvl)
        lo = [max(x, y) for x, y in zip(a.lo, b.lo)]
        hi = [min(x, y) for x, y in zip(a.hi, b.hi)]
        hi = [max(h, l) for l, h in zip(lo, hi)]
        return ConcentricBox(lvl, lo, hi)

    def hull(self, other: "ConcentricBox") -> "ConcentricBox":
        lvl = min(self.level, other.level)
        a, b = self.at_level(lvl), other.at_level(lvl)
        return ConcentricBox(
            lvl, [min(x, y) for x, y in zip(a.lo, b.lo)], [max(x, y) for x, y in zip(a.hi, b.hi)]
        )

    def contains_box(self, other: "ConcentricBox") -> bool:
        if other.is_empty:
            return True
        lvl = min(self.level, other.level)
        a, b = self.at_level(lvl), other.at_level(lvl)
        return all(al <= bl and bh <= ah for al, ah, bl, bh in zip(a.lo, a.hi, b.lo, b.hi))

    def cells(self, level: int) -> np.ndarray:
        b = self.at_level(level)
        axes = [np.arange(l, h, dtype=np.int64) for l, h in zip(b.lo, b.hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1)

    def slices(self, origin: Sequence[int]) -> tuple:
        """Array slices of this box inside an array whose cell 0 sits at ``origin``."""
        return tuple(slice(l - o, h - o) for l, h, o in zip(self.lo, self.hi, origin))

    def to_json(self) -> dict:
        return {"level": self.level, "lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_json(cls, obj: dict) -> "ConcentricBox":
        return cls(int(obj["level"]), tuple(obj["lo"]), tuple(obj["hi"]))


def dilate(cube: DyadicCube, factor: int) -> ConcentricBox:
    """Concentric dilation by an odd integer; the result is level aligned."""
    if factor < 1 or factor % 2 == 0:
        raise ValueError("dilation factor must be an odd positive integer")
    r = (factor - 1) // 2
    return ConcentricBox(
        cube.level, [a - r for a in cube.anchor], [a + r + 1 for a in cube.anchor]
    )


def dilate_box(cube: DyadicCube, factor: int) -> ConcentricBox:
    """Concentric dilation by any positive integer.

    Even factors put the corners on the half-lattice, so the box is expressed
    one level finer than the cube.
    """
    if factor < 1:
        raise ValueError("dilation factor must be positive")
    if factor % 2:
        return dilate(cube, factor)
    lo = [2 * a + 1 - factor for a in cube.anchor]
    hi = [2 * a + 1 + factor for a in cube.anchor]
    return ConcentricBox(cube.level - 1, lo, hi)


@dataclass(frozen=True)
class ScaleConstants:
    dim: int
    k_d: int
    lambda_d: int
    c_w: Fraction

    def __post_init__(self):
        if not 4 ** (self.k_d - 1) > self.dim:
            raise ValueError("k_d too small")
        if self.k_d > 1 and 4 ** (self.k_d - 2) > self.dim:
            raise ValueError("k_d not minimal")
        if self.lambda_d != 2 ** (self.k_d + 2) + 1:
            raise ValueError("lambda_d inconsistent with k_d")
        # c_w > sqrt(d) (2 lambda + 1)  <=>  c_w^2 > d (2 lambda + 1)^2
        if not (self.c_w > 0 and self.c_w ** 2 > self.dim * (2 * self.lambda_d + 1) ** 2):
            raise ValueError("Whitney constant too small")

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "k_d": self.k_d,
            "lambda_d": self.lambda_d,
            "c_w": f"{self.c_w.numerator}/{self.c_w.denominator}",
        }


def scale_constants(d: int, c_w_multiplier=1) -> ScaleConstants:
    if d < 1:
        raise ValueError("dimension must be positive")
    mult = Fraction(c_w_multiplier)
    if mult < 1:
        raise ValueError("c_w_multiplier must be >= 1")
    k = 1
    while not 4 ** (k - 1) > d:
        k += 1
    lam = 2 ** (k + 2) + 1
    c_w = mult * (ceil_sqrt(d * (2 * lam + 1) ** 2) + 1)
    return ScaleConstants(d, k, lam, c_w)


def scale_index(cube: DyadicCube, k_d: int) -> int:
    return cube.level + k_d


class Annulus(NamedTuple):
    """Closed shell ``{x : r_in <= |x - center| <= r_out}``."""

    center: tuple
    r_in: Fraction
    r_out: Fraction

    def contains(self, point: Sequence) -> bool:
        """Exact membership for a point with rational coordinates."""
        r2 = sum((Fraction(p) - c) ** 2 for p, c in zip(point, self.center))
        return self.r_in ** 2 <= r2 <= self.r_out ** 2

    def contains_lattice(self, anchors: np.ndarray, level: int) -> np.ndarray:
        """Exact membership of lattice points ``anchors * 2**level``."""
        anchors = np.atleast_2d(np.asarray(anchors, dtype=object))
        scale = _pow2(level)
        out = np.empty(len(anchors), dtype=bool)
        lo2, hi2 = self.r_in ** 2, self.r_out ** 2
        for i, row in enumerate(anchors):
            r2 = sum((int(a) * scale - c) ** 2 for a, c in zip(row, self.center))
            out[i] = lo2 <= r2 <= hi2
        return out

    def contains_float(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.array([float(v) for v in self.center])
        r = np.sqrt(((pts - c) ** 2).sum(axis=-1))
        return (r >= float(self.r_in)) & (r <= float(self.r_out))


def annulus(cube: DyadicCube, s: int, k_d: int) -> Annulus:
    if s <= scale_index(cube, k_d):
        raise ValueError("annulus is only defined for s > S(Q)")
    return Annulus(cube.center, _pow2(s - 2), _pow2(k_d + s))


def box_distance_sq(a: ConcentricBox, b: ConcentricBox) -> Fraction:
    """Exact squared Euclidean distance between two closed boxes."""
    lvl = min(a.level, b.level)
    a, b = a.at_level(lvl), b.at_level(lvl)
    total = 0
    for al, ah, bl, bh in zip(a.lo, a.hi, b.lo, b.hi):
        gap = max(0, bl - ah, al - bh)
        total += gap * gap
    return total * _pow2(2 * lvl)


class ComplementDistance(NamedTuple):
    squared: int
    unit_level: int
    omega_empty: bool

    @property
    def value(self) -> Fraction:
        """Squared distance in absolute units."""
        return self.squared * _pow2(2 * self.unit_level)


@dataclass(frozen=True, eq=False)
class Region:
    """Finite union of closed level-``grid_level`` cells, read as an open set.

    The cells live in a boolean ``mask`` whose entry ``[0, ..., 0]`` is the
    cell with anchor ``origin``.
    """

    dim: int
    grid_level: int
    origin: tuple
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool, copy=True)
        if m.ndim != self.dim:
            raise ValueError("mask dimension mismatch")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "origin", tuple(int(v) for v in self.origin))

    @classmethod
    def empty(cls, dim: int, grid_level: int) -> "Region":
        return cls(dim, grid_level, (0,) * dim, np.zeros((0,) * dim, dtype=bool))

    @classmethod
    def from_cells(cls, dim: int, grid_level: int, cells: Iterable) -> "Region":
        arr = np.asarray(list(cells), dtype=np.int64).reshape(-1, dim)
        if len(arr) == 0:
            return cls.empty(dim, grid_level)
        lo = arr.min(axis=0)
        hi = arr.max(axis=0) + 1
        mask = np.zeros(tuple(hi - lo), dtype=bool)
        mask[tuple((arr - lo).T)] = True
        return cls(dim, grid_level, tuple(lo), mask)

    @classmethod
    def from_box(cls, box: ConcentricBox, grid_level: int) -> "Region":
        b = box.at_level(grid_level)
        return cls(b.dim, grid_level, b.lo, np.ones(b.shape, dtype=bool))

    @property
    def window(self) -> ConcentricBox:
        return ConcentricBox(
            self.grid_level, self.origin, tuple(o + n for o, n in zip(self.origin, self.mask.shape))
        )

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return self.count == 0

    @property
    def measure(self) -> Fraction:
        return self.count * _pow2(self.dim * self.grid_level)

    @property
    def cells(self) -> list:
        idx = np.argwhere(self.mask)
        return [tuple(int(v) for v in row + np.asarray(self.origin)) for row in idx]

    def cell_array(self) -> np.ndarray:
        return np.argwhere(self.mask).astype(np.int64) + np.asarray(self.origin, dtype=np.int64)

    def crop(self) -> "Region":
        """Shrink the mask to the bounding box of the cells."""
        if self.is_empty:
            return Region.empty(self.dim, self.grid_level)
        idx = np.argwhere(self.mask)
        lo, hi = idx.min(axis=0), idx.max(axis=0) + 1
        sl = tuple(slice(l, h) for l, h in zip(lo, hi))
        return Region(self.dim, self.grid_level, tuple(np.asarray(self.origin) + lo), self.mask[sl])

    def in_window(self, box: ConcentricBox) -> np.ndarray:
        """Mask of this region over ``box`` (expressed at ``grid_level``)."""
        b = box.at_level(self.grid_level)
        out = np.zeros(b.shape, dtype=bool)
        common = self.window.intersect(b)
        if common.is_empty:
            return out
        out[common.slices(b.lo)] = self.mask[common.slices(self.origin)]
        return out

    def _align(self, other: "Region"):
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        lvl = min(self.grid_level, other.grid_level)
        a = self.refine(self.grid_level - lvl)
        b = other.refine(other.grid_level - lvl)
        if a.mask.size == 0:
            win = b.window
        elif b.mask.size == 0:
            win = a.window
        else:
            win = a.window.hull(b.window)
        return lvl, win, a.in_window(win), b.in_window(win)

    def union(self, other: "Region") -> "Region":
        lvl, win, a, b = self._align(other)
        return Region(self.dim, lvl, win.lo, a | b)

    def intersection(self, other: "Region") -> "Region":
        lvl, win, a, b = self._align(other)
        return Region(self.dim, lvl, win.lo, a & b)

    def difference(self, other: "Region") -> "Region":
        lvl, win, a, b = self._align(other)
        return Region(self.dim, lvl, win.lo, a & ~b)

    def intersect_box(self, box: ConcentricBox) -> "Region":
        b = box.inner(self.grid_level) if not box.aligned(self.grid_level) else box.at_level(self.grid_level)
        return Region(self.dim, self.grid_level, b.lo, self.in_window(b))

    def refine(self, k: int) -> "Region":
        """Same set described by cells ``k`` levels finer."""
        if k < 0:
            raise ValueError("refine expects k >= 0")
        if k == 0:
            return self
        m = self.mask
        for ax in range(self.dim):
            m = np.repeat(m, 1 << k, axis=ax)
        return Region(self.dim, self.grid_level - k, tuple(o << k for o in self.origin), m)

    def contains_cell(self, anchor: Sequence[int]) -> bool:
        idx = tuple(int(a) - o for a, o in zip(anchor, self.origin))
        if any(i < 0 or i >= n for i, n in zip(idx, self.mask.shape)):
            return False
        return bool(self.mask[idx])

    def contains_box(self, box: ConcentricBox) -> bool:
        """Whether every grid cell meeting ``box`` belongs to the region."""
        b = box.outer(self.grid_level)
        if b.is_empty:
            return True
        return bool(self.in_window(b).all())

    def is_disjoint(self, other: "Region") -> bool:
        return self.intersection(other).is_empty

    def __eq__(self, other) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.grid_level == other.grid_level
            and self.cells == other.cells
        )

    def to_json(self) -> dict:
        return {"dim": self.dim, "grid_level": self.grid_level, "cells": [list(c) for c in self.cells]}

    @classmethod
    def from_json(cls, obj) -> "Region":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls.from_cells(int(obj["dim"]), int(obj["grid_level"]), obj["cells"])


def dist_to_complement(box, region: Region) -> ComplementDistance:
    """Exact squared distance from a closed box to the closed complement.

    The result is an integer in units of ``4**unit_level`` where ``unit_level``
    is the finer of the box level and the region grid level.
    """
    if isinstance(box, DyadicCube):
        box = box.box
    unit = min(box.level, region.grid_level)
    if region.is_empty:
        return ComplementDistance(0, unit, True)
    k = region.grid_level - unit
    b = box.at_level(unit)
    r = region.crop()
    win = r.window.hull(box.outer(region.grid_level))
    win = ConcentricBox(win.level, [v - 1 for v in win.lo], [v + 1 for v in win.hi])
    comp = np.argwhere(~r.in_window(win)).astype(np.int64) + np.asarray(win.lo, dtype=np.int64)
    scale = 1 << k
    lo = comp * scale
    hi = lo + scale
    blo = np.asarray(b.lo, dtype=np.int64)
    bhi = np.asarray(b.hi, dtype=np.int64)
    gap = np.maximum(np.maximum(lo - bhi, blo - hi), 0)
    d2 = (gap * gap).sum(axis=1)
    return ComplementDistance(int(d2.min()), unit, False)
