"""Stopping-time construction of sparse families and the domination certificate.

Starting from a dyadic cube ``Q0`` holding the support of both functions, each
cube ``Q`` of the current generation is processed independently: the cells
where the lattice maximal function of ``f_i 1_{Lambda Q}`` is large form the
stopping region, its Whitney cubes inside ``Q`` (on which ``f1`` is nonzero)
become the next generation, and what is left of ``Q`` is the major subset of
``Lambda Q``.  Stopping-region cells the Whitney cover does not reach at the
floor level are kept as residual leaves.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .geometry import (
    ConcentricBox,
    DyadicCube,
    Region,
    ScaleConstants,
    dilate,
    dilate_box,
    scale_constants,
    scale_index,
)
from .gridfunc import GridFunction, maximal_superlevel
from .kernels import BumpProfile, Kernel, Truncation
from .pairing import PairResult, QuadratureConfig, pair
from .whitney import whitney_decompose

__all__ = [
    "SparseParams",
    "SparseEntry",
    "SparseFamily",
    "NodeResult",
    "DominationCertificate",
    "default_c0",
    "stopping_region",
    "iterate_once",
    "build_sparse",
    "sparse_form",
    "apply_sparse",
    "dominate",
]


@dataclass(frozen=True)
class SparseParams:
    """Knobs of the construction; ``None`` selects the documented default."""

    eta0: float = 0.5
    c0: float | None = None
    c_m: float | None = None
    c_w_multiplier: int = 1
    s_floor: int | None = None
    escalate: bool = True
    max_escalations: int = 64
    c_op: float | None = None

    def __post_init__(self):
        if not 0 < self.eta0 < 1:
            raise ValueError("eta0 must lie in (0, 1)")
        if self.c0 is not None and self.c0 <= 0:
            raise ValueError("c0 must be positive")
        if self.c_m is not None and self.c_m <= 0:
            raise ValueError("c_m must be positive")

    def to_json(self) -> dict:
        return asdict(self)


def default_c_m(d: int) -> float:
    return 2.0 * 3 ** d * 6 ** d


def default_c0(d: int, eta0: float, c_m: float | None = None) -> float:
    lam = scale_constants(d).lambda_d
    c_m = default_c_m(d) if c_m is None else c_m
    return 2.0 * c_m * lam ** d / (1.0 - eta0)


@dataclass(frozen=True, eq=False)
class SparseEntry:
    base: DyadicCube
    dilated: ConcentricBox
    major_subset: Region
    generation: int

    def to_json(self) -> dict:
        return {
            "generation": self.generation,
            "base": self.base.to_json(),
            "dilated": self.dilated.to_json(),
            "major_subset_cells": self.major_subset.count,
            "major_subset_level": self.major_subset.grid_level,
            "major_subset_measure": float(self.major_subset.measure),
        }


@dataclass(frozen=True, eq=False)
class SparseFamily:
    entries: list
    eta_target: float
    eta_certified: float
    c0_used: float
    params: dict
    constants: ScaleConstants
    root: DyadicCube
    s_floor: int
    omega_root_measure: Fraction
    generation_measures: list
    leaves: list
    disjoint: bool
    decay_ok: bool
    node_bound_ok: bool
    escalations: int

    @property
    def sparsity_floor(self) -> float:
        return self.eta_target / self.constants.lambda_d ** self.constants.dim

    @property
    def certified(self) -> bool:
        return (
            self.disjoint
            and self.decay_ok
            and self.node_bound_ok
            and self.eta_certified >= self.sparsity_floor
        )

    def decay_series(self) -> list:
        """``(n, sum of |Q| over generation n, (1-eta0)^n |Omega_{Q0}|)`` for every generation."""
        om = float(self.omega_root_measure)
        return [
            (n, float(m), (1 - self.eta_target) ** n * om) for n, m in enumerate(self.generation_measures)
        ]

    def to_json(self) -> dict:
        return {
            "root": self.root.to_json(),
            "s_floor": self.s_floor,
            "constants": self.constants.to_json(),
            "params": self.params,
            "eta_target": self.eta_target,
            "eta_floor": self.sparsity_floor,
            "eta_certified": self.eta_certified,
            "c0_used": self.c0_used,
            "escalations": self.escalations,
            "disjoint": self.disjoint,
            "decay_ok": self.decay_ok,
            "node_bound_ok": self.node_bound_ok,
            "certified": self.certified,
            "omega_root_measure": float(self.omega_root_measure),
            "generations": [
                {"n": n, "measure": m, "bound": b} for n, m, b in self.decay_series()
            ],
            "n_entries": len(self.entries),
            "n_leaves": len(self.leaves),
            "entries": [e.to_json() for e in self.entries],
        }

    def generations_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "total_measure"])
        for n, m, _ in self.decay_series():
            w.writerow([n, repr(m)])
        return buf.getvalue()


def _check_grid(f: GridFunction, d: int):
    if f.dim != d:
        raise ValueError("function dimension mismatch")
    if not f.is_nonnegative():
        raise ValueError("sparse construction expects nonnegative functions")


def _local(f: GridFunction, box: ConcentricBox, level: int) -> GridFunction:
    """``f 1_box`` on the level-``level`` grid (``box`` must be aligned to it)."""
    if box.aligned(f.grid_level):
        g = f.localize(box)
        return g.refine(g.grid_level - level) if g.grid_level > level else g
    g = f.localize(box.outer(f.grid_level))
    return g.refine(g.grid_level - level).localize(box)


def stopping_region(
    f1: GridFunction,
    f2: GridFunction,
    cube: DyadicCube,
    c0: float,
    constants: ScaleConstants,
) -> Region:
    """Cells of ``2 Lambda Q`` where the lattice maximal function of either
    ``f_i 1_{Lambda Q}`` exceeds ``c0 <f_i>_{Lambda Q} / 3^d``.

    The maximal function lives on the grid of the functions, or on the grid of
    ``Q`` when ``Q`` is finer, so the region does not depend on any floor.
    """
    if f1.grid_level != f2.grid_level:
        raise ValueError("both functions must share the grid")
    d = constants.dim
    level = min(f1.grid_level, cube.level)
    lam_q = dilate(cube, constants.lambda_d)
    search = dilate_box(cube, 2 * constants.lambda_d).inner(level)
    out = Region.empty(d, level)
    for f in (f1, f2):
        local = _local(f, lam_q, level)
        avg = local.box_sum(lam_q) / lam_q.at_level(level).n_cells
        if avg <= 0:
            continue
        out = out.union(maximal_superlevel(local, c0 * avg / 3 ** d, search))
    return out


@dataclass(frozen=True, eq=False)
class NodeResult:
    cube: DyadicCube
    omega: Region
    children: list
    frontier: list
    major_subset: Region


def _nonzero_on(f: GridFunction, cube: DyadicCube) -> bool:
    if cube.level >= f.grid_level:
        return f.box_sum(cube.box) > 0
    return f.value_at(cube.ancestor(f.grid_level).anchor) > 0


def iterate_once(
    cube: DyadicCube,
    f1: GridFunction,
    f2: GridFunction,
    c0: float,
    constants: ScaleConstants,
    s_floor: int,
) -> NodeResult:
    """One stopping-time step on ``cube``; Whitney cubes stop at ``s_floor``."""
    omega = stopping_region(f1, f2, cube, c0, constants)
    cover = whitney_decompose(omega, constants, s_floor)
    children = []
    for q in cover.cubes:
        if cube.contains_cube(q) and q != cube:
            if _nonzero_on(f1, q):
                children.append(q)
        elif q.intersects(cube):
            raise AssertionError(f"Whitney cube {q} straddles the stopping cube {cube}")
    frontier = [c for c in cover.frontier if cube.contains_cube(c) and _nonzero_on(f1, c)]
    box = cube.box.at_level(s_floor)
    mask = np.ones(box.shape, dtype=bool)
    for q in children + frontier:
        mask[q.box.at_level(s_floor).slices(box.lo)] = False
    return NodeResult(cube, omega, children, frontier, Region(cube.dim, s_floor, box.lo, mask))


def _prepare(f1, f2, root, params):
    if isinstance(root, ConcentricBox):
        shape = set(root.shape)
        if len(shape) != 1 or shape.pop() != 1:
            raise ValueError("root box is not a dyadic cube")
        root = DyadicCube(root.level, root.lo)
    d = root.dim
    _check_grid(f1, d)
    _check_grid(f2, d)
    if f1.grid_level != f2.grid_level:
        raise ValueError("f1 and f2 must share the grid")
    s_grid = f1.grid_level
    s_floor = s_grid if params.s_floor is None else params.s_floor
    if s_floor > s_grid:
        raise ValueError("s_floor must not be coarser than the grid")
    if root.level < s_grid:
        raise ValueError("root cube is finer than the grid")
    for f in (f1, f2):
        if not f.support_region().difference(Region.from_box(root.box, s_grid)).is_empty:
            raise ValueError("function support is not contained in the root cube")
    return root, s_floor


def build_sparse(
    f1: GridFunction,
    f2: GridFunction,
    root: DyadicCube,
    params: SparseParams = SparseParams(),
) -> SparseFamily:
    """Sparse family for the pair ``(f1, f2)`` supported in ``root``.

    The kernel plays no part here.  With ``params.escalate`` the threshold
    ``c0`` is doubled and the whole construction rerun until every node keeps
    ``|Omega_Q| <= (1 - eta0)|Q|`` and the generation measures decay like
    ``(1 - eta0)^n |Omega_{Q0}|``.
    """
    root, s_floor = _prepare(f1, f2, root, params)
    d = root.dim
    constants = scale_constants(d, params.c_w_multiplier)
    c0 = params.c0 if params.c0 is not None else default_c0(d, params.eta0, params.c_m)
    escalations = 0
    while True:
        fam = _construct(f1, f2, root, constants, c0, s_floor, params, escalations)
        ok = fam.node_bound_ok and fam.decay_ok
        if ok or not params.escalate or escalations >= params.max_escalations:
            return fam
        c0 *= 2.0
        escalations += 1


def _construct(f1, f2, root, constants, c0, s_floor, params, escalations) -> SparseFamily:
    eta0 = params.eta0
    keep = 1 - Fraction(eta0)
    unit = Fraction(2) ** (constants.dim * s_floor)
    generation = [root]
    entries, leaves, gen_cells = [], [], []
    omega_root = None
    node_ok = True
    n = 0
    while generation:
        gen_cells.append(sum(q.box.at_level(s_floor).n_cells for q in generation))
        nxt = []
        for q in sorted(generation):
            node = iterate_once(q, f1, f2, c0, constants, s_floor)
            if omega_root is None:
                omega_root = node.omega.measure
            if node.omega.measure > keep * q.measure:
                node_ok = False
            entries.append(SparseEntry(q, dilate(q, constants.lambda_d), node.major_subset, n))
            leaves.extend(node.frontier)
            nxt.extend(node.children)
        if not node_ok and params.escalate:
            break
        generation = nxt
        n += 1
    decay_ok = all(m * unit <= keep ** k * omega_root for k, m in enumerate(gen_cells) if k >= 1)
    disjoint = _disjoint(entries, root, s_floor)
    lam_cells = constants.lambda_d ** constants.dim
    eta = min(e.major_subset.count / (lam_cells * e.base.box.at_level(s_floor).n_cells) for e in entries)
    return SparseFamily(
        entries=entries,
        eta_target=eta0,
        eta_certified=eta,
        c0_used=c0,
        params=params.to_json(),
        constants=constants,
        root=root,
        s_floor=s_floor,
        omega_root_measure=omega_root,
        generation_measures=[m * unit for m in gen_cells],
        leaves=sorted(leaves),
        disjoint=disjoint,
        decay_ok=decay_ok,
        node_bound_ok=node_ok,
        escalations=escalations,
    )


def _disjoint(entries, root, s_floor) -> bool:
    win = root.box.at_level(s_floor)
    paint = np.zeros(win.shape, dtype=np.int32)
    for e in entries:
        r = e.major_subset
        if not win.contains_box(r.window):
            return False
        paint[r.window.slices(win.lo)] += r.mask
    return bool(paint.max(initial=0) <= 1)


def _on_common_grid(f: GridFunction, level: int) -> GridFunction:
    return f.refine(f.grid_level - level) if f.grid_level > level else f


def sparse_form(family: SparseFamily, f1: GridFunction, f2: GridFunction) -> float:
    """``sum over the family of <f1>_{Lambda Q} <f2>_{Lambda Q} |Lambda Q|``."""
    if not family.entries:
        return 0.0
    level = min(min(e.dilated.level for e in family.entries), f1.grid_level, f2.grid_level)
    g1, g2 = _on_common_grid(f1, level), _on_common_grid(f2, level)
    terms = []
    for e in family.entries:
        b = e.dilated.at_level(level)
        n = b.n_cells
        terms.append(g1.box_sum(b) * g2.box_sum(b) / n * 2.0 ** (level * b.dim))
    return math.fsum(terms)


def apply_sparse(family: SparseFamily, f: GridFunction) -> GridFunction:
    """``A f = sum <f>_{Lambda Q} 1_{Lambda Q}`` on the grid window of ``f``."""
    if not family.entries:
        return f.with_values(np.zeros(f.values.shape))
    level = min(min(e.dilated.level for e in family.entries), f.grid_level)
    g = _on_common_grid(f, level)
    out = np.zeros(g.values.shape)
    for e in family.entries:
        b = e.dilated.at_level(level)
        common = b.intersect(g.box)
        if common.is_empty:
            continue
        out[common.slices(g.box.lo)] += g.box_sum(b) / b.n_cells
    return GridFunction(level, g.box, out)


@dataclass(frozen=True, eq=False)
class DominationCertificate:
    family: SparseFamily
    pairing: PairResult
    sparse_form: float
    residual: float
    residual_bound: float
    c_op: float
    kernel: str
    quadrature: dict

    @property
    def ratio(self) -> float | None:
        if self.sparse_form > 0:
            return abs(self.pairing.value) / self.sparse_form
        return 0.0 if self.pairing.value == 0 else None

    def to_json(self) -> dict:
        return {
            "kernel": self.kernel,
            "pairing": self.pairing.to_json(),
            "sparse_form": self.sparse_form,
            "ratio": self.ratio,
            "residual": self.residual,
            "residual_bound": self.residual_bound,
            "c_op": self.c_op,
            "quadrature": self.quadrature,
            "family": self.family.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


def dominate(
    kernel: Kernel,
    profile: BumpProfile,
    f1: GridFunction,
    f2: GridFunction,
    root: DyadicCube,
    params: SparseParams = SparseParams(),
    quadrature: QuadratureConfig = QuadratureConfig(),
) -> DominationCertificate:
    """Build the family, measure the pairing and the sparse form, and account
    for the residual leaves both numerically and by an operator-norm bound."""
    family = build_sparse(f1, f2, root, params)
    full = Truncation.full()
    result = pair(full, kernel, profile, f1, f2, quadrature, full_output=True)
    form = sparse_form(family, f1, f2)
    lam = family.constants.lambda_d
    k_d = family.constants.k_d
    residual = []
    # the term a leaf L leaves out is <T^{(S(L))}(f1 1_L), f2>; the truncated
    # kernel is supported within Lambda L of L, so f2 may be cut there
    for leaf in family.leaves:
        a = _local(f1, leaf.box, leaf.level)
        if not a.values.any():
            continue
        b = _local(f2, dilate(leaf, lam), leaf.level)
        head = Truncation.head_upto(scale_index(leaf, k_d))
        residual.append(abs(pair(head, kernel, profile, a, b, quadrature)))
    c_op = params.c_op if params.c_op is not None else kernel.params.get("l2_norm", 1.0)
    leaf_measure = float(sum((c.measure for c in family.leaves), Fraction(0)))
    bound = c_op * f1.sup() * f2.sup() * lam ** (kernel.dim / 2) * leaf_measure
    return DominationCertificate(
        family=family,
        pairing=result,
        sparse_form=form,
        residual=math.fsum(residual),
        residual_bound=bound,
        c_op=c_op,
        kernel=kernel.name,
        quadrature=quadrature.to_json(),
    )
