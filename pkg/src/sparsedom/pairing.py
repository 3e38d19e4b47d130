"""Quadrature of bilinear pairings and pointwise values of truncated operators.

All built-in kernels are difference kernels, so a cell-pair integral only
depends on the offset between the two cells:

    I(D) = int_{x in c + D h} int_{y in c} k(x - y) w(|x - y|) dy dx
         = int_{t in D h + [-h, h]^d} k(t) w(|t|) W_D(t) dt,

with the tent weight ``W_D(t) = prod_i (h - |t_i - D_i h|)``.  The pairing of
two grid functions is then ``sum_D I(D) C(D)`` where ``C`` is the
cross-correlation of their cell values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal

from .geometry import DyadicCube, ScaleConstants, annulus, dilate, scale_index
from .gridfunc import GridFunction
from .kernels import BumpProfile, Kernel, Truncation, _norm, kernel_truncated

__all__ = [
    "QuadratureConfig",
    "QuadratureError",
    "PairResult",
    "LocalizationReport",
    "batched_cubature",
    "cell_pair_integrals",
    "pair",
    "apply_operator",
    "single_scale_ratio",
    "check_localization",
    "rayleigh_quotient",
]


class QuadratureError(ArithmeticError):
    def __init__(self, message, attained):
        super().__init__(message)
        self.attained = attained


@dataclass(frozen=True)
class QuadratureConfig:
    order: int = 8
    max_depth: int = 64
    rtol: float = 1e-12

    def to_json(self) -> dict:
        return {"order": self.order, "max_depth": self.max_depth, "rtol": self.rtol}


@lru_cache(maxsize=16)
def _tensor_rule(order: int, d: int):
    x, w = np.polynomial.legendre.leggauss(order)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wg = np.meshgrid(*([w] * d), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wg], axis=-1), axis=-1)
    return nodes, weights


def _rule(integrand, lo, hi, owner, order):
    nodes, weights = _tensor_rule(order, lo.shape[1])
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None, :] + half[:, None, :] * nodes[None, :, :]
    m, q = pts.shape[:2]
    vals = integrand(pts.reshape(m * q, -1), np.repeat(owner, q)).reshape(m, q)
    vol = np.prod(half, axis=1)
    return (vals * weights).sum(axis=1) * vol, (np.abs(vals) * weights).sum(axis=1) * vol


def _split(lo, hi):
    d = lo.shape[1]
    mid = 0.5 * (lo + hi)
    los, his = [], []
    for corner in np.ndindex(*(2,) * d):
        c = np.asarray(corner, dtype=bool)
        los.append(np.where(c, mid, lo))
        his.append(np.where(c, hi, mid))
    # children of box i are rows i*2^d .. i*2^d + 2^d - 1
    return np.stack(los, axis=1).reshape(-1, d), np.stack(his, axis=1).reshape(-1, d)


def batched_cubature(
    integrand,
    lo,
    hi,
    owner,
    n_owner,
    tol,
    order: int = 8,
    max_depth: int = 64,
    singular_bound=None,
):
    """Adaptive tensor Gauss-Legendre over many boxes at once.

    ``integrand(points, owner_of_point)`` is evaluated in batches.  Each box is
    compared against the sum over its ``2^d`` children and accepted when the
    difference is below its share of the owner's absolute tolerance ``tol``.
    ``singular_bound(lo, hi, owner)``, when given, returns an a priori bound
    on |integral| for boxes touching an integrable singularity (or ``inf``);
    such boxes are dropped once the bound is within tolerance.

    Returns per-owner integrals and error estimates.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    owner = np.asarray(owner, dtype=np.int64)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (n_owner,))
    total = np.zeros(n_owner)
    err = np.zeros(n_owner)
    if len(lo) == 0:
        return total, err
    d = lo.shape[1]
    vol = np.prod(hi - lo, axis=1)
    owner_vol = np.bincount(owner, weights=vol, minlength=n_owner)
    coarse, _ = _rule(integrand, lo, hi, owner, order)
    eps = np.finfo(float).eps
    depth = 0
    while len(lo):
        clo, chi = _split(lo, hi)
        cown = np.repeat(owner, 2 ** d)
        cval, cabs = _rule(integrand, clo, chi, cown, order)
        fine = cval.reshape(-1, 2 ** d).sum(axis=1)
        diff = np.abs(fine - coarse)
        share = np.maximum(np.prod(hi - lo, axis=1) / owner_vol[owner], 0.5 ** (depth + 1))
        # below this the difference is rounding noise
        floor = 64 * eps * cabs.reshape(-1, 2 ** d).sum(axis=1)
        ok = diff <= np.maximum(tol[owner] * share, floor)
        if singular_bound is not None:
            bound = singular_bound(lo, hi, owner)
            # a box touching the singularity gets a fixed share of the owner's tolerance
            drop = ~ok & (bound <= tol[owner] / 2 ** (d + 1))
            if np.any(drop):
                total += np.bincount(owner[drop], weights=fine[drop], minlength=n_owner)
                err += np.bincount(owner[drop], weights=bound[drop], minlength=n_owner)
            rest = ~ok & ~drop
        else:
            rest = ~ok
        if np.any(ok):
            total += np.bincount(owner[ok], weights=fine[ok], minlength=n_owner)
            err += np.bincount(owner[ok], weights=diff[ok], minlength=n_owner)
        depth += 1
        if not np.any(rest):
            break
        if depth >= max_depth:
            attained = float(diff[rest].sum())
            raise QuadratureError(
                f"cubature did not converge within depth {max_depth}; remaining error {attained:.3g}",
                attained,
            )
        keep = np.repeat(rest, 2 ** d)
        lo, hi, owner = clo[keep], chi[keep], cown[keep]
        coarse = cval[keep]
    return total, err


def _offset_radii(delta: np.ndarray, h: float):
    a = np.abs(delta).astype(float)
    rmin = _norm(np.maximum(a - 1.0, 0.0) * h)
    rmax = _norm((a + 1.0) * h)
    return rmin, rmax


def cell_pair_integrals(
    kernel: Kernel,
    profile: BumpProfile,
    trunc: Truncation,
    offsets,
    h: float,
    config: QuadratureConfig = QuadratureConfig(),
):
    """Cell-pair integrals ``I(D)`` for integer offsets ``D`` (rows of ``offsets``).

    Returns ``(values, errors)``.  For odd kernels the value at ``-D`` is the
    negative of the value at ``D`` and is filled in by symmetry.
    """
    delta = np.atleast_2d(np.asarray(offsets, dtype=np.int64))
    n, d = delta.shape
    if d != kernel.dim:
        raise ValueError("offset dimension does not match the kernel")
    values = np.zeros(n)
    errors = np.zeros(n)
    if n == 0:
        return values, errors
    rmin, rmax = _offset_radii(delta, h)
    zero = trunc.vanishes_on(rmin, rmax)
    diag = np.all(delta == 0, axis=1)
    if kernel.odd:
        zero |= diag
        # canonical representative: first nonzero coordinate positive
        first = np.argmax(delta != 0, axis=1)
        sign = np.where(diag, 1, np.sign(delta[np.arange(n), first]))
        canon = delta * sign[:, None]
    else:
        sign = np.ones(n, dtype=np.int64)
        canon = delta
    todo = ~zero
    uniq, inv = np.unique(canon[todo], axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    uval, uerr = _unique_integrals(kernel, profile, trunc, uniq, h, config)
    values[todo] = uval[inv] * sign[todo]
    errors[todo] = uerr[inv]
    return values, errors


def _unique_integrals(kernel, profile, trunc, delta, h, config):
    n, d = delta.shape
    vals = np.zeros(n)
    errs = np.zeros(n)
    if n == 0:
        return vals, errs
    rmin, rmax = _offset_radii(delta, h)
    one = trunc.is_one_on(rmin, rmax)
    exact = kernel.exact_pair is not None
    use_exact = one & exact
    if np.any(use_exact):
        vals[use_exact] = kernel.exact_pair(delta[use_exact], h)
    # near the diagonal with a weight that is one there: exact minus a smooth remainder
    complement = exact & ~one & trunc.singular_weight() & (rmin == 0)
    direct = ~use_exact & ~complement
    scale = kernel.size_constant * h ** (2 * d) / np.maximum(rmin, h) ** d
    tol = config.rtol * scale

    def quad(mask, weight):
        idx = np.flatnonzero(mask)
        if len(idx) == 0:
            return np.zeros(0), np.zeros(0)
        dl = delta[idx].astype(float)
        # split the t-box at the kink of the tent weight
        los, his, own = [], [], []
        for corner in np.ndindex(*(2,) * d):
            c = np.asarray(corner, dtype=float)
            los.append((dl - 1 + c) * h)
            his.append((dl + c) * h)
            own.append(np.arange(len(idx)))
        lo = np.concatenate(los)
        hi = np.concatenate(his)
        own = np.concatenate(own)

        def integrand(t, o):
            r = _norm(t)
            w = weight(r)
            # distance to the nearer edge of the t-box, free of cancellation near the edges
            tent = np.prod(np.minimum(t - (dl[o] - 1) * h, (dl[o] + 1) * h - t), axis=1)
            out = np.zeros(len(t))
            nz = (w != 0) & (r > 0)
            out[nz] = kernel.k(t[nz]) * w[nz] * tent[nz]
            return out

        lip = math.sqrt(d) * h ** (d - 1)
        sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)

        def singular_bound(lo_, hi_, o):
            touches = np.all((lo_ <= 0) & (hi_ >= 0), axis=1)
            tent0 = np.prod(h - np.abs(dl[o] * h), axis=1)
            diam = _norm(hi_ - lo_)
            # tent weight vanishes at the origin when the cells touch: W <= lip |t|
            b = kernel.size_constant * lip * diam * sphere / 2 ** d
            return np.where(touches & (tent0 == 0), b, np.inf)

        return batched_cubature(
            integrand, lo, hi, own, len(idx), tol[idx], config.order, config.max_depth, singular_bound
        )

    if np.any(direct):
        v, e = quad(direct, lambda r: trunc.weight(profile, r))
        vals[direct] = v
        errs[direct] = e
    if np.any(complement):
        full = kernel.exact_pair(delta[complement], h)
        v, e = quad(complement, lambda r: 1.0 - trunc.weight(profile, r))
        vals[complement] = full - v
        errs[complement] = e
    return vals, errs


@dataclass(frozen=True)
class PairResult:
    value: float
    error: float
    uncertainty: float
    n_offsets: int
    variant: dict
    config: dict

    def __float__(self):
        return self.value

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "uncertainty": self.uncertainty,
            "n_offsets": self.n_offsets,
            "variant": self.variant,
            "quadrature": self.config,
        }


def _common_grid(f1: GridFunction, f2: GridFunction):
    lvl = min(f1.grid_level, f2.grid_level)
    return f1.refine(f1.grid_level - lvl), f2.refine(f2.grid_level - lvl)


def pair(
    variant: Truncation,
    kernel: Kernel,
    profile: BumpProfile,
    f1: GridFunction,
    f2: GridFunction,
    config: QuadratureConfig = QuadratureConfig(),
    full_output: bool = False,
):
    """``<T_variant f1, f2> = int f2(x) int K_variant(x, y) f1(y) dy dx``."""
    if f1.dim != kernel.dim or f2.dim != kernel.dim:
        raise ValueError("function dimension does not match the kernel")
    f1, f2 = _common_grid(f1, f2)
    h = 2.0 ** f1.grid_level
    if f1.values.size == 0 or f2.values.size == 0 or not f1.values.any() or not f2.values.any():
        res = PairResult(0.0, 0.0, 0.0, 0, variant.to_json(), config.to_json())
        return res if full_output else 0.0
    corr = signal.correlate(f2.values, f1.values, mode="full", method="direct")
    n1 = np.asarray(f1.values.shape)
    base = np.asarray(f2.box.lo) - np.asarray(f1.box.lo) - (n1 - 1)
    idx = np.argwhere(corr != 0)
    offsets = idx + base
    cvals = corr[tuple(idx.T)]
    ivals, ierrs = cell_pair_integrals(kernel, profile, variant, offsets, h, config)
    uncertainty = 0.0
    if not kernel.odd:
        diag = np.all(offsets == 0, axis=1)
        if np.any(diag):
            # diagonal cells are excluded; bound their contribution by a local size estimate
            uncertainty = float(np.abs(cvals[diag]).sum()) * kernel.size_constant * h ** kernel.dim * 2 ** kernel.dim
            ivals = np.where(diag, 0.0, ivals)
    value = math.fsum((ivals * cvals).tolist())
    error = float(np.abs(cvals * ierrs).sum())
    res = PairResult(value, error, uncertainty, len(offsets), variant.to_json(), config.to_json())
    return res if full_output else value


def apply_operator(
    variant: Truncation,
    kernel: Kernel,
    profile: BumpProfile,
    f: GridFunction,
    points,
    config: QuadratureConfig = QuadratureConfig(),
):
    """Pointwise ``T_variant f(x) = int K_variant(x, y) f(y) dy``.

    Pairs (point, cell) on which the weight vanishes identically contribute
    exactly zero without any quadrature.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, kernel.dim)
    h = 2.0 ** f.grid_level
    cells = np.argwhere(f.values != 0)
    out = np.zeros(len(pts))
    if len(cells) == 0 or len(pts) == 0:
        return out
    clo = (cells + np.asarray(f.box.lo)) * h
    cvals = f.values[tuple(cells.T)]
    chunk = max(1, 2_000_000 // max(1, len(cells)))
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk]
        gap = np.maximum(np.maximum(clo[None] - p[:, None], p[:, None] - (clo[None] + h)), 0.0)
        far = np.maximum(np.abs(p[:, None] - clo[None]), np.abs(p[:, None] - clo[None] - h))
        rmin = _norm(gap)
        rmax = _norm(far)
        live = ~variant.vanishes_on(rmin, rmax)
        if not np.any(live):
            continue
        pi, ci = np.nonzero(live)
        if variant.singular_weight() and np.any(rmin[pi, ci] == 0):
            raise ValueError("pointwise evaluation on the support of a singular kernel is not supported")
        lo = clo[ci]
        hi = lo + h
        x = p[pi]

        def integrand(y, o):
            t = x[o] - y
            w = variant.weight(profile, _norm(t))
            v = np.zeros(len(t))
            nz = w != 0
            v[nz] = kernel.k(t[nz]) * w[nz]
            return v

        tol = config.rtol * kernel.size_constant * h ** kernel.dim / np.maximum(rmin[pi, ci], h) ** kernel.dim
        vals, _ = batched_cubature(integrand, lo, hi, np.arange(len(pi)), len(pi), tol, config.order, config.max_depth)
        out[start:start + chunk] += np.bincount(pi, weights=vals * cvals[ci], minlength=len(p))
    return out


def single_scale_ratio(kernel, profile, s: int, f: GridFunction, points, config=QuadratureConfig()) -> float:
    """max over ``points`` of |T_s f(x)| 2^{sd} / ||f||_1."""
    vals = apply_operator(Truncation.single_scale(s), kernel, profile, f, points, config)
    norm = f.l1()
    if norm == 0:
        return 0.0
    return float(np.abs(vals).max() * 2.0 ** (s * kernel.dim) / norm)


def rayleigh_quotient(variant, kernel, profile, f: GridFunction, g: GridFunction, config=QuadratureConfig()) -> float:
    """|<T f, g>| / (||f||_2 ||g||_2), a lower estimate of the L^2 operator norm."""
    denom = f.l2() * g.l2()
    if denom == 0:
        return 0.0
    return abs(pair(variant, kernel, profile, f, g, config)) / denom


@dataclass
class LocalizationReport:
    annulus_samples: int = 0
    annulus_violations: int = 0
    support_samples: int = 0
    support_violations: int = 0
    max_outside_value: float = 0.0
    tolerance: float = 0.0
    witnesses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.annulus_violations == 0 and self.support_violations == 0

    def to_json(self) -> dict:
        return {
            "annulus_samples": self.annulus_samples,
            "annulus_violations": self.annulus_violations,
            "support_samples": self.support_samples,
            "support_violations": self.support_violations,
            "max_outside_value": self.max_outside_value,
            "tolerance": self.tolerance,
            "witnesses": self.witnesses[:10],
            "passed": self.passed,
        }


def check_localization(
    kernel: Kernel,
    profile: BumpProfile,
    cube: DyadicCube,
    f: GridFunction,
    constants: ScaleConstants,
    sample_budget: int = 100_000,
    seed: int = 0,
    tol: float = 1e-12,
    config: QuadratureConfig = QuadratureConfig(),
) -> LocalizationReport:
    """Sample both localization properties of the truncated kernels.

    (a) for s > S(Q), y in Q and x outside the annulus A_s(Q), K_s(x, y) = 0;
    (b) for x outside Lambda_d Q, T^{(S(Q))}(f 1_Q)(x) vanishes.
    """
    rng = np.random.default_rng(seed)
    d = cube.dim
    k_d = constants.k_d
    S = scale_index(cube, k_d)
    side = float(cube.side)
    center = np.array([float(c) for c in cube.center])
    corner = np.array([float(a) * side for a in cube.anchor])
    rep = LocalizationReport(tolerance=tol)

    n_a = sample_budget // 2
    s = S + 1 + rng.integers(0, 5, n_a)
    y = corner + rng.random((n_a, d)) * side
    dirs = rng.normal(size=(n_a, d))
    dirs /= _norm(dirs)[:, None]
    r_in = 2.0 ** (s - 2)
    r_out = 2.0 ** (k_d + s)
    mode = rng.integers(0, 4, n_a)
    radius = np.select(
        [mode == 0, mode == 1, mode == 2],
        [
            r_in * rng.uniform(0, 1, n_a),
            r_in * (1 - 10.0 ** rng.uniform(-12, -1, n_a)),
            r_out * (1 + 10.0 ** rng.uniform(-12, 1, n_a)),
        ],
        r_out * rng.uniform(1, 8, n_a),
    )
    x = center + dirs * radius[:, None]
    inside_q = mode == 0
    x[inside_q] = corner + rng.random((int(inside_q.sum()), d)) * side
    dist = _norm(x - center)
    outside = (dist < r_in) | (dist > r_out)
    w = kernel_truncated(kernel, profile, s, x, y)
    bad = outside & (w != 0)
    rep.annulus_samples = int(outside.sum())
    rep.annulus_violations = int(bad.sum())
    for i in np.flatnonzero(bad)[:5]:
        rep.witnesses.append({"check": "annulus", "s": int(s[i]), "x": x[i].tolist(), "y": y[i].tolist()})
    # converse: every nonzero K_s(x, y) with y in Q has x in the exact annulus
    nonzero = w != 0
    ann = [annulus(cube, int(si), k_d) for si in range(S + 1, S + 6)]
    for i in np.flatnonzero(nonzero)[:200]:
        if not ann[int(s[i]) - S - 1].contains(tuple(x[i].tolist())):
            rep.annulus_violations += 1
            rep.witnesses.append({"check": "annulus-converse", "s": int(s[i]), "x": x[i].tolist()})

    n_b = sample_budget - n_a
    big = dilate(cube, constants.lambda_d)
    blo = np.array([float(v) for v in big.lo]) * side
    bhi = np.array([float(v) for v in big.hi]) * side
    width = bhi - blo
    pts = blo + rng.uniform(-1.5, 2.5, (n_b, d)) * width
    near = rng.random(n_b) < 0.3
    # points just outside a face of Lambda_d Q
    if np.any(near):
        m = int(near.sum())
        axis = rng.integers(0, d, m)
        upper = rng.random(m) < 0.5
        offs = 10.0 ** rng.uniform(-12, 0, m) * side
        base = blo + rng.random((m, d)) * width
        base[np.arange(m), axis] = np.where(upper, bhi[axis] + offs, blo[axis] - offs)
        pts[near] = base
    out_mask = np.any((pts < blo) | (pts >= bhi), axis=1)
    pts = pts[out_mask]
    fq = f.localize(cube)
    vals = apply_operator(Truncation.head_upto(S), kernel, profile, fq, pts, config)
    rep.support_samples = len(pts)
    viol = np.abs(vals) > tol
    rep.support_violations = int(viol.sum())
    rep.max_outside_value = float(np.abs(vals).max()) if len(vals) else 0.0
    for i in np.flatnonzero(viol)[:5]:
        rep.witnesses.append({"check": "support", "x": pts[i].tolist(), "value": float(vals[i])})
    return rep
