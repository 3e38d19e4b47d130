import math

import numpy as np
import pytest

from oracles import maximal_1d
from sparsedom.corpus import random_pair, resolved_function
from sparsedom.geometry import DyadicCube, Region, dilate, dilate_box, scale_constants
from sparsedom.gridfunc import GridFunction
from sparsedom.kernels import BumpProfile, get_kernel
from sparsedom.sparse import (
    SparseParams,
    apply_sparse,
    build_sparse,
    default_c0,
    dominate,
    iterate_once,
    sparse_form,
    stopping_region,
)

ROOT = DyadicCube(0, (0,))
C1 = scale_constants(1)
HILBERT = get_kernel("hilbert")
PROFILE = BumpProfile()


def _ones(level=-6):
    return GridFunction.from_array(np.ones(1 << -level), level)


def test_default_threshold_constant():
    assert default_c0(1, 0.5) == 2 * (2 * 3 * 6) * 17 / 0.5


def test_stopping_region_indicator_is_empty():
    f = _ones()
    assert stopping_region(f, f, ROOT, default_c0(1, 0.5), C1).is_empty


def test_stopping_region_matches_bruteforce_maximal():
    rng = np.random.default_rng(0)
    v = rng.random(64) * (rng.random(64) < 0.2) * 40
    f2 = GridFunction.from_array(v, -6)
    zero = f2.with_values(np.zeros(64))
    c0 = 30.0
    got = stopping_region(zero, f2, ROOT, c0, C1)
    # oracle: brute-force maximal function of f2 over the cells of 2 Lambda Q
    search = dilate_box(ROOT, 34).inner(-6)
    mf = maximal_1d(v, search.lo[0], search.hi[0], 0)
    avg = v.sum() / (17 * 64)
    want = {(i + search.lo[0],) for i in np.flatnonzero(mf > c0 * avg / 3)}
    assert set(got.cells) == want
    assert got == stopping_region(f2, f2, ROOT, c0, C1)


def test_spike_enters_stopping_region():
    v = np.zeros(64)
    v[10] = 1.0
    c0 = 50.0
    f = GridFunction.from_array(v, -6)
    avg = 1.0 / (17 * 64)
    # a single cell is its own competitor: M f = 1 there, above the threshold
    assert 1.0 > c0 * avg / 3
    assert Region.from_cells(1, -6, [(10,)]).difference(stopping_region(f, f, ROOT, c0, C1)).is_empty


def test_iterate_once_empty_region():
    f = _ones()
    node = iterate_once(ROOT, f, f, default_c0(1, 0.5), C1, -6)
    assert node.children == [] and node.frontier == []
    assert node.major_subset == Region.from_box(ROOT.box, -6)


def test_iterate_once_children_invariants():
    v = np.full(1024, 0.01)
    v[300:304] += 500.0
    f = GridFunction.from_array(v, -10)
    node = iterate_once(ROOT, f, f, 64.0, C1, -12)
    assert node.children
    painted = Region.empty(1, -12)
    for q in node.children:
        assert ROOT.contains_cube(q) and q != ROOT
        assert node.omega.contains_box(dilate_box(q, 34))
        r = Region.from_box(q.box, -12)
        assert painted.is_disjoint(r)
        painted = painted.union(r)
    assert node.omega.difference(Region.from_box(dilate_box(ROOT, 34), -12)).is_empty


def test_zero_functions_single_entry():
    z = GridFunction.from_array(np.zeros(64), -6)
    fam = build_sparse(z, z, ROOT)
    assert len(fam.entries) == 1
    e = fam.entries[0]
    assert e.dilated == dilate(ROOT, 17) and e.major_subset == Region.from_box(ROOT.box, -6)
    assert sparse_form(fam, z, z) == 0.0


def test_indicator_family():
    f = _ones()
    fam = build_sparse(f, f, ROOT)
    assert len(fam.entries) == 1 and fam.certified
    assert fam.eta_certified == pytest.approx(1 / 17, rel=1e-15)
    assert sparse_form(fam, f, f) == pytest.approx(1 / 17, rel=1e-14)


def test_family_invariants_with_recursion():
    rng = np.random.default_rng(1)
    for _ in range(5):
        f1, f2 = random_pair(rng)
        fam = build_sparse(f1, f2, ROOT, SparseParams(c0=64.0))
        assert fam.certified and fam.disjoint
        assert fam.eta_certified >= 0.5 / 17
        for n, m, bound in fam.decay_series()[1:]:
            assert m <= bound
        # nesting: every base cube lies in exactly one cube of the previous generation
        by_gen = {}
        for e in fam.entries:
            by_gen.setdefault(e.generation, []).append(e.base)
        for g in range(1, max(by_gen) + 1):
            for q in by_gen[g]:
                assert sum(p.contains_cube(q) and p != q for p in by_gen[g - 1]) == 1
        for e in fam.entries:
            assert Region.from_box(e.base.box, fam.s_floor).difference(e.major_subset).measure >= 0
            assert e.major_subset.difference(Region.from_box(e.base.box, fam.s_floor)).is_empty


def test_family_does_not_take_a_kernel():
    import inspect

    assert "kernel" not in inspect.signature(build_sparse).parameters


def test_apply_sparse_self_adjoint_and_monotone():
    rng = np.random.default_rng(2)
    f1, f2 = random_pair(rng)
    fam = build_sparse(f1, f2, ROOT, SparseParams(c0=64.0))
    a1 = apply_sparse(fam, f1)
    lhs = math.fsum((a1.values * f2.values).ravel()) * f2.cell_volume
    assert lhs == pytest.approx(sparse_form(fam, f1, f2), rel=1e-12)
    g = f1.with_values(f1.values + rng.random(f1.values.shape))
    assert np.all(apply_sparse(fam, g).values >= a1.values - 1e-12)


def test_sparse_form_refinement_invariant():
    rng = np.random.default_rng(3)
    f1, f2 = random_pair(rng)
    fam = build_sparse(f1, f2, ROOT, SparseParams(c0=64.0))
    a = sparse_form(fam, f1, f2)
    b = sparse_form(fam, f1.refine(2), f2.refine(2))
    assert b == pytest.approx(a, rel=1e-9)


def test_invalid_inputs():
    f = _ones()
    with pytest.raises(ValueError):
        build_sparse(f.with_values(-f.values), f, ROOT)
    with pytest.raises(ValueError):
        build_sparse(f, f, DyadicCube(-1, (0,)))
    with pytest.raises(ValueError):
        build_sparse(f, f, ROOT, SparseParams(s_floor=-2))
    with pytest.raises(ValueError):
        SparseParams(eta0=1.0)


def test_dominate_trivial_cases():
    z = GridFunction.from_array(np.zeros(64), -6)
    cert = dominate(HILBERT, PROFILE, z, z, ROOT)
    assert cert.pairing.value == 0 and cert.sparse_form == 0 and cert.residual == 0
    one = _ones()
    cert = dominate(HILBERT, PROFILE, one, one, ROOT)
    assert abs(cert.pairing.value) <= 1e-12 and cert.ratio == pytest.approx(0.0, abs=1e-10)


def test_dominate_half_intervals():
    f1 = GridFunction.from_array([1.0, 0.0], -1)
    f2 = GridFunction.from_array([0.0, 1.0], -1)
    cert = dominate(HILBERT, PROFILE, f1, f2, ROOT)
    # x > y on the pair of halves, so the pairing is +log 2
    assert cert.pairing.value == pytest.approx(math.log(2), abs=1e-12)
    assert cert.sparse_form > 0
    assert cert.ratio == pytest.approx(math.log(2) / cert.sparse_form)
    assert cert.ratio == pytest.approx(47.13, rel=1e-3)


def test_certificate_json_is_deterministic():
    rng = np.random.default_rng(4)
    f1, f2 = resolved_function(rng), resolved_function(rng)
    a = dominate(HILBERT, PROFILE, f1, f2, ROOT, SparseParams(s_floor=-10)).dumps()
    b = dominate(HILBERT, PROFILE, f1, f2, ROOT, SparseParams(s_floor=-10)).dumps()
    assert a == b
    assert '"c0_used"' in a and '"quadrature"' in a and '"generations"' in a


def test_residual_shrinks_with_floor():
    rng = np.random.default_rng(5)
    f1, f2 = resolved_function(rng), resolved_function(rng)
    res = [
        dominate(HILBERT, PROFILE, f1, f2, ROOT, SparseParams(s_floor=s))
        for s in (-9, -10, -11)
    ]
    assert res[0].residual > res[1].residual > res[2].residual
    assert res[0].residual_bound >= res[1].residual_bound >= res[2].residual_bound
    for c in res:
        assert c.residual <= c.residual_bound
