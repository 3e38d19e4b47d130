import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import maximal_1d, maximal_2d
from sparsedom.geometry import ConcentricBox, DyadicCube, Region, scale_constants
from sparsedom.gridfunc import (
    GridFunction,
    average,
    cz_decompose,
    maximal,
    maximal_superlevel,
    superlevel,
)
from sparsedom.whitney import whitney_decompose


def test_average_examples():
    f = GridFunction.from_array(np.full(8, 3.0), -3)
    assert average(f, DyadicCube(0, (0,)).box) == 3.0
    one = GridFunction.from_array(np.ones(4), -2)
    assert average(one, ConcentricBox(0, (0,), (2,))) == 0.5


def test_average_matches_naive_sum():
    rng = np.random.default_rng(0)
    v = rng.random((20, 30))
    f = GridFunction.from_array(v, -4, (3, -7))
    for _ in range(200):
        lo = rng.integers([-2, -10], [25, 25])
        hi = lo + rng.integers(1, 12, 2)
        box = ConcentricBox(-4, lo, hi)
        naive = 0.0
        for i in range(lo[0], hi[0]):
            for j in range(lo[1], hi[1]):
                if 3 <= i < 23 and -7 <= j < 23:
                    naive += v[i - 3, j + 7]
        assert average(f, box) == pytest.approx(naive / box.n_cells, rel=1e-13, abs=1e-15)


def test_json_roundtrip_is_exact():
    rng = np.random.default_rng(1)
    f = GridFunction.from_array(rng.random((3, 5)) * 1e-7, -3, (1, 2))
    g = GridFunction.from_json(f.to_json())
    assert np.array_equal(f.values, g.values) and f.box == g.box


def test_refine_preserves_averages():
    rng = np.random.default_rng(2)
    f = GridFunction.from_array(rng.random(16), -4)
    g = f.refine(3)
    assert g.integral() == pytest.approx(f.integral(), rel=1e-14)
    assert average(g, ConcentricBox(-2, (1,), (3,))) == pytest.approx(average(f, ConcentricBox(-2, (1,), (3,))))


def test_maximal_examples():
    const = GridFunction.from_array(np.full(10, 2.5), 0)
    assert np.allclose(maximal(const).values, 2.5)
    rng = np.random.default_rng(3)
    f = GridFunction.from_array(rng.random(40), 0)
    m = maximal(f)
    i = int(np.argmax(f.values))
    assert m.values[i] == f.sup()
    ind = GridFunction.from_array(np.ones(4), -2)
    win = ConcentricBox(-2, (0,), (12,))
    m = maximal(ind, win)
    assert m.values[8] == pytest.approx(1 / 2.25, rel=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=40), st.integers(0, 10), st.integers(0, 10))
def test_maximal_matches_bruteforce_1d(vals, left, right):
    f = GridFunction.from_array(vals, 0, (left,))
    win = ConcentricBox(0, (0,), (left + len(vals) + right,))
    got = maximal(f, win).values
    want = maximal_1d(np.asarray(vals), 0, win.hi[0], left)
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_maximal_matches_bruteforce_2d():
    rng = np.random.default_rng(4)
    for _ in range(5):
        v = rng.random((9, 12)) * (rng.random((9, 12)) < 0.3)
        f = GridFunction.from_array(v, 0)
        assert np.allclose(maximal(f).values, maximal_2d(v), rtol=1e-12, atol=1e-14)


def test_superlevel_examples():
    zero = GridFunction.from_array(np.zeros(8), 0)
    assert superlevel(maximal(zero), 0.1).is_empty
    rng = np.random.default_rng(5)
    f = GridFunction.from_array(rng.random(30), 0)
    mf = maximal(f)
    assert superlevel(mf, mf.sup()).is_empty
    t = float(np.median(mf.values))
    r = superlevel(mf, t)
    assert set(r.cells) == {(i,) for i in range(30) if mf.values[i] > t}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 2))
def test_fast_superlevel_matches_maximal(seed, d):
    rng = np.random.default_rng(seed)
    shape = (64,) if d == 1 else (14, 14)
    v = rng.random(shape) ** 4 * (rng.random(shape) < 0.2) * 50
    f = GridFunction.from_array(v, -3)
    win = ConcentricBox(-3, (-8,) * d, tuple(n + 8 for n in shape))
    t = float(rng.uniform(0.05, 20))
    fast = maximal_superlevel(f, t, win)
    slow = superlevel(maximal(f, win), t)
    assert set(fast.cells) == set(slow.cells)


def test_czd_examples():
    f = GridFunction.from_array(np.ones(8), -3)
    dec = cz_decompose(f, [DyadicCube(-1, (0,))], 1.0)
    assert np.allclose(dec.bad().values, 0) and np.allclose(dec.good.values, f.values)
    f = GridFunction.from_array([2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], -3)
    dec = cz_decompose(f, [DyadicCube(-1, (0,))], 1.0)
    _, atom = dec.bad_atoms[0]
    assert np.array_equal(atom.values, [1.0, 1.0, -1.0, -1.0])
    assert atom.integral() == 0.0


def test_czd_on_whitney_family_of_superlevel_set():
    rng = np.random.default_rng(6)
    v = rng.random(1024) * 0.1
    v[500:503] += 300.0
    f = GridFunction.from_array(v, -10)
    lam = 2.0
    omega = maximal_superlevel(f, lam)
    cover = whitney_decompose(omega, scale_constants(1), -10)
    family = cover.cubes + cover.frontier
    dec = cz_decompose(f, family, lam)
    rep = dec.report
    assert rep["reconstruction_residual"] <= 1e-12 * f.sup()
    assert rep["max_atom_mean"] <= 1e-12 * f.l1()
    assert rep["bad_l1"] <= 2 * f.l1() + 1e-10
    assert math.isfinite(rep["probe_ratio"])
    # off the frontier every Whitney cube L sits in a lattice interval of
    # length at most (2 C_W + 2) l(L) that reaches a cell where the maximal
    # function is at most lam, so <f>_L <= (2 C_W + 2) lam
    good = dec.good.values.copy()
    for q in cover.frontier:
        good[q.box.at_level(-10).slices(dec.good.box.lo)] = 0.0
    assert good.max() <= (2 * 36 + 2) * lam


def test_czd_rejects_overlaps():
    f = GridFunction.from_array(np.ones(8), -3)
    with pytest.raises(ValueError):
        cz_decompose(f, [DyadicCube(-1, (0,)), DyadicCube(-2, (0,))], 1.0)
    with pytest.raises(ValueError):
        cz_decompose(f, [], 0.0)


def test_support_region():
    f = GridFunction.from_array([0.0, 1.0, 0.0, 2.0], 0)
    assert f.support_region() == Region.from_cells(1, 0, [(1,), (3,)])
