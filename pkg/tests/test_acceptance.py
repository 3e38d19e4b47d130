"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) or through pytest, where
the lines are repeated in the terminal summary.
"""
import json
import math
import pathlib
import time

import numpy as np
import pytest

from acceptance_setup import ROOT1, cz_case, domination_runs, random_region
from sparsedom.a2 import a2_sweep
from sparsedom.corpus import random_pair
from sparsedom.geometry import DyadicCube, scale_constants
from sparsedom.gridfunc import GridFunction
from sparsedom.kernels import BumpProfile, Truncation, dini_integral, get_kernel, get_modulus
from sparsedom.pairing import check_localization, pair, single_scale_ratio
from sparsedom.sparse import SparseParams, build_sparse
from sparsedom.whitney import check_cover, whitney_decompose

PROFILE = BumpProfile()
HILBERT = get_kernel("hilbert")
RIESZ = get_kernel("riesz2d-x1")
BASELINES = json.loads((pathlib.Path(__file__).parent / "data" / "baselines.json").read_text())
RESULTS = []


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d} ({title}): {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_01_whitney_cover():
    rng = np.random.default_rng(101)
    violations, cubes, regions = 0, 0, 0
    for d in (1, 2):
        for _ in range(25):
            region = random_region(rng, d)
            # the finest floor gives the two-dimensional regions room for cubes
            floor = region.grid_level - (0 if d == 1 else 2)
            cover = whitney_decompose(region, scale_constants(d), floor)
            rep = check_cover(cover)
            violations += len(rep["violations"])
            cubes += rep["n_cubes"]
            regions += 1
    record(1, "Whitney", violations == 0 and regions == 50,
           f"{regions} regions, {cubes} cubes checked exactly, {violations} violations")


def test_criterion_02_cz_decomposition():
    worst_res = worst_mean = worst_l1 = 0.0
    drift = 0.0
    for seed in range(20):
        rep = cz_case(seed).report
        worst_res = max(worst_res, rep["reconstruction_residual"] / rep["f_sup"])
        worst_mean = max(worst_mean, rep["max_atom_mean"] / rep["f_l1"])
        worst_l1 = max(worst_l1, rep["bad_l1"] - 2 * rep["f_l1"])
        assert math.isfinite(rep["probe_ratio"])
        base = BASELINES["czd_probe_ratio"][seed]
        drift = max(drift, abs(rep["probe_ratio"] - base) / max(base, 1e-300) if base else rep["probe_ratio"])
    ok = worst_res <= 1e-12 and worst_mean <= 1e-12 and worst_l1 <= 1e-10 and drift <= 1e-9
    record(2, "CZ decomposition", ok,
           f"residual/sup {worst_res:.1e}, |mean|/L1 {worst_mean:.1e}, "
           f"sum|b|-2|f| {worst_l1:.3g}, probe drift {drift:.1e}")


def test_criterion_03_single_scale_bound():
    rng = np.random.default_rng(303)
    bound = 2 * HILBERT.size_constant * 2 ** HILBERT.dim
    worst = 0.0
    for _ in range(20):
        v = rng.random(64) * (rng.random(64) < 0.5)
        v[rng.integers(64)] += 20.0
        f = GridFunction.from_array(v, -6)
        for s in range(-6, 7):
            r = 2.0 ** (s + 1)
            pts = np.concatenate([rng.uniform(-r, 1 + r, 150), rng.uniform(0, 1, 50)])
            worst = max(worst, single_scale_ratio(HILBERT, PROFILE, s, f, pts))
    record(3, "single-scale bound", worst <= bound, f"max |T_s f| 2^sd / |f|_1 = {worst:.4f} <= {bound}")


def test_criterion_04_localization():
    rng = np.random.default_rng(404)
    violations, samples = 0, 0
    for d, kernel in ((1, HILBERT), (2, RIESZ)):
        for i in range(10):
            level = int(rng.integers(-3, 2))
            cube = DyadicCube(level, tuple(int(a) for a in rng.integers(-4, 4, d)))
            g = level - 3
            f = GridFunction.from_array(rng.random((8,) * d) * (rng.random((8,) * d) < 0.6), g,
                                        tuple(8 * a for a in cube.anchor))
            rep = check_localization(kernel, PROFILE, cube, f, scale_constants(d), 100_000, seed=i)
            violations += rep.annulus_violations + rep.support_violations
            samples += rep.annulus_samples + rep.support_samples
    worst = 0.0
    for d, kernel in ((1, HILBERT), (2, RIESZ)):
        shape = (40,) if d == 1 else (6, 6)
        f1 = GridFunction.from_array(rng.random(shape), -3)
        f2 = GridFunction.from_array(rng.random(shape), -3, (2,) * d)
        full = pair(Truncation.full(), kernel, PROFILE, f1, f2)
        for s0 in range(-4, 3):
            tel = pair(Truncation.head_upto(s0), kernel, PROFILE, f1, f2) + pair(
                Truncation.tail_from(s0 + 1), kernel, PROFILE, f1, f2)
            worst = max(worst, abs(tel - full) / abs(full))
    record(4, "localization", violations == 0 and worst <= 1e-9,
           f"{samples} samples, {violations} violations; telescoping rel. error {worst:.1e}")


def test_criterion_05_partition_of_unity():
    rng = np.random.default_rng(505)
    x = np.exp2(rng.uniform(-28, 28, 1000)) * rng.choice([-1.0, 1.0], 1000)
    total = sum(PROFILE.psi(np.abs(x) / 2.0 ** k) for k in range(-30, 31))
    err = float(np.abs(total - 1).max())
    r = np.abs(rng.uniform(-4, 4, 100_000))
    outside = (r <= 0.5) | (r >= 2.0)
    leak = float(np.abs(PROFILE.psi(r[outside])).max())
    # near the ends of the shell psi is below double precision resolution
    inside = float(PROFILE.psi(r[(r >= 0.55) & (r <= 1.95)]).min())
    record(5, "partition of unity", err <= 1e-10 and leak == 0.0 and inside > 0,
           f"max |sum - 1| = {err:.1e}; psi outside (1/2, 2) max {leak}")


def test_criterion_06_quadrature_oracle():
    one = GridFunction.from_array([1.0], 0, (0,))
    three = GridFunction.from_array([1.0], 0, (2,))
    err = abs(pair(Truncation.full(), HILBERT, PROFILE, one, three) - (3 * math.log(3) - 4 * math.log(2)))
    rng = np.random.default_rng(606)
    anti = 0.0
    for _ in range(5):
        f = GridFunction.from_array(rng.random(32), -5)
        g = GridFunction.from_array(rng.random(32), -5, (7,))
        anti = max(anti, abs(pair(Truncation.full(), HILBERT, PROFILE, f, f)))
        anti = max(anti, abs(pair(Truncation.full(), HILBERT, PROFILE, f, g)
                             + pair(Truncation.full(), HILBERT, PROFILE, g, f)))
        f2 = GridFunction.from_array(rng.random((5, 5)), -3)
        anti = max(anti, abs(pair(Truncation.full(), RIESZ, PROFILE, f2, f2)))
    record(6, "quadrature oracle", err <= 1e-8 and anti <= 1e-10,
           f"|pair - (3 ln3 - 4 ln2)| = {err:.1e}; antisymmetric max {anti:.1e}")


def test_criterion_07_dini():
    a = abs(dini_integral(get_modulus("linear")).value - 1.0)
    b = abs(dini_integral(get_modulus("sqrt")).value - 2.0)
    record(7, "Dini integrals", a <= 1e-8 and b <= 1e-8, f"|I(t) - 1| = {a:.1e}, |I(sqrt t) - 2| = {b:.1e}")


def _sparsity_run(params):
    rng = np.random.default_rng(808)
    failures, entries, escalations = 0, 0, 0
    for _ in range(100):
        f1, f2 = random_pair(rng, 1024, -10)
        fam = build_sparse(f1, f2, ROOT1, params)
        decay = all(m <= b for n, m, b in fam.decay_series() if n >= 1)
        ok = fam.disjoint and fam.eta_certified >= 0.5 / 17 and decay
        failures += not ok
        entries += len(fam.entries)
        escalations += fam.escalations
    return failures, entries, escalations


def test_criterion_08_sparsity():
    f_def, e_def, _ = _sparsity_run(SparseParams(eta0=0.5))
    f_low, e_low, esc = _sparsity_run(SparseParams(eta0=0.5, c0=64.0))
    record(8, "sparsity", f_def == 0 and f_low == 0,
           f"100 pairs at default c0 ({e_def} entries) and 100 at c0=64 "
           f"({e_low} entries, {esc} escalations): {f_def + f_low} failures")


@pytest.fixture(scope="module")
def domination():
    return domination_runs()


def test_criterion_09_domination(domination):
    worst_change, worst_pin = 0.0, 0.0
    finite, shrinks = True, True
    for i, (base, fine, by_floor) in enumerate(domination):
        finite &= base.ratio is not None and math.isfinite(base.ratio)
        worst_change = max(worst_change, abs(fine.ratio - base.ratio) / base.ratio)
        worst_pin = max(worst_pin, abs(base.ratio - BASELINES["domination_ratio"][i]) / base.ratio)
        res = [c.residual for c in by_floor]
        shrinks &= all(a > b for a, b in zip(res, res[1:]))
    ok = finite and worst_change <= 0.10 and shrinks and worst_pin <= 1e-9
    ratios = [b.ratio for b, _, _ in domination]
    record(9, "domination stability", ok,
           f"25 pairs, ratios {min(ratios):.3g}..{max(ratios):.3g}, refinement change {worst_change:.1e}, "
           f"residuals decrease with floor: {shrinks}, baseline drift {worst_pin:.1e}")


def test_criterion_10_a2_sweep():
    t0 = time.perf_counter()
    sweep = a2_sweep()
    elapsed = time.perf_counter() - t0
    record(10, "A2 sweep", sweep.slope <= 1.15 and elapsed <= 300,
           f"log-log slope {sweep.slope:.4f} over {len(sweep.points)} weights, {elapsed:.1f} s")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
