"""Command-line front end.

Every subcommand prints a JSON report (sorted keys, two-space indent) that
echoes the configuration used.  The exit status is nonzero only when a
certified property fails; measured ratios and constants never change it.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .config import ExperimentConfig, load_config
from .corpus import random_pair
from .geometry import DyadicCube, Region, scale_constants
from .gridfunc import GridFunction, cz_decompose, maximal, maximal_superlevel
from .kernels import BumpProfile, DiniDivergenceError, Truncation, dini_integral, get_kernel, get_modulus
from .pairing import pair
from .sparse import build_sparse, dominate
from .validation import check_cube
from .whitney import check_cover, whitney_decompose

__all__ = ["main", "build_parser"]


def _read_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _read_function(path: str) -> GridFunction:
    return GridFunction.from_json(_read_json(path))


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _emit(report: dict, cfg: ExperimentConfig, out=None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2, default=_plain)
    path = out or cfg.output
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def _truncation(kind: str, s: int) -> Truncation:
    return {
        "full": Truncation.full,
        "single": lambda: Truncation.single_scale(s),
        "head": lambda: Truncation.head_upto(s),
        "tail": lambda: Truncation.tail_from(s),
    }[kind]()


def cmd_whitney(cfg: ExperimentConfig, args) -> int:
    region = Region.from_json(_read_json(args.region))
    constants = scale_constants(region.dim, cfg.c_w_multiplier)
    floor = cfg.s_floor if cfg.s_floor is not None else region.grid_level
    cover = whitney_decompose(region, constants, floor)
    check = check_cover(cover)
    _emit({"config": cfg.to_json(), "cover": cover.to_json(), "checks": check}, cfg)
    return 0 if check["passed"] else 1


def cmd_czd(cfg: ExperimentConfig, args) -> int:
    f = _read_function(args.function)
    lam = args.level
    constants = scale_constants(f.dim, cfg.c_w_multiplier)
    omega = maximal_superlevel(f, lam)
    floor = cfg.s_floor if cfg.s_floor is not None else f.grid_level
    cover = whitney_decompose(omega, constants, floor)
    family = [q for q in cover.cubes + cover.frontier if q.level >= f.grid_level]
    dec = cz_decompose(f, family, lam, seed=cfg.seed)
    rep = dec.report
    ok = (
        rep["reconstruction_residual"] <= 1e-12 * max(rep["f_sup"], 1.0)
        and rep["max_atom_mean"] <= 1e-12 * max(rep["f_l1"], 1.0)
        and rep["bad_l1"] <= 2 * rep["f_l1"] + 1e-10
    )
    _emit({"config": cfg.to_json(), "n_cubes": len(family), "report": rep, "passed": ok}, cfg)
    return 0 if ok else 1


def cmd_maximal(cfg: ExperimentConfig, args) -> int:
    f = _read_function(args.function)
    report = {"config": cfg.to_json(), "maximal": maximal(f).to_json()}
    if args.threshold is not None:
        report["superlevel"] = maximal_superlevel(f, args.threshold).to_json()
    _emit(report, cfg)
    return 0


def cmd_pair(cfg: ExperimentConfig, args) -> int:
    f1, f2 = _read_function(args.f1), _read_function(args.f2)
    kernel = get_kernel(cfg.kernel)
    res = pair(_truncation(args.variant, args.scale), kernel, BumpProfile(), f1, f2, cfg.quadrature(), full_output=True)
    _emit({"config": cfg.to_json(), "kernel": kernel.name, "pairing": res.to_json()}, cfg)
    return 0


def cmd_dini(cfg: ExperimentConfig, args) -> int:
    try:
        res = dini_integral(get_modulus(args.modulus), tol=cfg.tol)
    except DiniDivergenceError as exc:
        _emit({"config": cfg.to_json(), "modulus": args.modulus, "error": str(exc),
               "partial_sum": exc.partial_sum}, cfg)
        return 1
    _emit({"config": cfg.to_json(), "modulus": args.modulus, "value": res.value, "error": res.error,
           "pieces": res.pieces, "converged": res.converged}, cfg)
    return 0


def _pairs(cfg: ExperimentConfig, args):
    if args.f1:
        f1 = _read_function(args.f1)
        f2 = _read_function(args.f2) if args.f2 else f1
        return [(f1, f2)]
    rng = np.random.default_rng(cfg.seed)
    n = 1 << -cfg.grid_level
    return [random_pair(rng, n, cfg.grid_level) for _ in range(cfg.trials)]


def cmd_sparse(cfg: ExperimentConfig, args) -> int:
    results, ok = [], True
    csv_parts = []
    for i, (f1, f2) in enumerate(_pairs(cfg, args)):
        root = check_cube(cfg.root, f1.dim)
        fam = build_sparse(f1, f2, root, cfg.sparse_params())
        ok &= fam.certified
        results.append({"trial": i, "family": fam.to_json()})
        csv_parts.append(fam.generations_csv() if i == 0 else fam.generations_csv().split("\n", 1)[1])
    _write_csv("".join(csv_parts), cfg.csv_output)
    _emit({"config": cfg.to_json(), "results": results, "all_certified": ok}, cfg)
    return 0 if ok else 1


def cmd_dominate(cfg: ExperimentConfig, args) -> int:
    kernel = get_kernel(cfg.kernel)
    results, ok = [], True
    for i, (f1, f2) in enumerate(_pairs(cfg, args)):
        root = check_cube(cfg.root, f1.dim)
        cert = dominate(kernel, BumpProfile(), f1, f2, root, cfg.sparse_params(), cfg.quadrature())
        ok &= cert.family.certified
        results.append({"trial": i, "certificate": cert.to_json()})
    _emit({"config": cfg.to_json(), "results": results, "all_certified": ok}, cfg)
    return 0 if ok else 1


def cmd_a2(cfg: ExperimentConfig, args) -> int:
    from .a2 import a2_sweep

    if cfg.dim != 1:
        raise SystemExit("the weighted experiment is one dimensional")
    exps = np.linspace(-args.max_exponent, args.max_exponent, args.points)
    sweep = a2_sweep(exps, grid_level=cfg.grid_level, params=cfg.sparse_params(), seed=cfg.seed)
    _write_csv(sweep.to_csv(), cfg.csv_output)
    _emit({"config": cfg.to_json(), "sweep": sweep.to_json()}, cfg)
    return 0


def _selftest_checks() -> dict:
    checks = {}
    h = get_kernel("hilbert")
    f1 = GridFunction.from_array([1.0], 0, (0,))
    f2 = GridFunction.from_array([1.0], 0, (2,))
    v = pair(Truncation.full(), h, BumpProfile(), f1, f2)
    checks["hilbert_separated_cells"] = abs(v - (3 * math.log(3) - 4 * math.log(2))) <= 1e-8
    checks["dini_linear"] = abs(dini_integral(get_modulus("linear")).value - 1.0) <= 1e-8
    checks["dini_sqrt"] = abs(dini_integral(get_modulus("sqrt")).value - 2.0) <= 1e-8
    x = np.geomspace(2.0 ** -20, 2.0 ** 20, 257)
    prof = BumpProfile()
    total = sum(prof.psi(x / 2.0 ** k) for k in range(-30, 31))
    checks["partition_of_unity"] = float(np.abs(total - 1).max()) <= 1e-10
    c = scale_constants(1)
    cover = whitney_decompose(Region.from_box(DyadicCube(0, (0,)).box, -8), c, -8)
    checks["whitney_unit_interval"] = check_cover(cover)["passed"]
    one = GridFunction.from_array(np.ones(64), -6)
    fam = build_sparse(one, one, DyadicCube(0, (0,)))
    checks["indicator_family"] = len(fam.entries) == 1 and fam.eta_certified == 1 / 17
    return {k: bool(v) for k, v in checks.items()}


def cmd_selftest(cfg: ExperimentConfig, args) -> int:
    checks = _selftest_checks()
    _emit({"config": cfg.to_json(), "checks": checks, "passed": all(checks.values())}, cfg)
    return 0 if all(checks.values()) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--floor", type=int, dest="s_floor", help="floor level of the construction")
    common.add_argument("--eta0", type=float)
    common.add_argument("--c0", type=float)
    common.add_argument("--cm", type=float, dest="c_m")
    common.add_argument("--kernel")
    common.add_argument("--grid-level", type=int, dest="grid_level")
    common.add_argument("--trials", type=int)
    common.add_argument("--output", "-o", help="write the JSON report here instead of stdout")
    common.add_argument("--csv", dest="csv_output", help="CSV output path where supported")

    p = argparse.ArgumentParser(prog="sparsedom", description="Sparse domination toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("whitney", parents=[common], help="Whitney cover of a region file")
    s.add_argument("region")
    s.set_defaults(func=cmd_whitney)

    s = sub.add_parser("czd", parents=[common], help="Calderon-Zygmund decomposition at a level")
    s.add_argument("function")
    s.add_argument("--level", type=float, required=True)
    s.set_defaults(func=cmd_czd)

    s = sub.add_parser("maximal", parents=[common], help="lattice maximal function")
    s.add_argument("function")
    s.add_argument("--threshold", type=float)
    s.set_defaults(func=cmd_maximal)

    s = sub.add_parser("pair", parents=[common], help="bilinear pairing of a truncated kernel")
    s.add_argument("f1")
    s.add_argument("f2")
    s.add_argument("--variant", choices=["full", "single", "head", "tail"], default="full")
    s.add_argument("--scale", type=int, default=0)
    s.set_defaults(func=cmd_pair)

    s = sub.add_parser("dini", parents=[common], help="Dini integral of a modulus")
    s.add_argument("modulus", help="linear, sqrt, log2 or holder:<alpha>")
    s.set_defaults(func=cmd_dini)

    for name, func, text in (
        ("sparse", cmd_sparse, "sparse family of a function pair"),
        ("dominate", cmd_dominate, "sparse family plus domination certificate"),
    ):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("f1", nargs="?", help="GridFunction JSON; seeded random pairs when omitted")
        s.add_argument("f2", nargs="?")
        s.set_defaults(func=func)

    s = sub.add_parser("a2", parents=[common], help="power-weight sweep of the sparse operator")
    s.add_argument("--points", type=int, default=13)
    s.add_argument("--max-exponent", type=float, default=0.9, dest="max_exponent")
    s.set_defaults(func=cmd_a2)

    s = sub.add_parser("selftest", parents=[common], help="closed-form sanity checks")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config).override(
        seed=args.seed,
        tol=args.tol,
        s_floor=args.s_floor,
        eta0=args.eta0,
        c0=args.c0,
        c_m=args.c_m,
        kernel=args.kernel,
        grid_level=args.grid_level,
        trials=args.trials,
        output=args.output,
        csv_output=args.csv_output,
    )
    if args.command == "a2" and args.grid_level is None and args.config is None:
        cfg = cfg.override(grid_level=-12)
    return int(args.func(cfg, args))


if __name__ == "__main__":
    sys.exit(main())
