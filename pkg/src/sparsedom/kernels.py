"""Kernels, moduli of continuity and the radial Littlewood-Paley bump."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "BumpProfile",
    "ModulusOfContinuity",
    "Kernel",
    "Truncation",
    "DiniResult",
    "DiniDivergenceError",
    "psi_eval",
    "kernel_truncated",
    "dini_integral",
    "hilbert_kernel",
    "riesz_kernel",
    "get_kernel",
    "get_modulus",
    "KERNELS",
]


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


@dataclass(frozen=True)
class BumpProfile:
    """Radial cutoff: phi = 1 on |x| <= 1, phi = 0 on |x| >= 2, smooth gluing between."""

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r <= 1.0, 1.0, 0.0)
        mid = (r > 1.0) & (r < 2.0)
        if np.any(mid):
            rm = r[mid]
            a = _h(2.0 - rm)
            b = _h(rm - 1.0)
            out = out.astype(float)
            out[mid] = a / (a + b)
        return out

    def psi(self, r):
        """psi(r) = phi(r) - phi(2r), supported in 1/2 < r < 2."""
        r = np.asarray(r, dtype=float)
        return self.phi(r) - self.phi(2.0 * r)


def _norm(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.abs(x)
    return np.sqrt((x * x).sum(axis=-1))


def psi_eval(profile: BumpProfile, x) -> np.ndarray:
    """psi at a point (last axis holds coordinates) or at a radius array."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if x.ndim == 0 else _norm(x)
    return profile.psi(r)


@dataclass(frozen=True)
class Truncation:
    """Radial weight selecting part of the scale decomposition.

    ``full``: the whole kernel; ``single``: scale ``s`` only;
    ``tail``: scales ``>= s``; ``head``: scales ``<= s``.
    """

    kind: str
    s: int = 0

    def __post_init__(self):
        if self.kind not in ("full", "single", "tail", "head"):
            raise ValueError(f"unknown truncation {self.kind!r}")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def single_scale(cls, s: int):
        return cls("single", int(s))

    @classmethod
    def tail_from(cls, s: int):
        return cls("tail", int(s))

    @classmethod
    def head_upto(cls, s: int):
        return cls("head", int(s))

    def weight(self, profile: BumpProfile, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "full":
            return np.ones_like(r)
        if self.kind == "single":
            return profile.psi(r / 2.0 ** self.s)
        if self.kind == "head":
            # sum_{k <= s} psi(r / 2^k) telescopes to phi(r / 2^s)
            return profile.phi(r / 2.0 ** self.s)
        return 1.0 - profile.phi(r / 2.0 ** (self.s - 1))

    def zero_outside(self) -> tuple:
        """Open radius interval outside of which the weight vanishes."""
        if self.kind == "full":
            return 0.0, math.inf
        if self.kind == "single":
            return 2.0 ** (self.s - 1), 2.0 ** (self.s + 1)
        if self.kind == "head":
            return 0.0, 2.0 ** (self.s + 1)
        return 2.0 ** (self.s - 1), math.inf

    def one_on(self) -> Optional[tuple]:
        """Closed radius interval on which the weight is identically one."""
        if self.kind == "full":
            return 0.0, math.inf
        if self.kind == "head":
            return 0.0, 2.0 ** self.s
        if self.kind == "tail":
            return 2.0 ** self.s, math.inf
        return None

    def vanishes_on(self, rmin, rmax) -> np.ndarray:
        a, b = self.zero_outside()
        return (np.asarray(rmax) <= a) | (np.asarray(rmin) >= b)

    def is_one_on(self, rmin, rmax) -> np.ndarray:
        iv = self.one_on()
        if iv is None:
            return np.zeros(np.shape(rmin), dtype=bool)
        return (np.asarray(rmin) >= iv[0]) & (np.asarray(rmax) <= iv[1])

    def singular_weight(self) -> bool:
        """Whether the weight is nonzero near the diagonal."""
        return self.kind in ("full", "head")

    def to_json(self) -> dict:
        return {"kind": self.kind, "s": self.s}


@dataclass(frozen=True)
class ModulusOfContinuity:
    func: Callable
    name: str = "omega"

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def check_monotone(self, n: int = 1000) -> bool:
        t = np.linspace(0.0, 1.0, n)
        v = self(t)
        return bool(np.all(np.diff(v) >= -1e-15) and np.all(v >= 0))

    def tilde(self) -> "ModulusOfContinuity":
        """t + omega(t), the modulus inherited by the truncated kernels."""
        return ModulusOfContinuity(lambda t: t + self.func(t), f"t+{self.name}")


MODULI = {
    "linear": lambda t: t,
    "sqrt": lambda t: np.sqrt(t),
    "log2": lambda t: np.where(t > 0, 1.0 / (1.0 + np.log(1.0 / np.maximum(t, 1e-300))) ** 2, 0.0),
}


def get_modulus(name: str) -> ModulusOfContinuity:
    if name.startswith("holder:"):
        alpha = float(name.split(":", 1)[1])
        return ModulusOfContinuity(lambda t: np.power(t, alpha), name)
    if name not in MODULI:
        raise KeyError(f"unknown modulus {name!r}; choose from {sorted(MODULI)} or holder:<alpha>")
    return ModulusOfContinuity(MODULI[name], name)


@dataclass(frozen=True)
class Kernel:
    """Difference kernel K(x, y) = k(x - y) of a Calderon-Zygmund operator.

    ``k`` maps an array of differences (last axis = coordinates) to values.
    ``exact_pair(delta, h)`` optionally returns the exact integral of the full
    kernel over cell pairs ``x in c + delta``, ``y in c`` for cells of side ``h``.
    """

    name: str
    dim: int
    k: Callable
    size_constant: float
    modulus: ModulusOfContinuity
    smooth_constant: float
    odd: bool = True
    exact_pair: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __call__(self, x, y):
        return self.k(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def transpose(self) -> "Kernel":
        k = self.k
        ex = self.exact_pair
        return Kernel(
            self.name + "^t",
            self.dim,
            lambda t: k(-np.asarray(t)),
            self.size_constant,
            self.modulus,
            self.smooth_constant,
            self.odd,
            None if ex is None else (lambda delta, h: ex(-np.asarray(delta), h)),
            dict(self.params),
        )

    def check_size(self, n: int = 10_000, seed: int = 0) -> float:
        """Largest sampled |K(x,y)| |x-y|^d / C_K; at most one when the bound holds."""
        rng = np.random.default_rng(seed)
        t = _sample_directions(rng, n, self.dim) * np.exp(rng.uniform(-12, 12, n))[:, None]
        r = _norm(t)
        return float(np.max(np.abs(self.k(t)) * r ** self.dim) / self.size_constant)

    def check_smoothness(self, n: int = 10_000, seed: int = 0) -> float:
        """Largest sampled ratio of the smoothness difference to its bound."""
        rng = np.random.default_rng(seed)
        d = self.dim
        scale = np.exp(rng.uniform(-8, 8, n))
        x = rng.normal(size=(n, d)) * scale[:, None]
        y = x + _sample_directions(rng, n, d) * scale[:, None] * rng.uniform(0.1, 4, n)[:, None]
        r = _norm(x - y)
        # differences below ~1e-6 r are dominated by cancellation error
        frac = np.maximum(0.5 * rng.uniform(0, 1, n) ** rng.uniform(1, 6, n), 1e-6)
        xp = x + _sample_directions(rng, n, d) * (frac * r)[:, None]
        diff = np.abs(self.k(x - y) - self.k(xp - y)) + np.abs(self.k(y - x) - self.k(y - xp))
        bound = self.smooth_constant * r ** (-d) * self.modulus(_norm(x - xp) / r)
        ok = bound > 0
        return float(np.max(diff[ok] / bound[ok]))


def _sample_directions(rng, n, d):
    v = rng.normal(size=(n, d))
    return v / _norm(v)[:, None]


def _hilbert_k(t):
    t = np.asarray(t, dtype=float)
    t = t[..., 0] if t.ndim and t.shape[-1] == 1 else t
    with np.errstate(divide="ignore"):
        return np.where(t != 0, 1.0 / np.where(t != 0, t, 1.0), 0.0)


def _xlogx(t):
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, t * np.log(np.where(a > 0, a, 1.0)) - t, 0.0)


def _hilbert_exact(delta, h):
    """int_{x in [Dh, Dh+h]} int_{y in [0, h]} dy dx / (x - y)."""
    D = np.asarray(delta, dtype=float).reshape(-1)
    a, b, c, e = D * h, D * h + h, 0.0, h
    G = _xlogx
    val = G(b - c) - G(a - c) - G(b - e) + G(a - e)
    return np.where(D == 0, 0.0, val)


def hilbert_kernel() -> Kernel:
    # |1/(x-y) - 1/(x'-y)| <= 2 |x-x'| / |x-y|^2 when 2|x-x'| <= |x-y|
    return Kernel(
        "hilbert", 1, _hilbert_k, 1.0, get_modulus("linear"), 4.0, True, _hilbert_exact,
        {"l2_norm": math.pi},
    )


def _riesz_k(t):
    t = np.asarray(t, dtype=float)
    r2 = (t * t).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r2 > 0, t[..., 0] / np.where(r2 > 0, r2, 1.0) ** 1.5, 0.0)


def riesz_kernel() -> Kernel:
    # |grad k(t)| <= 2/|t|^3, and |xi - y| >= |x - y|/2 on the segment
    # 2 pi times the normalized first Riesz transform, whose L^2 norm is 1
    return Kernel(
        "riesz2d-x1", 2, _riesz_k, 1.0, get_modulus("linear"), 32.0, True, None, {"l2_norm": 2 * math.pi}
    )


KERNELS = {"hilbert": hilbert_kernel, "riesz2d-x1": riesz_kernel}


def get_kernel(name: str) -> Kernel:
    if name not in KERNELS:
        raise KeyError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}")
    return KERNELS[name]()


def kernel_truncated(kernel: Kernel, profile: BumpProfile, s: int, x, y) -> np.ndarray:
    """K_s(x, y) = psi((x - y) / 2^s) K(x, y); exactly zero where psi vanishes."""
    t = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if kernel.dim == 1 and t.ndim == 0:
        t = t[None]
    if t.shape[-1] != kernel.dim:
        t = t[..., None]
    w = profile.psi(_norm(t) / 2.0 ** s)
    out = np.zeros(w.shape)
    nz = w != 0
    if np.any(nz):
        out[nz] = w[nz] * kernel.k(t[nz])
    return out


class DiniDivergenceError(ArithmeticError):
    def __init__(self, message, partial_sum):
        super().__init__(message)
        self.partial_sum = partial_sum


@dataclass(frozen=True)
class DiniResult:
    value: float
    error: float
    pieces: int
    converged: bool

    def __float__(self):
        return self.value


_MAX_PIECES = 1000
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _piece_integrals(omega, j0, j1):
    """int over [2^-j-1, 2^-j] of omega(t)/t, for j0 <= j < j1.

    With t = 2^-j u the piece becomes int_{1/2}^{1} omega(2^-j u) / u du.
    """
    u = 0.75 + 0.25 * _GL_NODES
    w = 0.25 * _GL_WEIGHTS
    j = np.arange(j0, j1)[:, None]
    vals = omega(np.ldexp(u[None, :], -j)) / u[None, :]
    coarse = (vals * w).sum(axis=1)
    # split each piece once more to estimate the quadrature error
    u1 = 0.625 + 0.125 * _GL_NODES
    u2 = 0.875 + 0.125 * _GL_NODES
    w2 = 0.125 * _GL_WEIGHTS
    fine = (omega(np.ldexp(u1[None, :], -j)) / u1 * w2).sum(axis=1) + (
        omega(np.ldexp(u2[None, :], -j)) / u2 * w2
    ).sum(axis=1)
    return fine, np.abs(fine - coarse)


def _tail_estimate(omega, J: int) -> tuple:
    """Estimate ln2 * sum_{i >= J} omega(2^-i) from omega at earlier dyadic points.

    Returns (estimate, exponent); exponent > 1 means summable power decay and
    geometric decay reports exponent = inf.
    """
    i = np.array([max(1, J // 2), J - 2, J - 1, J])
    a = np.asarray(omega(np.ldexp(1.0, -i)), dtype=float)
    if a[-1] == 0:
        return 0.0, math.inf
    q = a[-1] / a[-2] if a[-2] > 0 else 1.0
    q_prev = a[-2] / a[-3] if a[-3] > 0 else 1.0
    if max(q, q_prev) < 0.95:
        r = max(q, q_prev)
        return math.log(2) * a[-1] * r / (1 - r), math.inf
    # power law a_j ~ C j^-p
    p = math.log(a[0] / a[-1]) / math.log(i[-1] / i[0]) if a[0] > a[-1] and i[-1] > i[0] else 0.0
    if p <= 1.0:
        return math.inf, p
    return math.log(2) * a[-1] * J / (p - 1.0), p


def dini_integral(
    omega: ModulusOfContinuity,
    tol: float = 1e-10,
    cap: float = 1e6,
    max_pieces: int = 1000,
    block: int = 50,
) -> DiniResult:
    """int_0^1 omega(t)/t dt summed over dyadic pieces [2^-j-1, 2^-j].

    Pieces are added until the estimated tail plus quadrature error is below
    ``tol``.  A nonsummable tail raises :class:`DiniDivergenceError`.
    """
    # past about 2^-1000 the dyadic points leave the normal float range
    max_pieces = min(max_pieces, _MAX_PIECES)
    total = 0.0
    err = 0.0
    J = 0
    while J < max_pieces:
        j1 = min(J + block, max_pieces)
        vals, errs = _piece_integrals(omega, J, j1)
        total = math.fsum([total, *vals.tolist()])
        err += float(errs.sum())
        J = j1
        tail, p = _tail_estimate(omega, J)
        if total > cap and not math.isfinite(tail):
            raise DiniDivergenceError(f"partial sum {total:.3g} exceeds cap without tail decay", total)
        if math.isfinite(tail) and tail + err < tol:
            return DiniResult(total + tail, tail + err, J, True)
    tail, p = _tail_estimate(omega, J)
    if not math.isfinite(tail):
        raise DiniDivergenceError(f"modulus tail does not decay (exponent {p:.3g})", total)
    warnings.warn(f"Dini integral not within tol after {J} pieces; tail estimate {tail:.3g}", RuntimeWarning)
    return DiniResult(total + tail, tail + err, J, False)
