"""Run configuration echoed into every report."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .pairing import QuadratureConfig
from .sparse import SparseParams

__all__ = ["ExperimentConfig", "load_config"]


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 1
    grid_level: int = -10
    kernel: str = "hilbert"
    kernel_params: dict = field(default_factory=dict)
    eta0: float = 0.5
    c0: float | None = None
    c_m: float | None = None
    c_w_multiplier: int = 1
    s_floor: int | None = None
    root_level: int = 0
    root_anchor: list | None = None
    quad_order: int = 8
    quad_max_depth: int = 64
    quad_rtol: float = 1e-12
    tol: float = 1e-10
    seed: int = 0
    trials: int = 1
    output: str | None = None
    csv_output: str | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not 0 < self.eta0 < 1:
            raise ValueError("eta0 must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be positive")

    @property
    def root(self) -> dict:
        anchor = [0] * self.dim if self.root_anchor is None else list(self.root_anchor)
        return {"level": self.root_level, "anchor": anchor}

    def sparse_params(self) -> SparseParams:
        return SparseParams(
            eta0=self.eta0, c0=self.c0, c_m=self.c_m, c_w_multiplier=self.c_w_multiplier, s_floor=self.s_floor
        )

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(order=self.quad_order, max_depth=self.quad_max_depth, rtol=self.quad_rtol)

    def override(self, **kw) -> "ExperimentConfig":
        """Copy with every non-``None`` keyword applied."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_json(self) -> dict:
        return asdict(self)


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        obj = json.load(fh)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**obj)
