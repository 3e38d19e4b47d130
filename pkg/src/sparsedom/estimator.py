"""Estimator wrapper around the sparse construction."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .gridfunc import GridFunction
from .kernels import BumpProfile, get_kernel
from .pairing import QuadratureConfig
from .sparse import SparseParams, apply_sparse, build_sparse, dominate, sparse_form
from .validation import check_cube, check_eta, check_grid_function, check_pair, check_positive

__all__ = ["SparseDomination"]


class SparseDomination(BaseEstimator, TransformerMixin):
    """Fit a sparse family to a pair of nonnegative grid functions.

    ``fit(f1, f2)`` builds the family (``f2`` defaults to ``f1``); when
    ``kernel`` names a built-in kernel the domination certificate is computed
    too.  ``transform(f)`` applies the sparse averaging operator and
    ``score(f1, f2)`` evaluates the sparse bilinear form.  Plain arrays are
    read as cell values on the level-``grid_level`` grid anchored at the
    origin.
    """

    def __init__(
        self,
        eta0=0.5,
        c0=None,
        c_m=None,
        c_w_multiplier=1,
        s_floor=None,
        escalate=True,
        grid_level=0,
        root=None,
        kernel=None,
        c_op=None,
        quad_order=8,
        quad_rtol=1e-12,
    ):
        self.eta0 = eta0
        self.c0 = c0
        self.c_m = c_m
        self.c_w_multiplier = c_w_multiplier
        self.s_floor = s_floor
        self.escalate = escalate
        self.grid_level = grid_level
        self.root = root
        self.kernel = kernel
        self.c_op = c_op
        self.quad_order = quad_order
        self.quad_rtol = quad_rtol

    def _params(self) -> SparseParams:
        return SparseParams(
            eta0=check_eta(self.eta0),
            c0=check_positive(self.c0, "c0"),
            c_m=check_positive(self.c_m, "c_m"),
            c_w_multiplier=self.c_w_multiplier,
            s_floor=self.s_floor,
            escalate=self.escalate,
            c_op=check_positive(self.c_op, "c_op"),
        )

    def fit(self, f1, f2=None):
        f1, f2 = check_pair(f1, f1 if f2 is None else f2, self.grid_level)
        root = check_cube(self.root, f1.dim)
        params = self._params()
        if self.kernel is None:
            self.family_ = build_sparse(f1, f2, root, params)
            self.certificate_ = None
        else:
            quad = QuadratureConfig(order=self.quad_order, rtol=self.quad_rtol)
            self.certificate_ = dominate(get_kernel(self.kernel), BumpProfile(), f1, f2, root, params, quad)
            self.family_ = self.certificate_.family
        self.n_entries_ = len(self.family_.entries)
        self.eta_certified_ = self.family_.eta_certified
        self.c0_used_ = self.family_.c0_used
        self.certified_ = self.family_.certified
        return self

    def transform(self, f):
        check_is_fitted(self, "family_")
        was_array = not isinstance(f, GridFunction)
        g = check_grid_function(f, self.grid_level, nonnegative=False)
        out = apply_sparse(self.family_, g)
        if not was_array:
            return out
        if out.grid_level != g.grid_level or out.box != g.box:
            raise ValueError("input grid is coarser than the family; pass a GridFunction")
        return np.asarray(out.values)

    def score(self, f1, f2=None):
        check_is_fitted(self, "family_")
        f1, f2 = check_pair(f1, f1 if f2 is None else f2, self.grid_level)
        return sparse_form(self.family_, f1, f2)
