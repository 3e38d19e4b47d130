import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sparsedom.estimator import SparseDomination
from sparsedom.gridfunc import GridFunction
from sparsedom.validation import check_cube, check_eta, check_grid_function, check_pair


def test_fit_transform_score_on_arrays():
    v = np.ones(256)
    est = SparseDomination(grid_level=-8).fit(v)
    assert est.n_entries_ == 1 and est.certified_
    assert est.eta_certified_ == pytest.approx(1 / 17)
    assert est.score(v) == pytest.approx(1 / 17)
    out = est.transform(v)
    assert out.shape == (256,) and np.allclose(out, 1 / 17)


def test_fit_transform_uses_second_argument():
    rng = np.random.default_rng(0)
    a, b = rng.random(128), rng.random(128)
    est = SparseDomination(grid_level=-7)
    out = est.fit_transform(a, b)
    assert out.shape == (128,)
    assert est.score(a, b) == pytest.approx(float(out @ b) / 128, rel=1e-12)


def test_kernel_certificate():
    f1 = GridFunction.from_array([1.0, 0.0], -1)
    f2 = GridFunction.from_array([0.0, 1.0], -1)
    est = SparseDomination(kernel="hilbert").fit(f1, f2)
    assert est.certificate_.pairing.value == pytest.approx(np.log(2))
    assert isinstance(est.transform(f1), GridFunction)


def test_params_roundtrip_and_not_fitted():
    est = SparseDomination(eta0=0.3, c0=64.0, kernel="hilbert")
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.transform(np.ones(4))


def test_invalid_parameters():
    with pytest.raises(ValueError):
        SparseDomination(eta0=1.5).fit(np.ones(4))
    with pytest.raises(ValueError):
        SparseDomination(c0=-1.0).fit(np.ones(4))
    with pytest.raises(ValueError):
        SparseDomination().fit(-np.ones(4))


def test_validation_helpers():
    f = check_grid_function([1.0, 2.0], -1)
    assert f.grid_level == -1 and f.dim == 1
    with pytest.raises(ValueError):
        check_grid_function(3.0)
    with pytest.raises(ValueError):
        check_pair(np.ones(4), np.ones((2, 2)))
    assert check_cube(None, 2).anchor == (0, 0)
    assert check_cube({"level": 1, "anchor": [2]}, 1).level == 1
    with pytest.raises(ValueError):
        check_cube({"level": 1, "anchor": [2]}, 2)
    with pytest.raises(ValueError):
        check_eta(0)
