import json
import math

import numpy as np
import pytest

from lifted_mfvi import potentials as P
from lifted_mfvi.errors import ParamError, ShapeError
from lifted_mfvi.oracle import (GaussianProduct, GaussianTarget, brute_force_mfvi_2d,
                                build_logistic_fixture, fixed_point_residual, fixture_path,
                                gaussian_mfvi, gaussian_product_w2, input_hash, load_fixture,
                                load_fixture_marginals, logistic_fixture_inputs, marginal_w2,
                                marginal_w2_oracles)

P2 = np.array([[2.0, 1.0], [1.0, 2.0]])


def test_gaussian_mfvi_closed_form():
    g = gaussian_mfvi(GaussianTarget([1.0, -1.0], P2))
    assert np.allclose(g.std, 1 / math.sqrt(2))
    assert np.allclose(g.mean, [1.0, -1.0])
    g3 = gaussian_mfvi(GaussianTarget(np.zeros(3), np.diag([1.0, 4.0, 9.0])))
    assert np.allclose(g3.std, [1.0, 0.5, 1 / 3])


def test_gaussian_target_validation():
    with pytest.raises(ParamError):
        GaussianTarget([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ParamError):
        GaussianProduct([0.0], [0.0])


def test_fixed_point_residual_of_oracle():
    P3 = np.array([[3.0, 1.0, 0.2], [1.0, 2.0, 0.4], [0.2, 0.4, 1.0]])
    g = gaussian_mfvi(GaussianTarget(np.array([0.1, 0.2, 0.3]), P3))
    assert fixed_point_residual(P.gaussian(P3, [0.1, 0.2, 0.3]), g) <= 1e-8
    wrong = GaussianProduct(g.mean, g.std * 1.1)
    assert fixed_point_residual(P.gaussian(P3, [0.1, 0.2, 0.3]), wrong) > 1e-2


def test_brute_force_agrees_with_gaussian_oracle():
    res = brute_force_mfvi_2d(P.gaussian(P2, [0.3, -0.4]))
    g = gaussian_mfvi(GaussianTarget([0.3, -0.4], P2))
    for j in range(2):
        m = res.marginals[j]
        assert m.mass() == pytest.approx(1.0)
        assert m.var() == pytest.approx(0.5, abs=1e-4)
        assert m.mean() == pytest.approx(g.mean[j], abs=1e-4)
        w2 = marginal_w2(m, lambda u, j=j: g.mean[j] + g.std[j] * u)
        assert w2 <= 1e-4


def test_brute_force_separable_exact_after_one_sweep():
    res = brute_force_mfvi_2d(P.separable(P.softplus_1d(), 2))
    assert res.sweeps <= 2
    assert marginal_w2_oracles(*res.marginals) <= 1e-12


def test_brute_force_two_dim_only():
    with pytest.raises(ShapeError):
        brute_force_mfvi_2d(P.standard_gaussian(3))


def test_product_w2():
    a = GaussianProduct([0.0, 0.0], [1.0, 1.0])
    b = GaussianProduct([3.0, 0.0], [1.0, 5.0])
    assert gaussian_product_w2(a, b) == pytest.approx(5.0)


def test_committed_fixture_hash_and_reproduction():
    fx = load_fixture()
    assert fx["input_hash"] == input_hash(logistic_fixture_inputs())
    fresh = build_logistic_fixture()
    a, b = load_fixture_marginals(fx), load_fixture_marginals(json.loads(json.dumps(fresh)))
    for i in range(2):
        assert marginal_w2_oracles(a[i], b[i]) <= 1e-10


def test_corrupted_fixture_detected(tmp_path):
    fx = json.loads(fixture_path().read_text())
    fx["inputs"]["lam"] = 2.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(fx))
    with pytest.raises(ParamError):
        load_fixture(bad)
