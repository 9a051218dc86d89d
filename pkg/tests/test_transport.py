import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from lifted_mfvi.errors import MonotonicityError, ParamError, ShapeError
from lifted_mfvi.transport import (MCQuadrature, QuantileGrid, TransportMap, eval_map, h1_distance,
                                   lp_distance, map_moments, nodes_from_slopes, project_band,
                                   push_samples, resample)


def test_grid_symmetric_and_masses():
    g = QuantileGrid.gaussian(64)
    assert np.array_equal(g.nodes, -g.nodes[::-1])
    assert g.interval_mass.sum() == pytest.approx(1.0)
    assert np.allclose(g.interval_mass, 1 / 65, atol=1e-12)
    assert g.cell_weights().sum() == pytest.approx(1.0)


def test_affine_map_shift_distance_exact():
    g = QuantileGrid.gaussian(32)
    T = TransportMap.affine(g, [0.0, 1.0], [1.0, 2.0])
    S = TransportMap.affine(g, [0.5, 1.0], [1.0, 2.0])
    assert lp_distance(T, S) == pytest.approx(0.5, abs=1e-14)


def test_scale_difference_matches_gaussian_w2():
    # W2(N(0,1), N(0,4)) = 1 exactly; the affine tails make this exact on any grid
    g = QuantileGrid.gaussian(16)
    T, S = TransportMap.affine(g, [0.0], [1.0]), TransportMap.affine(g, [0.0], [2.0])
    assert lp_distance(T, S) == pytest.approx(1.0, abs=1e-12)
    # L^p of a linear function: (E|Z|^p)^(1/p)
    for p in (3.0, 4.0):
        exact = (2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)) ** (1 / p)
        assert lp_distance(T, S, p) == pytest.approx(exact, rel=1e-9)


def test_monotonicity_enforced():
    g = QuantileGrid.gaussian(8)
    with pytest.raises(MonotonicityError):
        TransportMap(g, [[0, 1, 2, 2, 3, 4, 5, 6]])


def test_shape_mismatch():
    g = QuantileGrid.gaussian(8)
    T = TransportMap.identity(g, 2)
    with pytest.raises(ShapeError):
        eval_map(T, np.zeros(3))
    with pytest.raises(ShapeError):
        lp_distance(T, TransportMap.identity(g, 3))


def test_map_moments_of_affine_map():
    g = QuantileGrid.gaussian(10)
    mean, var = map_moments(TransportMap.affine(g, [1.5, -2.0], [0.5, 3.0]))
    assert np.allclose(mean, [1.5, -2.0], atol=1e-14)
    assert np.allclose(var, [0.25, 9.0], rtol=1e-12)


def test_lp_p2_matches_brute_quadrature(rng):
    g = QuantileGrid.gaussian(12)
    vals = np.cumsum(rng.uniform(0.1, 1.0, (1, 12)), axis=1)
    T = TransportMap(g, vals)
    S = TransportMap.identity(g, 1)
    f = lambda u: (eval_map(T, np.array([u]))[0] - u) ** 2 * norm.pdf(u)
    pts = list(g.nodes)
    ref = sum(integrate.quad(f, a, b, epsabs=1e-14)[0] for a, b in zip([-40] + pts, pts + [40]))
    assert lp_distance(T, S) ** 2 == pytest.approx(ref, rel=1e-9)


slopes_strategy = st.lists(st.floats(0.05, 5.0), min_size=15, max_size=15)


@settings(max_examples=60, deadline=None)
@given(slopes_strategy, st.floats(0.2, 1.0), st.floats(1.0, 5.0))
def test_project_band_lands_in_band_and_is_idempotent(slopes, alpha, beta):
    g = QuantileGrid.gaussian(16)
    T = TransportMap(g, nodes_from_slopes(g, np.array([0.3]), np.array([slopes])))
    P = project_band(T, alpha, beta)
    s = P.slopes()
    assert s.min() >= 1 / math.sqrt(beta) - 1e-12
    assert s.max() <= 1 / math.sqrt(alpha) + 1e-12
    assert P.values[0, g.median_index] == pytest.approx(0.3)
    assert np.allclose(project_band(P, alpha, beta).values, P.values, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(slopes_strategy, slopes_strategy, slopes_strategy)
def test_lp_is_a_metric(a, b, c):
    g = QuantileGrid.gaussian(16)
    T, S, R = (TransportMap(g, nodes_from_slopes(g, np.array([k]), np.array([s])))
               for k, s in ((0.0, a), (0.5, b), (-0.2, c)))
    assert lp_distance(T, T) == pytest.approx(0.0, abs=1e-10)
    assert lp_distance(T, S) == pytest.approx(lp_distance(S, T), rel=1e-12)
    assert lp_distance(T, R) <= lp_distance(T, S) + lp_distance(S, R) + 1e-10
    assert h1_distance(T, S) >= lp_distance(T, S) - 1e-12


def test_project_band_bad_params():
    g = QuantileGrid.gaussian(8)
    with pytest.raises(ParamError):
        project_band(TransportMap.identity(g, 1), 2.0, 1.0)


def test_resample_piecewise_linear_is_exact_on_refinement():
    g = QuantileGrid.gaussian(8)
    T = TransportMap.affine(g, [0.2], [1.3])
    R = resample(T, QuantileGrid.gaussian(33))
    assert np.allclose(R.values, 0.2 + 1.3 * R.grid.nodes)


def test_quadrature_reproducible_and_marginally_gaussian():
    q1, q2 = MCQuadrature(7, 5000, 3), MCQuadrature(7, 5000, 3)
    assert np.array_equal(q1.points, q2.points)
    assert not np.array_equal(q1.points, MCQuadrature(8, 5000, 3).points)
    # one point per stratum in every coordinate
    u = norm.cdf(q1.points)
    for i in range(3):
        assert np.array_equal(np.sort(np.floor(u[:, i] * 5000)), np.arange(5000))
    assert abs(q1.points.mean()) < 1e-3
    iid = MCQuadrature(7, 5000, 3, scheme="iid")
    assert abs(iid.points.std() - 1) < 0.03


def test_push_samples_dimension_check():
    g = QuantileGrid.gaussian(8)
    with pytest.raises(ShapeError):
        push_samples(TransportMap.identity(g, 2), MCQuadrature(0, 10, 3))
