import numpy as np
import pytest

from conftest import random_instance
from tsshap.closed_form import EffectiveCoeffs, closed_form_shap, effective_coeffs
from tsshap.core import Coalition, DimensionError, PlayerIndexing, SeriesWindow, mask_window
from tsshap.exact import exact_shap
from tsshap.models import ARMAParams, ARParams, MAParams, VARMAXParams, make_predictor, random_params


def test_ma_coefficients():
    np.testing.assert_allclose(effective_coeffs(MAParams(0.0, [0.4, 0.1])).vector, [0.4, -0.3, -0.1], atol=1e-15)


def test_arma_coefficients():
    got = effective_coeffs(ARMAParams(0.0, [0.5, 0.2, 0.1], [0.4])).vector
    np.testing.assert_allclose(got, [0.9, -0.2, 0.1], atol=1e-15)


def test_arma_long_ma_part():
    # p = 1, q = 3: lags 1..4 get beta_1 + g1, g2 - g1, g3 - g2, -g3
    got = effective_coeffs(ARMAParams(0.0, [0.5], [0.1, 0.3, 0.2])).vector
    np.testing.assert_allclose(got, [0.6, 0.2, -0.1, -0.2], atol=1e-15)


def test_ar_coefficients_unchanged(rng):
    beta = rng.normal(size=4)
    np.testing.assert_array_equal(effective_coeffs(ARParams(0.3, beta)).vector, beta)


def test_varmax_coefficients_match_scalar_case():
    vm = VARMAXParams([0.0], np.array([0.5, 0.2, 0.1])[:, None, None], np.array([0.4])[:, None, None])
    np.testing.assert_allclose(effective_coeffs(vm).vector, [0.9, -0.2, 0.1], atol=1e-15)


def test_ar2_closed_form():
    att = closed_form_shap(ARParams(0.0, [0.5, 0.3]), SeriesWindow([[2.0, 4.0]]))
    np.testing.assert_allclose(att.phi, [[1.0, 1.2]], atol=1e-15)


def test_window_equal_to_baseline(rng):
    params = random_params("varmax", seed=2, n_features=2, p=2, q=1, n_exog=1, exog_lags=2)
    pred = make_predictor(params)
    win = SeriesWindow(rng.normal(size=(2, pred.width)), rng.normal(size=(1, 2)))
    np.testing.assert_array_equal(closed_form_shap(params, win, win).phi, 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_varmax_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    params = random_params("varmax", seed=seed, n_features=2, p=2, q=2, n_exog=1, exog_lags=2)
    pred = make_predictor(params)
    win = SeriesWindow(rng.normal(size=(2, pred.width)), rng.normal(size=(1, 2)))
    base = SeriesWindow(rng.normal(size=(2, pred.width)), rng.normal(size=(1, 2)))
    assert PlayerIndexing.cells(win).d <= 12
    np.testing.assert_allclose(closed_form_shap(params, win, base).phi, exact_shap(pred, win, base).phi, atol=1e-10)


@pytest.mark.parametrize("family", ["ar", "ma", "arma", "varmax"])
def test_marginal_contribution_is_coalition_free(family):
    params, pred, win, base = random_instance(family, seed=7)
    idx = PlayerIndexing.cells(win)
    rng = np.random.default_rng(0)
    for player in range(idx.d):
        deltas = []
        for _ in range(20):
            bits = int(rng.integers(1 << idx.d)) & ~(1 << player)
            without = pred.predict(mask_window(win, Coalition(bits, idx.d), base, idx))
            with_ = pred.predict(mask_window(win, Coalition(bits | 1 << player, idx.d), base, idx))
            deltas.append(with_ - without)
        np.testing.assert_allclose(deltas, [deltas[0]] * 20, atol=1e-12, rtol=0)


@pytest.mark.parametrize("family", ["ar", "ma", "arma", "varmax"])
@pytest.mark.parametrize("seed", range(5))
def test_efficiency(family, seed):
    params, pred, win, base = random_instance(family, seed)
    att = closed_form_shap(params, win, base)
    np.testing.assert_allclose(att.total() + att.base_value, pred.predict(win), atol=1e-10)


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        closed_form_shap(ARParams(0.0, [0.5, 0.3]), SeriesWindow([[1.0, 2.0, 3.0]]))


def test_coefficient_grid_layout():
    C = np.arange(12.0).reshape(3, 2, 2)     # (W, M, N)
    grid = EffectiveCoeffs(C).grid()
    assert grid.shape == (2, 2, 3)
    assert grid[1, 0, 2] == C[2, 1, 0]
