import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsshap.core import DimensionError, SeriesWindow
from tsshap.models import (ARMAParams, ARParams, ElmanParams, MAParams, SingularSystemError, VARMAXParams,
                           load_params, make_predictor, params_from_dict, params_to_dict, predict_ar,
                           predict_arma, predict_elman, predict_ma, predict_varmax, random_params, save_params,
                           simulate, wls_solve)


def test_ar_dot_product():
    assert predict_ar(ARParams(0.0, [0.5, 0.3]), SeriesWindow([[2.0, 4.0]])) == pytest.approx(2.2, abs=1e-15)


def test_ar_degenerate_cases(rng):
    win = SeriesWindow(rng.normal(size=(1, 3)))
    assert predict_ar(ARParams(1.5, [0, 0, 0]), win) == 1.5
    assert predict_ar(ARParams(1.5, [0.2, 0.1, 0.4]), SeriesWindow(np.zeros((1, 3)))) == 1.5


def test_ar_rejects_wrong_width():
    with pytest.raises(DimensionError):
        predict_ar(ARParams(0.0, [0.5, 0.3]), SeriesWindow([[1.0, 2.0, 3.0]]))


def test_ma_rewrite_example():
    # 0.4*1 + (0.1 - 0.4)*1 - 0.1*1 = 0
    assert predict_ma(MAParams(0.0, [0.4, 0.1]), SeriesWindow([[1.0, 1.0, 1.0]])) == pytest.approx(0.0, abs=1e-15)


def test_ma_constant_gamma_telescopes(rng):
    c, alpha = 0.7, -0.3
    y = rng.normal(size=5)
    got = predict_ma(MAParams(alpha, [c] * 4), SeriesWindow([y]))
    assert got == pytest.approx(alpha + c * (y[0] - y[4]), abs=1e-14)
    assert predict_ma(MAParams(alpha, [c] * 4), SeriesWindow(np.zeros((1, 5)))) == alpha


def test_ma_window_is_one_longer():
    assert make_predictor(MAParams(0.0, [0.1, 0.2, 0.3])).width == 4
    with pytest.raises(DimensionError):
        predict_ma(MAParams(0.0, [0.1, 0.2]), SeriesWindow([[1.0, 2.0]]))


def test_arma_example_expansion():
    params = ARMAParams(0.0, [0.5, 0.2, 0.1], [0.4])
    # the effective lag coefficients are (0.9, -0.2, 0.1); probe each lag with a unit vector
    for w, expected in enumerate([0.9, -0.2, 0.1]):
        e = np.zeros((1, 3))
        e[0, w] = 1.0
        assert predict_arma(params, SeriesWindow(e)) == pytest.approx(expected, abs=1e-15)


def test_arma_q_plus_one_equals_p():
    # p = 3, q = 2: lag 3 gets beta_3 - gamma_2
    params = ARMAParams(0.0, [0.5, 0.2, 0.1], [0.4, 0.3])
    e = np.zeros((1, 3))
    e[0, 2] = 1.0
    assert predict_arma(params, SeriesWindow(e)) == pytest.approx(0.1 - 0.3, abs=1e-15)


@settings(max_examples=50)
@given(st.integers(0, 10 ** 6), st.integers(1, 5), st.integers(1, 5))
def test_family_reductions(seed, p, q):
    rng = np.random.default_rng(seed)
    alpha, beta, gamma = rng.normal(), rng.normal(size=p), rng.normal(size=q)
    win_ar = SeriesWindow(rng.normal(size=(1, max(p, q + 1))))
    arma_no_ma = ARMAParams(alpha, beta, np.zeros(q))
    arma_no_ar = ARMAParams(alpha, np.zeros(p), gamma)
    pad = max(p, q + 1)
    assert predict_arma(arma_no_ma, win_ar) == pytest.approx(
        predict_ar(ARParams(alpha, np.r_[beta, np.zeros(pad - p)]), win_ar), abs=1e-12)
    if q + 1 >= p:
        assert predict_arma(arma_no_ar, win_ar) == pytest.approx(
            predict_ma(MAParams(alpha, gamma), SeriesWindow(win_ar.endog[:, :q + 1])), abs=1e-12)
    # scalar VARMAX equals ARMA with the same coefficients
    vm = VARMAXParams([alpha], beta[:, None, None], gamma[:, None, None])
    arma = ARMAParams(alpha, beta, gamma)
    assert predict_varmax(vm, win_ar)[0] == pytest.approx(predict_arma(arma, win_ar), abs=1e-12)


def test_varmax_zero_matrices_give_intercept(rng):
    params = VARMAXParams([1.0, -2.0], np.zeros((2, 2, 2)), np.zeros((1, 2, 2)), np.zeros((2, 2, 3)))
    win = SeriesWindow(rng.normal(size=(2, 2)), rng.normal(size=(3, 2)))
    np.testing.assert_array_equal(predict_varmax(params, win), [1.0, -2.0])


def test_varx_uses_ar_matrices_only(rng):
    A = rng.normal(size=(3, 2, 2))
    B = rng.normal(size=(1, 2, 1))
    params = VARMAXParams([0.1, 0.2], A, [], B)
    win = SeriesWindow(rng.normal(size=(2, 3)), rng.normal(size=(1, 1)))
    expected = params.alpha + sum(A[w] @ win.endog[:, w] for w in range(3)) + B[0] @ win.exog[:, 0]
    np.testing.assert_allclose(predict_varmax(params, win), expected, atol=1e-14)


@settings(max_examples=40)
@given(st.integers(0, 10 ** 6), st.sampled_from(["ar", "ma", "arma", "varmax"]), st.floats(-3, 3))
def test_linear_predictors_are_linear(seed, family, lam):
    params = random_params(family, seed=seed, n_features=2, p=2, q=2, n_exog=1, exog_lags=2)
    doc = params_to_dict(params)
    doc["alpha"] = np.zeros_like(np.asarray(doc["alpha"], dtype=float)).tolist()
    params, _ = params_from_dict(doc)
    pred = make_predictor(params)
    rng = np.random.default_rng(seed)
    exog = rng.normal(size=(pred.n_exog, pred.exog_width)) if pred.n_exog else None
    win = SeriesWindow(rng.normal(size=(pred.n_features, pred.width)), exog)
    scaled = SeriesWindow(lam * win.endog, None if exog is None else lam * exog)
    zero = SeriesWindow(np.zeros_like(win.endog), None if exog is None else np.zeros_like(exog))
    f0 = pred.predict(zero)
    np.testing.assert_allclose(pred.predict(scaled) - f0, lam * (pred.predict(win) - f0), atol=1e-10)


def test_elman_zero_weights_return_output_bias():
    params = ElmanParams(np.zeros((3, 3)), np.zeros((3, 2)), np.zeros(3), np.zeros((2, 3)), [0.5, -1.0])
    out = predict_elman(params, SeriesWindow(np.ones((2, 4))))
    np.testing.assert_array_equal(out, [0.5, -1.0])


def test_elman_linear_regime_slope_sign():
    params = ElmanParams([[0.01]], [[0.02]], [0.0], [[0.03]], [0.0])
    h = 1e-3
    base = SeriesWindow([[0.1, -0.2, 0.3]])
    bumped = SeriesWindow([[0.1 + h, -0.2, 0.3]])
    slope = (predict_elman(params, bumped)[0] - predict_elman(params, base)[0]) / h
    # linearisation around 0: d out / d y_1 = W_hy * W_xh = 6e-4
    assert slope > 0
    assert slope == pytest.approx(6e-4, rel=1e-2)


def test_elman_golden_value():
    params = ElmanParams.random(3, 2, hidden=8, seed=42)
    win = SeriesWindow(np.arange(12).reshape(3, 4) / 10.0 - 0.5)
    # pinned on first run
    np.testing.assert_allclose(predict_elman(params, win), [0.3484483919958238, -0.436497321159671], rtol=1e-12)


def test_elman_reads_oldest_lag_first():
    # with a single recurrent unit the most recent input passes through one tanh, older ones through more
    params = ElmanParams([[0.5]], [[1.0]], [0.0], [[1.0]], [0.0])
    y = np.array([[0.3, 0.2]])
    h = np.tanh(0.2)
    h = np.tanh(0.5 * h + 0.3)
    assert predict_elman(params, SeriesWindow(y))[0] == pytest.approx(h, abs=1e-15)


# ---------------------------------------------------------------------------
# weighted least squares


def test_wls_identity():
    y = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(wls_solve(np.eye(3), y, np.ones(3)), y, atol=1e-14)


def test_wls_weight_semantics():
    X = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0], [1.0, -1.0]])
    y = np.array([1.0, 5.0, 2.0, 0.5])
    a = wls_solve(X, y, np.array([2.0, 0.0, 1.0, 1.0]))
    b = wls_solve(X[[0, 2, 3]], y[[0, 2, 3]], np.array([2.0, 1.0, 1.0]))
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_wls_hand_solve():
    assert wls_solve([[1.0], [2.0], [3.0]], [3.0, 6.0, 9.0], np.ones(3))[0] == pytest.approx(3.0, abs=1e-14)


def test_wls_rank_deficiency_reports_column_count():
    X = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 1.0], [3.0, 6.0, 0.0], [1.0, 2.0, 5.0]])
    with pytest.raises(SingularSystemError, match="1 of 3 columns"):
        wls_solve(X, np.ones(4), np.ones(4))
    wls_solve(X, np.ones(4), np.ones(4), ridge=1e-6)


def test_wls_rejects_bad_weights():
    with pytest.raises(ValueError):
        wls_solve(np.eye(2), np.ones(2), np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        wls_solve(np.eye(2), np.ones(2), np.zeros(2))


@settings(max_examples=50)
@given(st.integers(0, 10 ** 6), st.integers(1, 6), st.integers(1, 3), st.sampled_from([0.0, 1e-3, 0.5]))
def test_wls_normal_equations(seed, k, m, ridge):
    rng = np.random.default_rng(seed)
    S = k + 5
    X, Y, w = rng.normal(size=(S, k)), rng.normal(size=(S, m)), rng.uniform(0.1, 2.0, size=S)
    c = wls_solve(X, Y, w, ridge)
    lhs = X.T @ (w[:, None] * (Y - X @ c))
    np.testing.assert_allclose(lhs, ridge * c, atol=1e-8 * max(1.0, np.abs(lhs).max(), np.abs(c).max()))


# ---------------------------------------------------------------------------
# simulation and serialisation


def test_simulate_noise_free_constant():
    sim = simulate(ARParams(1.25, [0.0, 0.0]), 50, noise_scale=0.0, seed=3)
    np.testing.assert_array_equal(sim.endog, np.full((1, 50), 1.25))


def test_simulate_is_deterministic():
    params = random_params("varmax", seed=1, n_features=2, p=2, q=1, n_exog=1, exog_lags=1)
    a, b = simulate(params, 100, 0.5, seed=9), simulate(params, 100, 0.5, seed=9)
    np.testing.assert_array_equal(a.endog, b.endog)
    np.testing.assert_array_equal(a.exog, b.exog)
    assert not np.array_equal(a.endog, simulate(params, 100, 0.5, seed=10).endog)


def test_simulate_ar1_autocorrelation():
    y = simulate(ARParams(0.0, [0.9]), 10_000, 1.0, seed=0).endog[0]
    y = y - y.mean()
    rho = (y[1:] @ y[:-1]) / (y @ y)
    assert abs(rho - 0.9) <= 0.1


@pytest.mark.parametrize("family", ["ar", "ma", "arma", "varmax", "elman"])
def test_params_json_round_trip(tmp_path, family):
    params = random_params(family, seed=4, n_features=2, p=2, q=2, n_exog=1, exog_lags=2)
    width = 5 if family == "elman" else None
    save_params(params, tmp_path / "m.json", width)
    back, w = load_params(tmp_path / "m.json")
    assert type(back) is type(params) and w == width
    for name, value in vars(params).items():
        np.testing.assert_array_equal(getattr(back, name), value)


def test_seeded_elman_document():
    params, width = params_from_dict({"family": "elman", "n_features": 2, "n_outputs": 1, "seed": 3, "window": 6})
    assert width == 6
    np.testing.assert_array_equal(params.W_xh, ElmanParams.random(2, 1, seed=3).W_xh)


def test_unknown_family_rejected():
    with pytest.raises(ValueError, match="unknown model family"):
        params_from_dict({"family": "lstm"})
