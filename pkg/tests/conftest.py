import itertools
import math

import numpy as np
import pytest

from tsshap import SeriesWindow
from tsshap.closed_form import closed_form_shap
from tsshap.events import event_importance, explain_series
from tsshap.models import VARMAXParams, make_predictor, random_params, simulate


def permutation_shapley(value, d):
    """Shapley values as the average marginal contribution over all d! orderings.

    ``value`` maps a frozenset of players to a float. Independent of the
    subset-weight formula used by the package; only practical for d <= 7.
    """
    phi = np.zeros(d)
    for order in itertools.permutations(range(d)):
        members = set()
        before = value(frozenset(members))
        for p in order:
            members.add(p)
            after = value(frozenset(members))
            phi[p] += after - before
            before = after
    return phi / math.factorial(d)


def random_window(rng, n, w, j=0, l=0):
    exog = rng.normal(size=(j, l)) if j else None
    return SeriesWindow(rng.normal(size=(n, w)), exog)


def random_instance(family, seed, max_cells=14):
    """Random parametric predictor, window and baseline with at most ``max_cells`` players."""
    rng = np.random.default_rng(seed)
    while True:
        try:
            params, pred = _draw(family, rng)
        except ValueError:
            continue
        d = pred.n_features * pred.width + pred.n_exog * pred.exog_width
        if d <= max_cells:
            break
    win = random_window(rng, pred.n_features, pred.width, pred.n_exog, pred.exog_width)
    base = random_window(rng, pred.n_features, pred.width, pred.n_exog, pred.exog_width)
    return params, pred, win, base


def _draw(family, rng):
    if family == "varmax":
        params = random_params("varmax", seed=int(rng.integers(1 << 30)), n_features=int(rng.integers(1, 4)),
                               p=int(rng.integers(0, 5)), q=int(rng.integers(0, 4)),
                               n_exog=int(rng.integers(0, 3)), exog_lags=int(rng.integers(1, 4)))
    else:
        params = random_params(family, seed=int(rng.integers(1 << 30)), p=int(rng.integers(1, 14)),
                               q=int(rng.integers(1, 13)))
    return params, make_predictor(params)


IMPULSE_N, IMPULSE_W, IMPULSE_T, IMPULSE_SIGMA = 3, 3, 60, 0.5


def impulse_params():
    eye = np.eye(IMPULSE_N)
    off = 0.03 * (np.ones((IMPULSE_N, IMPULSE_N)) - eye)
    A = np.stack([0.3 * eye + off, 0.15 * eye, 0.05 * eye])
    B = 0.2 * np.ones((1, IMPULSE_N, 1))
    return VARMAXParams(np.zeros(IMPULSE_N), A, np.zeros((0, IMPULSE_N, IMPULSE_N)), B)


def impulse_trial(seed):
    """Simulate a stable VARX, plant a 5-sigma spike and pool closed-form attributions.

    Returns ``(planted (n, s), event series, aligned attributions)``.
    """
    params = impulse_params()
    sigma = IMPULSE_SIGMA
    exog = sigma * np.random.default_rng(10000 + seed).standard_normal((1, IMPULSE_T))
    y = simulate(params, IMPULSE_T, sigma, seed, exog).endog.copy()
    planted = (seed % IMPULSE_N, IMPULSE_T // 2)
    y[planted] += 5 * sigma
    aligned = explain_series(lambda win: closed_form_shap(params, win), y, IMPULSE_W,
                             exog=exog, exog_width=1)
    return planted, event_importance(aligned), aligned


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
