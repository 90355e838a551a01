"""Time Consistent SHAP: feature-level subgames over a growing pinned history.

Subgame ``k`` pins the ``k`` oldest steps of the window (lags ``W-k+1..W``)
to their observed values for every feature. On the remaining recent steps
each feature is a single player that is either fully observed or fully
masked. ``k = 0`` is the full feature game and ``k = W`` is constant.
The imputation schedule pays player ``i`` the amount
``beta(k, i) = phi(k, i) - phi(k + 1, i)`` at step ``k``, which telescopes
back to ``phi(0, i)``.

Exogenous features, if any, are extra players; exogenous lag ``l`` is
pinned in subgame ``k`` exactly when ``l > W - k``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (CountingPredictor, PlayerIndexing, Predictor, SeriesWindow, check_same_shape,
                   coalition_matrix, evaluate_coalitions, zero_baseline)
from .exact import ValueTable, _check_cap, exact_shap_from_table

FEATURE_CAP = 20


@dataclass(frozen=True)
class SubgameSpec:
    fixed_prefix: int
    width: int

    def __post_init__(self):
        if not 0 <= self.fixed_prefix <= self.width:
            raise ValueError(f"fixed_prefix must lie in [0, {self.width}], got {self.fixed_prefix}")

    def pinned_lags(self) -> np.ndarray:
        return np.arange(self.width - self.fixed_prefix + 1, self.width + 1)


@dataclass(frozen=True)
class ImputationSchedule:
    """``phi[m, k, i]`` for ``k = 0..W`` and payments ``beta[m, k, i]`` for ``k = 0..W-1``."""

    phi: np.ndarray
    beta: np.ndarray
    n_evaluations: int = 0

    @property
    def width(self) -> int:
        return self.beta.shape[1]

    def telescoping_residual(self) -> np.ndarray:
        """``|sum_k beta(k, i) + phi(W, i) - phi(0, i)|`` per output and feature."""
        return np.abs(self.beta.sum(axis=1) + self.phi[:, -1] - self.phi[:, 0])


def _pinned_window(win: SeriesWindow, base: SeriesWindow, k: int) -> SeriesWindow:
    """Baseline with the ``k`` oldest steps replaced by observed values.

    Masked features in subgame ``k`` take these values; observed ones take ``win``.
    """
    W = win.width
    endog = np.array(base.endog)
    endog[:, W - k:] = win.endog[:, W - k:]
    exog = None
    if win.exog is not None:
        exog = np.array(base.exog)
        pinned = np.arange(1, win.exog_width + 1) > W - k
        exog[:, pinned] = win.exog[:, pinned]
    return win.replace(endog=endog, exog=exog)


def _subgame_table(pred, win, base, k, n_jobs=1, f_full=None) -> ValueTable:
    idx = PlayerIndexing.features(win)
    d = idx.d
    Z = coalition_matrix(d)
    masked = _pinned_window(win, base, k)
    if f_full is None:
        values = evaluate_coalitions(pred, win, masked, idx, Z, n_jobs=n_jobs)
    else:
        values = np.empty((1 << d, pred.n_outputs))
        values[:-1] = evaluate_coalitions(pred, win, masked, idx, Z[:-1], n_jobs=n_jobs)
        values[-1] = f_full
    return ValueTable(d, values)


def _prepare(pred, win, base):
    base = zero_baseline(win) if base is None else base
    check_same_shape(win, base)
    pred.check_window(win)
    _check_cap(win.n_features + win.n_exog, FEATURE_CAP, what="features")
    return base


def subgame_shap(pred: Predictor, win: SeriesWindow, base: Optional[SeriesWindow] = None,
                 k: int = 0, n_jobs: int = 1) -> np.ndarray:
    """Exact feature-level Shapley values ``(M, N [+ J])`` of subgame ``k``."""
    base = _prepare(pred, win, base)
    SubgameSpec(k, win.width)
    return exact_shap_from_table(_subgame_table(pred, win, base, k, n_jobs))


def feature_shap(pred: Predictor, win: SeriesWindow, base: Optional[SeriesWindow] = None,
                 n_jobs: int = 1) -> np.ndarray:
    """Shapley values with each feature's whole trajectory as one player."""
    return subgame_shap(pred, win, base, 0, n_jobs)


def imputation_schedule(phi_sequence) -> np.ndarray:
    """Payments ``beta(k) = phi(k) - phi(k + 1)`` along the subgame axis (axis ``-2``)."""
    phi = np.asarray(phi_sequence, dtype=float)
    return phi[..., :-1, :] - phi[..., 1:, :]


def time_consistent_shap(pred: Predictor, win: SeriesWindow, base: Optional[SeriesWindow] = None,
                         n_jobs: int = 1) -> ImputationSchedule:
    """All ``W + 1`` subgames followed by the imputation schedule.

    ``f(window)`` is shared by every subgame and evaluated once, and subgame
    ``W`` is constant so it is not evaluated at all. The predictor runs
    ``W (2**d - 1) + 1`` times for ``d`` features.
    Subgames are independent and may run on ``n_jobs`` threads; they are
    merged in subgame order.
    """
    base = _prepare(pred, win, base)
    counter = CountingPredictor(pred)
    f_full = counter.predict(win)

    def run(k):
        if k == win.width:
            return np.zeros((pred.n_outputs, win.n_features + win.n_exog))
        return exact_shap_from_table(_subgame_table(counter, win, base, k, f_full=f_full))

    ks = range(win.width + 1)
    if n_jobs == 1:
        phis = [run(k) for k in ks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            phis = list(pool.map(run, ks))
    phi = np.stack(phis, axis=1)
    return ImputationSchedule(phi, imputation_schedule(phi), counter.calls)
