"""Brute-force Shapley values by enumerating every coalition.

Coalition ``z`` is stored at table index ``sum_i z_i 2**i``. This is the
ground truth the faster estimators are checked against.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .core import (Attribution, PlayerIndexing, Predictor, SeriesWindow, TSShapError,
                   check_same_shape, coalition_matrix, evaluate_coalitions, zero_baseline)

ENUMERATION_CAP = 22


class EnumerationCapError(TSShapError, ValueError):
    error_id = "E_ENUMERATION_CAP"


def shapley_weight_log(d: int, s) -> np.ndarray:
    """``log(s! (d - s - 1)! / d!)``, the weight of a size-``s`` coalition without the player."""
    s = np.asarray(s)
    if np.any(s < 0) or np.any(s >= d):
        raise ValueError(f"coalition size must lie in [0, {d - 1}]")
    return gammaln(s + 1.0) + gammaln(d - s) - gammaln(d + 1.0)


def popcount(ids: np.ndarray) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    out = np.zeros(ids.shape, dtype=np.int64)
    for b in range(int(ids.max()).bit_length() if ids.size else 0):
        out += ids >> b & 1
    return out


@dataclass(frozen=True)
class ValueTable:
    """``values[z, m]``: output ``m`` of the predictor on the window masked by ``z``."""

    d: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != 1 << self.d:
            raise ValueError(f"value table must have 2**{self.d} rows, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("value table contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def empty(self) -> np.ndarray:
        return self.values[0]

    @property
    def full(self) -> np.ndarray:
        return self.values[-1]


def _check_cap(d: int, cap: Optional[int], what: str = "players") -> None:
    cap = ENUMERATION_CAP if cap is None else cap
    if d > cap:
        raise EnumerationCapError(
            f"exact enumeration over d={d} {what} exceeds the cap of {cap} "
            f"(2**{d} predictor calls); use the kernelshap or varshap estimator, "
            f"or raise the cap explicitly")


def build_value_table(pred: Predictor, win: SeriesWindow, base: Optional[SeriesWindow] = None,
                      idx: Optional[PlayerIndexing] = None, cap: Optional[int] = None,
                      n_jobs: int = 1) -> ValueTable:
    base = zero_baseline(win) if base is None else base
    idx = PlayerIndexing.cells(win) if idx is None else idx
    check_same_shape(win, base)
    pred.check_window(win)
    _check_cap(idx.d, cap)
    Z = coalition_matrix(idx.d)
    return ValueTable(idx.d, evaluate_coalitions(pred, win, base, idx, Z, n_jobs=n_jobs))


def exact_shap_from_table(tab: ValueTable) -> np.ndarray:
    """Shapley values ``(M, d)`` of every output column of ``tab``.

    Marginal contributions are summed per coalition size first and then
    weighted, so each player's sum runs in a fixed order.
    """
    d = tab.d
    ids = np.arange(1 << d, dtype=np.int64)
    sizes = popcount(ids)
    weights = np.exp(shapley_weight_log(d, np.arange(d))) if d else np.zeros(0)
    M = tab.values.shape[1]
    phi = np.zeros((M, d))
    for i in range(d):
        without = ids[(ids >> i & 1) == 0]
        delta = tab.values[without | (1 << i)] - tab.values[without]
        for m in range(M):
            per_size = np.bincount(sizes[without], weights=delta[:, m], minlength=d)
            phi[m, i] = per_size @ weights
    return phi


def exact_shap(pred: Predictor, win: SeriesWindow, base: Optional[SeriesWindow] = None,
               idx: Optional[PlayerIndexing] = None, cap: Optional[int] = None,
               n_jobs: int = 1) -> Attribution:
    base = zero_baseline(win) if base is None else base
    idx = PlayerIndexing.cells(win) if idx is None else idx
    tab = build_value_table(pred, win, base, idx, cap=cap, n_jobs=n_jobs)
    return Attribution(tab.empty, exact_shap_from_table(tab), idx, fx=tab.full)


def shap_of_game(values, d: int) -> np.ndarray:
    """Shapley values of a single game given as a length ``2**d`` array."""
    return exact_shap_from_table(ValueTable(d, values))[0]
