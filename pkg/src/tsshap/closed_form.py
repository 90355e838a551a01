"""Closed-form Shapley values for AR, MA, ARMA and VARMAX predictors.

Each of these predictors is linear in its lag matrix once the innovations
are rewritten as differences of observations. A player's marginal
contribution then does not depend on the coalition, and its Shapley value
is ``coefficient * (value - baseline)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Attribution, DimensionError, PlayerIndexing, SeriesWindow, check_same_shape, zero_baseline
from .models import ARMAParams, ARParams, MAParams, VARMAXParams, make_predictor


@dataclass(frozen=True)
class EffectiveCoeffs:
    """Per-lag coefficient matrices of a linear lag model.

    ``endog[w-1]`` is the ``M x N`` matrix applied to the lag-``w`` vector;
    ``exog[l-1]`` is the ``M x J`` matrix for exogenous lag ``l``.
    """

    endog: np.ndarray
    exog: Optional[np.ndarray] = None

    def __post_init__(self):
        endog = np.asarray(self.endog, dtype=float)
        if endog.ndim != 3:
            raise DimensionError("endog coefficients must be (W, M, N)")
        object.__setattr__(self, "endog", endog)
        if self.exog is not None:
            exog = np.asarray(self.exog, dtype=float)
            if exog.ndim != 3 or exog.shape[1] != endog.shape[1]:
                raise DimensionError("exog coefficients must be (L, M, J) with the same M")
            object.__setattr__(self, "exog", exog if exog.shape[0] else None)

    @property
    def width(self) -> int:
        return self.endog.shape[0]

    @property
    def vector(self) -> np.ndarray:
        """Scalar per-lag coefficients of a univariate model."""
        if self.endog.shape[1:] != (1, 1):
            raise DimensionError("only univariate coefficients have a vector form")
        return self.endog[:, 0, 0]

    def grid(self) -> np.ndarray:
        """Coefficients rearranged as ``(M, N, W)`` to line up with lag matrices."""
        return np.transpose(self.endog, (1, 2, 0))

    def exog_grid(self) -> Optional[np.ndarray]:
        return None if self.exog is None else np.transpose(self.exog, (1, 2, 0))


def _ma_rewrite(gamma: np.ndarray) -> np.ndarray:
    """Coefficients on lags ``1..q+1`` produced by the moving-average part.

    Lag 1 carries ``gamma_1``, lags ``2..q`` carry ``gamma_w - gamma_{w-1}``
    and lag ``q + 1`` carries ``-gamma_q``. Works for scalar and matrix lags.
    """
    q = gamma.shape[0]
    out = np.zeros((q + 1,) + gamma.shape[1:])
    out[0] = gamma[0]
    out[1:q] = gamma[1:] - gamma[:-1]
    out[q] = -gamma[q - 1]
    return out


def effective_coeffs(params) -> EffectiveCoeffs:
    if isinstance(params, ARParams):
        return EffectiveCoeffs(params.beta[:, None, None])
    if isinstance(params, MAParams):
        return EffectiveCoeffs(_ma_rewrite(params.gamma)[:, None, None])
    if isinstance(params, ARMAParams):
        c = np.zeros(params.width)
        c[:params.p] += params.beta
        c[:params.q + 1] += _ma_rewrite(params.gamma)
        return EffectiveCoeffs(c[:, None, None])
    if isinstance(params, VARMAXParams):
        N = params.n_features
        C = np.zeros((params.width, N, N))
        C[:params.P] += params.A
        if params.Q:
            C[:params.Q + 1] += _ma_rewrite(params.Mmat)
        return EffectiveCoeffs(C, params.B if params.L else None)
    raise TypeError(f"no closed form for {type(params).__name__}")


def linear_shap(coeffs: EffectiveCoeffs, win: SeriesWindow, base: SeriesWindow,
                base_value) -> Attribution:
    """CELL-mode attribution ``phi_m(n, w) = C_w[m, n] (y[n, w] - base[n, w])`` plus the exogenous analogue."""
    check_same_shape(win, base)
    if coeffs.width != win.width:
        raise DimensionError(f"coefficients cover {coeffs.width} lags, window has {win.width}")
    grid = coeffs.grid()
    if grid.shape[1] != win.n_features:
        raise DimensionError("coefficient columns do not match the number of features")
    M = grid.shape[0]
    parts = [(grid * (win.endog - base.endog)).reshape(M, -1)]
    xg = coeffs.exog_grid()
    if (xg is None) != (win.exog is None):
        raise DimensionError("exogenous block present on only one of coefficients / window")
    if xg is not None:
        if xg.shape[1:] != win.exog.shape:
            raise DimensionError("exogenous coefficients do not match the exogenous window")
        parts.append((xg * (win.exog - base.exog)).reshape(M, -1))
    return Attribution(base_value, np.concatenate(parts, axis=1), PlayerIndexing.cells(win))


def closed_form_shap(params, win: SeriesWindow, base: Optional[SeriesWindow] = None) -> Attribution:
    base = zero_baseline(win) if base is None else base
    pred = make_predictor(params)
    pred.check_window(win)
    att = linear_shap(effective_coeffs(params), win, base, pred.predict(base))
    return Attribution(att.base_value, att.phi, att.indexing, fx=pred.predict(win))
