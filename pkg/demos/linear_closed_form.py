"""
Closed-form attributions for linear lag models
==============================================

For a linear predictor every lag cell contributes the same amount to every
coalition, so its Shapley value is a coefficient times its displacement
from the baseline. Moving-average terms are first rewritten in terms of
differenced observations.
"""

import numpy as np

from tsshap import SeriesWindow, closed_form_shap, effective_coeffs, exact_shap
from tsshap.models import ARParams, MAParams, VARMAXParams, make_predictor

# an AR(2) with lags (y_{t-1}, y_{t-2}) = (2, 4) and a zero baseline
ar = ARParams(alpha=0.0, beta=[0.5, 0.3])
win = SeriesWindow([[2.0, 4.0]])
print("AR(2) attributions:", closed_form_shap(ar, win).phi[0])

# an MA(2) reads three lags once the innovations are replaced by differences
ma = MAParams(alpha=0.0, gamma=[0.4, 0.1])
print("MA(2) effective coefficients:", effective_coeffs(ma).vector)

# a bivariate VARMAX with one exogenous input, checked against brute force
rng = np.random.default_rng(0)
vm = VARMAXParams(alpha=[0.1, -0.2],
                  A=[[[0.5, 0.1], [0.0, 0.3]], [[0.1, 0.0], [0.05, 0.1]]],
                  Mmat=[[[0.2, 0.0], [0.1, 0.2]]],
                  B=[[[0.4], [0.2]]])
pred = make_predictor(vm)
win = SeriesWindow(rng.normal(size=(2, pred.width)), rng.normal(size=(1, 1)))
base = SeriesWindow(rng.normal(size=(2, pred.width)), rng.normal(size=(1, 1)))

cf = closed_form_shap(vm, win, base)
ex = exact_shap(pred, win, base)
print("players:", cf.indexing.d)
print("max |closed form - exact|:", np.abs(cf.phi - ex.phi).max())
print("efficiency: f(x) - f(base) =", pred.predict(win) - pred.predict(base), "sum phi =", cf.total())
