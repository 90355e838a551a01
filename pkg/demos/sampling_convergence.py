"""
Sampled estimators against the exact oracle
===========================================

A small Elman network over two features and ten lags has 20 cell players,
which is still within reach of brute-force enumeration. The sampled
KernelSHAP error shrinks as the number of sampled coalitions grows, and
full enumeration recovers the exact values.
"""

import numpy as np

from tsshap import SeriesWindow, exact_shap
from tsshap.bench import convergence_sweep
from tsshap.kernelshap import SamplerConfig, Strategy, kernel_shap
from tsshap.models import ElmanParams, make_predictor

rng = np.random.default_rng(7)
pred = make_predictor(ElmanParams.random(2, 1, seed=7, scale=1.0), width=10)
win = SeriesWindow(rng.normal(size=(2, 10)))

rows = convergence_sweep(pred, win, methods=["kernelshap"], seeds=range(10), include_full=False)
for r in rows:
    print(f"n_samples={r.n_samples:5d}  median L2 error={r.median_l2_error:.4f}")

# full enumeration over 8 players is exact up to round-off
small = make_predictor(ElmanParams.random(2, 1, seed=3, scale=1.0), width=4)
w4 = SeriesWindow(rng.normal(size=(2, 4)))
full = kernel_shap(small, w4, cfg=SamplerConfig(strategy=Strategy.FULL_ENUMERATION))
print("full enumeration error:", np.abs(full.phi - exact_shap(small, w4).phi).max())
