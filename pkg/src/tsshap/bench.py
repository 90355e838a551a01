"""Convergence of the sampled estimators towards the exact Shapley values."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import PlayerIndexing, Predictor, SeriesWindow, zero_baseline
from .exact import exact_shap
from .kernelshap import SamplerConfig, Strategy, kernel_shap, varshap

ESTIMATORS = {"kernelshap": kernel_shap, "varshap": varshap}
MULTIPLIERS = (4, 8, 16, 32)


@dataclass(frozen=True)
class BenchRow:
    method: str
    n_samples: Optional[int]   # None marks the full-enumeration row
    median_l2_error: float
    n_seeds: int
    d: int


def convergence_sweep(pred: Predictor, win: SeriesWindow, base: Optional[SeriesWindow] = None,
                      idx: Optional[PlayerIndexing] = None, methods: Sequence[str] = ("kernelshap", "varshap"),
                      sample_sizes: Optional[Sequence[int]] = None, seeds: Sequence[int] = range(20),
                      include_full: bool = True, n_jobs: int = 1) -> list:
    """Median over ``seeds`` of ``|phi_sampled - phi_exact|_2`` per method and sample size.

    ``sample_sizes`` defaults to ``4d, 8d, 16d, 32d``.
    """
    base = zero_baseline(win) if base is None else base
    idx = PlayerIndexing.cells(win) if idx is None else idx
    d = idx.d
    truth = exact_shap(pred, win, base, idx, n_jobs=n_jobs).phi
    sizes = [m * d for m in MULTIPLIERS] if sample_sizes is None else list(sample_sizes)
    seeds = list(seeds)
    rows = []
    for method in methods:
        estimate = ESTIMATORS[method]
        if include_full:
            cfg = SamplerConfig(strategy=Strategy.FULL_ENUMERATION)
            err = np.linalg.norm(estimate(pred, win, base, idx, cfg, n_jobs=n_jobs).phi - truth)
            rows.append(BenchRow(method, None, float(err), 1, d))
        for n in sizes:
            errs = [np.linalg.norm(estimate(pred, win, base, idx, SamplerConfig(n, seed), n_jobs=n_jobs).phi - truth)
                    for seed in seeds]
            rows.append(BenchRow(method, int(n), float(np.median(errs)), len(seeds), d))
    return rows
