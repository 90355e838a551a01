"""Sampled Shapley estimates by kernel-weighted least squares.

Two estimators share one sampler:

* :func:`kernel_shap` regresses predictions on binary coalition vectors.
* :func:`varshap` regresses predictions on the masked numeric lag values
  (a VAR-shaped linear surrogate with intercept) and reads Shapley values
  off the fitted surrogate in closed form.

The empty and the full coalition have unbounded kernel weight. Both
estimators impose them as exact constraints instead of sampling them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .closed_form import EffectiveCoeffs, linear_shap
from .core import (Attribution, Mode, PlayerIndexing, Predictor, SeriesWindow, TSShapError,
                   check_same_shape, coalition_matrix, evaluate_coalitions, zero_baseline)
from .exact import ENUMERATION_CAP, EnumerationCapError
from .models import SingularSystemError, wls_solve

SURROGATE_RIDGE = 1e-9


class SamplingError(TSShapError, ValueError):
    error_id = "E_SAMPLING"


class IdentifiabilityError(TSShapError, ValueError):
    error_id = "E_IDENTIFIABILITY"


class Strategy(enum.Enum):
    STRATIFIED_PAIRED = "stratified"
    FULL_ENUMERATION = "full"


@dataclass(frozen=True)
class SamplerConfig:
    n_samples: int = 1000
    seed: int = 0
    strategy: Strategy = Strategy.STRATIFIED_PAIRED
    dedupe: bool = True

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))


def kernel_weight_log(d: int, k) -> np.ndarray:
    """Log of the kernel ``(d-1) / (C(d,k) k (d-k))`` for interior sizes ``1 <= k <= d-1``."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 1) or np.any(k > d - 1):
        raise ValueError(f"kernel weight is only defined for 1 <= k <= {d - 1}; "
                         "the empty and full coalitions enter as constraints")
    log_binom = gammaln(d + 1.0) - gammaln(k + 1.0) - gammaln(d - k + 1.0)
    return np.log(d - 1.0) - log_binom - np.log(k) - np.log(d - k)


def kernel_size_log_distribution(d: int) -> np.ndarray:
    """Normalised log-probability of each coalition size ``1..d-1`` under the kernel.

    The total kernel mass at size ``k`` is ``C(d,k)`` times the per-coalition
    weight; it is normalised with ``logsumexp`` so nothing underflows even
    when individual weights are astronomically small.
    """
    if d < 2:
        raise SamplingError("kernel sampling needs at least two players")
    k = np.arange(1, d)
    log_binom = gammaln(d + 1.0) - gammaln(k + 1.0) - gammaln(d - k + 1.0)
    mass = log_binom + kernel_weight_log(d, k)
    return mass - logsumexp(mass)


@dataclass(frozen=True)
class KernelSample:
    z: np.ndarray
    weight_log: float
    multiplicity: int = 1
    fx: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.z.sum())


@dataclass(frozen=True)
class CoalitionSample:
    """Columnar list of :class:`KernelSample` rows.

    ``weight_log`` is the log regression weight of one copy of the coalition:
    the kernel weight under full enumeration, and zero for stratified draws,
    which already follow the kernel distribution.
    """

    masks: np.ndarray
    multiplicity: np.ndarray
    weight_log: np.ndarray

    def __len__(self) -> int:
        return self.masks.shape[0]

    def __getitem__(self, i) -> KernelSample:
        return KernelSample(self.masks[i], float(self.weight_log[i]), int(self.multiplicity[i]))

    def __iter__(self) -> Iterator[KernelSample]:
        return (self[i] for i in range(len(self)))

    def regression_weights(self) -> np.ndarray:
        return self.multiplicity * np.exp(self.weight_log - self.weight_log.max())


def _merge_duplicates(masks: np.ndarray) -> tuple:
    keys = np.packbits(masks, axis=1)
    _, first, inverse, counts = np.unique(keys, axis=0, return_index=True,
                                          return_inverse=True, return_counts=True)
    order = np.argsort(first, kind="stable")
    return masks[first[order]], counts[order]


def sample_coalitions(cfg: SamplerConfig, d: int) -> CoalitionSample:
    if d < 2:
        raise SamplingError("kernel sampling needs at least two players")
    if cfg.strategy is Strategy.FULL_ENUMERATION:
        if d > ENUMERATION_CAP:
            raise EnumerationCapError(f"full enumeration over d={d} players exceeds the cap of {ENUMERATION_CAP}")
        masks = coalition_matrix(d, 1, (1 << d) - 1)
        return CoalitionSample(masks, np.ones(len(masks), dtype=np.int64),
                               kernel_weight_log(d, masks.sum(axis=1)))

    if cfg.n_samples < 2 * d:
        raise SamplingError(f"n_samples={cfg.n_samples} is below 2*d={2 * d}; "
                            "the regression would be unidentifiable")
    rng = np.random.default_rng(cfg.seed)
    n_pairs = cfg.n_samples // 2
    probs = np.exp(kernel_size_log_distribution(d))
    sizes = rng.choice(np.arange(1, d), size=n_pairs, p=probs / probs.sum())
    masks = np.zeros((2 * n_pairs, d), dtype=bool)
    for r, k in enumerate(sizes):
        masks[2 * r, rng.choice(d, size=k, replace=False)] = True
        masks[2 * r + 1] = ~masks[2 * r]
    if cfg.dedupe:
        masks, counts = _merge_duplicates(masks)
    else:
        counts = np.ones(len(masks), dtype=np.int64)
    return CoalitionSample(masks, counts.astype(np.int64), np.zeros(len(masks)))


def _evaluate(pred, win, base, idx, cfg, n_jobs):
    check_same_shape(win, base)
    pred.check_window(win)
    if not idx.matches(win):
        raise ValueError("player indexing does not match window shape")
    d = idx.d
    ends = np.vstack([np.zeros(d, dtype=bool), np.ones(d, dtype=bool)])
    f_empty, f_full = evaluate_coalitions(pred, win, base, idx, ends)
    sample = sample_coalitions(cfg, d)
    fx = evaluate_coalitions(pred, win, base, idx, sample.masks, n_jobs=n_jobs)
    return sample, fx, f_empty, f_full


def _solve(X, Y, w, ridge):
    try:
        return wls_solve(X, Y, w, ridge=ridge)
    except SingularSystemError as exc:
        raise IdentifiabilityError(f"{exc}; the sampled coalitions do not pin down every player, "
                                   "increase n_samples") from exc


def kernel_shap(pred: Predictor, win: SeriesWindow, base: Optional[SeriesWindow] = None,
                idx: Optional[PlayerIndexing] = None, cfg: SamplerConfig = SamplerConfig(),
                n_jobs: int = 1) -> Attribution:
    """KernelSHAP on binary coalition vectors, constrained to be efficient.

    The intercept is fixed to ``f(empty)`` and the last player's value is
    eliminated through ``sum(phi) = f(full) - f(empty)``.
    """
    base = zero_baseline(win) if base is None else base
    idx = PlayerIndexing.cells(win) if idx is None else idx
    d = idx.d
    if d == 1:
        f_empty, f_full = evaluate_coalitions(pred, win, base, idx, np.array([[False], [True]]))
        return Attribution(f_empty, (f_full - f_empty)[:, None], idx, fx=f_full)

    sample, fx, f_empty, f_full = _evaluate(pred, win, base, idx, cfg, n_jobs)
    total = f_full - f_empty
    Z = sample.masks.astype(float)
    X = Z[:, :-1] - Z[:, -1:]
    Y = fx - f_empty - Z[:, -1:] * total
    head = _solve(X, Y, sample.regression_weights(), 0.0)
    phi = np.vstack([head, total - head.sum(axis=0)]).T
    diag = {"n_coalitions": len(sample), "n_draws": int(sample.multiplicity.sum())}
    return Attribution(f_empty, phi, idx, fx=f_full, diagnostics=diag)


@dataclass(frozen=True)
class VARSurrogate:
    """Fitted linear surrogate ``g(x) = intercept + sum_w A_w y_w + sum_l B_l x_l``."""

    intercept: np.ndarray
    coeffs: EffectiveCoeffs

    def predict(self, win: SeriesWindow) -> np.ndarray:
        out = self.intercept + np.einsum("mnw,nw->m", self.coeffs.grid(), win.endog)
        if win.exog is not None:
            out = out + np.einsum("mjl,jl->m", self.coeffs.exog_grid(), win.exog)
        return out


def varshap(pred: Predictor, win: SeriesWindow, base: Optional[SeriesWindow] = None,
            idx: Optional[PlayerIndexing] = None, cfg: SamplerConfig = SamplerConfig(),
            n_jobs: int = 1) -> Attribution:
    """Shapley values of a kernel-weighted VAR surrogate fitted on masked lag values.

    The surrogate is forced through ``f(baseline)`` and ``f(window)``, so the
    result is efficient. Cells where the window equals the baseline cannot
    be identified; they get zero attribution and are listed under
    ``diagnostics["degenerate_cells"]``.
    """
    base = zero_baseline(win) if base is None else base
    idx = PlayerIndexing.cells(win) if idx is None else idx
    cells = PlayerIndexing.cells(win)
    delta = win.flat() - base.flat()
    active = np.flatnonzero(delta != 0)
    degenerate = np.flatnonzero(delta == 0)
    M = pred.n_outputs

    if idx.d == 1:
        f_empty, f_full = evaluate_coalitions(pred, win, base, idx, np.array([[False], [True]]))
        sample, fx = None, np.zeros((0, M))
    else:
        sample, fx, f_empty, f_full = _evaluate(pred, win, base, idx, cfg, n_jobs)
    total = f_full - f_empty

    coef = np.zeros((cells.d, M))
    if active.size:
        pivot = active[np.argmax(np.abs(delta[active]))]
        rest = active[active != pivot]
        # a single feature player leaves only the efficiency constraint to fit
        if rest.size and sample is not None:
            cell_masks = np.hstack([m.reshape(len(fx), -1) for m in idx.cell_masks(sample.masks)
                                    if m is not None])
            X = cell_masks * delta
            design = X[:, rest] - np.outer(X[:, pivot], delta[rest] / delta[pivot])
            Y = fx - f_empty - np.outer(X[:, pivot], total / delta[pivot])
            w = sample.regression_weights()
            coef[rest] = _solve(design, Y, w / w.sum(), SURROGATE_RIDGE)
        coef[pivot] = (total - delta[rest] @ coef[rest]) / delta[pivot]
    elif np.any(np.abs(total) > 0):
        raise IdentifiabilityError("window equals baseline but the predictor output changed")

    nw = win.n_features * win.width
    endog_c = coef[:nw].T.reshape(M, win.n_features, win.width).transpose(2, 0, 1)
    exog_c = None
    if win.exog is not None:
        exog_c = coef[nw:].T.reshape(M, win.n_exog, win.exog_width).transpose(2, 0, 1)
    coeffs = EffectiveCoeffs(endog_c, exog_c)
    intercept = f_empty - coef.T @ base.flat()
    cell_att = linear_shap(coeffs, win, base, f_empty)

    phi = cell_att.phi
    if idx.mode is Mode.FEATURE:
        blocks = [cell_att.endog.sum(axis=2)]
        if win.exog is not None:
            blocks.append(cell_att.exog.sum(axis=2))
        phi = np.concatenate(blocks, axis=1)
    diag = {"degenerate_cells": degenerate.tolist(), "surrogate": VARSurrogate(intercept, coeffs),
            "n_coalitions": 0 if sample is None else len(sample)}
    return Attribution(f_empty, phi, idx, fx=f_full, diagnostics=diag)
