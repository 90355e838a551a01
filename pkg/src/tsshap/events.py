"""Event detection: pool overlapping per-window attributions onto absolute time steps.

A window explaining the prediction at time ``t`` assigns ``phi^t(n, w)`` to
the observation of feature ``n`` at step ``s = t - w``. Summing these over
every window that saw step ``s`` gives the event importance ``E_n(s)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Attribution, Mode, TSShapError, window_at


class NoEventError(TSShapError, ValueError):
    error_id = "E_NO_EVENT"


class Normalization(enum.Enum):
    RAW_SUM = "raw"
    MEAN_PER_WINDOW = "mean"


@dataclass(frozen=True)
class AlignedAttributions:
    """CELL-mode attributions of the predictions at ``times`` over a series of length ``length``."""

    width: int
    times: tuple
    attributions: tuple
    length: int

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        atts = tuple(self.attributions)
        if len(times) != len(atts):
            raise ValueError("need exactly one attribution per prediction time")
        shapes = set()
        for t, att in zip(times, atts):
            if att.indexing.mode is not Mode.CELL:
                raise ValueError("event detection needs CELL-mode attributions")
            if att.indexing.width != self.width:
                raise ValueError(f"attribution at t={t} covers {att.indexing.width} lags, expected {self.width}")
            if not self.width <= t < self.length:
                raise ValueError(f"prediction time {t} outside [{self.width}, {self.length})")
            shapes.add(att.endog.shape)
        if len(shapes) > 1:
            raise ValueError(f"attribution shapes differ across windows: {sorted(shapes)}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "attributions", atts)

    @property
    def n_features(self) -> int:
        return self.attributions[0].indexing.n_features if self.attributions else 0


@dataclass(frozen=True)
class EventSeries:
    values: np.ndarray       # N x T
    counts: np.ndarray       # T
    normalization: Normalization = Normalization.RAW_SUM
    feature_names: Optional[tuple] = None

    def total(self) -> np.ndarray:
        """Event importance summed across features."""
        return self.values.sum(axis=0)


def event_importance(aligned: AlignedAttributions, norm: Normalization = Normalization.RAW_SUM,
                     output: Optional[int] = None,
                     feature_names: Optional[Sequence[str]] = None) -> EventSeries:
    """Sum attribution mass per (feature, absolute step).

    ``output`` selects one prediction dimension; by default all outputs are
    summed.
    """
    norm = Normalization(norm)
    W, T = aligned.width, aligned.length
    N = aligned.n_features
    values = np.zeros((N, T))
    counts = np.zeros(T, dtype=np.int64)
    steps_back = np.arange(1, W + 1)
    for t, att in zip(aligned.times, aligned.attributions):
        grid = att.endog
        grid = grid.sum(axis=0) if output is None else grid[output]
        values[:, t - steps_back] += grid
        counts[t - steps_back] += 1
    if norm is Normalization.MEAN_PER_WINDOW:
        seen = counts > 0
        values[:, seen] /= counts[seen]
    names = None if feature_names is None else tuple(feature_names)
    return EventSeries(values, counts, norm, names)


def detect_event_argmax(es: EventSeries, per_feature: bool = False, on_empty: str = "raise"):
    """Location of the largest ``|E|``.

    Returns ``(feature, timestep)`` or, with ``per_feature``, one timestep per
    feature. Ties go to the earliest step, then the lowest feature. An
    all-zero series raises :class:`NoEventError`, or returns ``None`` when
    ``on_empty="sentinel"``.
    """
    mag = np.abs(es.values)
    if mag.size == 0 or not np.any(mag > 0):
        if on_empty == "sentinel":
            return None
        raise NoEventError("event series is empty or identically zero: no event to detect")
    if per_feature:
        return [int(np.argmax(row)) if np.any(row > 0) else None for row in mag]
    flat = int(np.argmax(mag.T))
    s, n = divmod(flat, mag.shape[0])
    return n, s


def explain_series(explain, series: np.ndarray, width: int, times: Optional[Sequence[int]] = None,
                   exog: Optional[np.ndarray] = None, exog_width: int = 0) -> AlignedAttributions:
    """Run ``explain(window)`` at every prediction time and align the results."""
    series = np.atleast_2d(np.asarray(series, dtype=float))
    T = series.shape[1]
    lookback = max(width, exog_width)
    times = range(lookback, T) if times is None else times
    atts = [explain(window_at(series, t, width, exog, exog_width)) for t in times]
    return AlignedAttributions(width, tuple(times), tuple(atts), T)
