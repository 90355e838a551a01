"""Shared domain types, player indexing and the masking function.

Lag convention used everywhere in the package: column ``w - 1`` of a lag
matrix holds the value observed ``w`` steps before the prediction time, so
the most recent step comes first.
"""
from __future__ import annotations

import enum
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class TSShapError(Exception):
    """Base class for all package errors."""

    error_id = "E_GENERIC"


class DimensionError(TSShapError, ValueError):
    error_id = "E_DIMENSION"


class EncodingError(TSShapError, ValueError):
    error_id = "E_ENCODING"


class IndexOutOfRange(TSShapError, IndexError):
    error_id = "E_INDEX"


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class SeriesWindow:
    """An ``N x W`` endogenous lag matrix plus an optional ``J x L`` exogenous one."""

    endog: np.ndarray
    exog: Optional[np.ndarray] = None
    feature_names: Optional[tuple] = None
    exog_names: Optional[tuple] = None

    def __post_init__(self):
        endog = np.array(self.endog, dtype=float)
        if endog.ndim == 1:
            endog = endog[None, :]
        if endog.ndim != 2 or endog.shape[0] < 1 or endog.shape[1] < 1:
            raise DimensionError(f"endog must be a non-empty N x W matrix, got shape {endog.shape}")
        if not np.all(np.isfinite(endog)):
            raise ValueError("endog contains non-finite values")
        endog.setflags(write=False)
        object.__setattr__(self, "endog", endog)

        exog = self.exog
        if exog is not None:
            exog = np.array(exog, dtype=float)
            if exog.ndim == 1:
                exog = exog[None, :]
            if exog.ndim != 2 or exog.shape[0] < 1 or exog.shape[1] < 1:
                raise DimensionError(f"exog must be a non-empty J x L matrix, got shape {exog.shape}")
            if not np.all(np.isfinite(exog)):
                raise ValueError("exog contains non-finite values")
            exog.setflags(write=False)
            object.__setattr__(self, "exog", exog)

        names = self.feature_names
        if names is None:
            names = tuple(f"y{n}" for n in range(endog.shape[0]))
        names = tuple(names)
        if len(names) != endog.shape[0]:
            raise DimensionError("feature_names length does not match N")
        object.__setattr__(self, "feature_names", names)

        if exog is not None:
            enames = self.exog_names
            if enames is None:
                enames = tuple(f"x{j}" for j in range(exog.shape[0]))
            enames = tuple(enames)
            if len(enames) != exog.shape[0]:
                raise DimensionError("exog_names length does not match J")
            object.__setattr__(self, "exog_names", enames)
        elif self.exog_names is not None:
            raise DimensionError("exog_names given without exog")

    @property
    def n_features(self) -> int:
        return self.endog.shape[0]

    @property
    def width(self) -> int:
        return self.endog.shape[1]

    @property
    def n_exog(self) -> int:
        return 0 if self.exog is None else self.exog.shape[0]

    @property
    def exog_width(self) -> int:
        return 0 if self.exog is None else self.exog.shape[1]

    @property
    def shape(self) -> tuple:
        return (self.n_features, self.width, self.n_exog, self.exog_width)

    def flat(self) -> np.ndarray:
        """Cell values in player order: endogenous row-major, then exogenous."""
        parts = [self.endog.ravel()]
        if self.exog is not None:
            parts.append(self.exog.ravel())
        return np.concatenate(parts)

    def replace(self, endog=None, exog=None) -> "SeriesWindow":
        return SeriesWindow(
            self.endog if endog is None else endog,
            self.exog if exog is None else exog,
            self.feature_names,
            self.exog_names,
        )


# The masking reference has the same layout as the window it masks.
Baseline = SeriesWindow


def zero_baseline(window: SeriesWindow) -> SeriesWindow:
    exog = None if window.exog is None else np.zeros_like(window.exog)
    return window.replace(endog=np.zeros_like(window.endog), exog=exog)


def check_same_shape(window: SeriesWindow, baseline: SeriesWindow) -> None:
    if window.shape != baseline.shape:
        raise DimensionError(f"baseline shape {baseline.shape} does not match window shape {window.shape}")


# ---------------------------------------------------------------------------
# players


class Mode(enum.Enum):
    CELL = "cell"
    FEATURE = "feature"


@dataclass(frozen=True)
class PlayerIndexing:
    """Bijection between player ids and window cells (CELL) or features (FEATURE).

    CELL ids run over endogenous cells first, then exogenous cells, both
    row-major in (feature, lag).
    """

    mode: Mode
    n_features: int
    width: int
    n_exog: int = 0
    exog_width: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n_features < 1 or self.width < 1:
            raise DimensionError("need at least one feature and one lag")
        if (self.n_exog == 0) != (self.exog_width == 0):
            raise DimensionError("n_exog and exog_width must both be zero or both positive")

    @classmethod
    def cells(cls, window: SeriesWindow) -> "PlayerIndexing":
        return cls(Mode.CELL, *window.shape)

    @classmethod
    def features(cls, window: SeriesWindow) -> "PlayerIndexing":
        return cls(Mode.FEATURE, *window.shape)

    @property
    def n_endog_players(self) -> int:
        if self.mode is Mode.CELL:
            return self.n_features * self.width
        return self.n_features

    @property
    def d(self) -> int:
        if self.mode is Mode.CELL:
            return self.n_features * self.width + self.n_exog * self.exog_width
        return self.n_features + self.n_exog

    def matches(self, window: SeriesWindow) -> bool:
        return (self.n_features, self.width, self.n_exog, self.exog_width) == window.shape

    def player_of(self, n: int, w: int = 1, exog: bool = False) -> int:
        """Player id owning feature ``n`` at lag ``w`` (1-based)."""
        rows, cols = (self.n_exog, self.exog_width) if exog else (self.n_features, self.width)
        if not 0 <= n < rows:
            raise IndexOutOfRange(f"feature index {n} outside [0, {rows})")
        if not 1 <= w <= cols:
            raise IndexOutOfRange(f"lag {w} outside [1, {cols}]")
        offset = self.n_endog_players if exog else 0
        if self.mode is Mode.FEATURE:
            return offset + n
        return offset + n * cols + (w - 1)

    def cell_of(self, player: int) -> tuple:
        """Inverse of :meth:`player_of`.

        Returns ``(block, n, w)`` with block ``"endog"`` or ``"exog"``; in
        FEATURE mode ``w`` is ``None`` since the player owns every lag.
        """
        if not 0 <= player < self.d:
            raise IndexOutOfRange(f"player {player} outside [0, {self.d})")
        exog = player >= self.n_endog_players
        block = "exog" if exog else "endog"
        local = player - self.n_endog_players if exog else player
        if self.mode is Mode.FEATURE:
            return block, local, None
        cols = self.exog_width if exog else self.width
        return block, local // cols, local % cols + 1

    def cell_masks(self, Z: np.ndarray) -> tuple:
        """Expand player masks ``Z`` (S x d, bool) to per-cell masks.

        Returns ``(endog_mask (S,N,W), exog_mask (S,J,L) or None)``.
        """
        Z = np.asarray(Z, dtype=bool)
        S = Z.shape[0]
        ne = self.n_endog_players
        if self.mode is Mode.CELL:
            em = Z[:, :ne].reshape(S, self.n_features, self.width)
            xm = Z[:, ne:].reshape(S, self.n_exog, self.exog_width) if self.n_exog else None
        else:
            em = np.repeat(Z[:, :ne, None], self.width, axis=2)
            xm = np.repeat(Z[:, ne:, None], self.exog_width, axis=2) if self.n_exog else None
        return em, xm


@dataclass(frozen=True)
class Coalition:
    """A set of players stored as an integer bitset of width ``d``."""

    bits: int
    d: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.d:
            raise EncodingError(f"coalition bits {self.bits:#x} set beyond width d={self.d}")

    @classmethod
    def from_players(cls, players: Sequence[int], d: int) -> "Coalition":
        bits = 0
        for p in players:
            if not 0 <= p < d:
                raise EncodingError(f"player {p} outside [0, {d})")
            bits |= 1 << p
        return cls(bits, d)

    @classmethod
    def full(cls, d: int) -> "Coalition":
        return cls((1 << d) - 1, d)

    @classmethod
    def empty(cls, d: int) -> "Coalition":
        return cls(0, d)

    @property
    def size(self) -> int:
        return bin(self.bits).count("1")

    def __contains__(self, player: int) -> bool:
        return bool(self.bits >> player & 1)

    def to_mask(self) -> np.ndarray:
        return np.array([self.bits >> i & 1 for i in range(self.d)], dtype=bool)


def mask_window(window: SeriesWindow, z: Coalition, baseline: SeriesWindow,
                idx: PlayerIndexing) -> SeriesWindow:
    """Keep the cells owned by players in ``z``; take baseline values elsewhere."""
    if z.d != idx.d:
        raise EncodingError(f"coalition width {z.d} does not match player count {idx.d}")
    check_same_shape(window, baseline)
    if not idx.matches(window):
        raise DimensionError("player indexing does not match window shape")
    endog, exog = mask_batch(window, baseline, idx, z.to_mask()[None, :])
    return window.replace(endog=endog[0], exog=None if exog is None else exog[0])


def mask_batch(window: SeriesWindow, baseline: SeriesWindow, idx: PlayerIndexing,
               Z: np.ndarray) -> tuple:
    """Vectorised masking of many coalitions at once.

    ``Z`` is an ``S x d`` boolean array. Returns stacked ``(S,N,W)`` endog and
    ``(S,J,L)`` exog arrays (exog ``None`` when the window has none).
    """
    em, xm = idx.cell_masks(Z)
    endog = np.where(em, window.endog, baseline.endog)
    exog = None
    if window.exog is not None:
        exog = np.where(xm, window.exog, baseline.exog)
    return endog, exog


def coalition_matrix(d: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """Rows ``start..stop`` of the full enumeration; row ``b`` is the bitset ``b``."""
    stop = (1 << d) if stop is None else stop
    ids = np.arange(start, stop, dtype=np.int64)
    return (ids[:, None] >> np.arange(d, dtype=np.int64)) & 1 == 1


# ---------------------------------------------------------------------------
# predictors


class Predictor:
    """Deterministic map from a window to an ``M``-vector.

    Subclasses implement :meth:`predict_batch`, which receives stacked
    endogenous windows ``(S, N, W)`` and exogenous windows ``(S, J, L)`` (or
    ``None``) and returns ``(S, M)``.
    """

    n_features: int = 1
    width: int = 1
    n_exog: int = 0
    exog_width: int = 0
    n_outputs: int = 1

    @property
    def dims(self) -> tuple:
        return (self.n_features, self.width, self.n_exog, self.exog_width, self.n_outputs)

    def predict_batch(self, endog: np.ndarray, exog: Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError

    def predict(self, window: SeriesWindow) -> np.ndarray:
        self.check_window(window)
        exog = None if window.exog is None else window.exog[None]
        return np.asarray(self.predict_batch(window.endog[None], exog), dtype=float)[0]

    def check_window(self, window: SeriesWindow) -> None:
        if window.shape != self.dims[:4]:
            raise DimensionError(
                f"{type(self).__name__} expects (N, W, J, L) = {self.dims[:4]}, got {window.shape}")


class FunctionPredictor(Predictor):
    """Wrap a plain function ``f(window) -> vector`` as a :class:`Predictor`.

    With ``batched=True`` the function instead takes ``(endog, exog)`` stacks.
    """

    def __init__(self, fn: Callable, n_features: int, width: int, n_outputs: int = 1,
                 n_exog: int = 0, exog_width: int = 0, batched: bool = False):
        self.fn = fn
        self.n_features, self.width = n_features, width
        self.n_exog, self.exog_width = n_exog, exog_width
        self.n_outputs = n_outputs
        self.batched = batched

    def predict_batch(self, endog, exog=None):
        if self.batched:
            return np.asarray(self.fn(endog, exog), dtype=float).reshape(len(endog), self.n_outputs)
        out = np.empty((len(endog), self.n_outputs))
        for s in range(len(endog)):
            win = SeriesWindow(endog[s], None if exog is None else exog[s])
            out[s] = np.asarray(self.fn(win), dtype=float).reshape(self.n_outputs)
        return out


class CountingPredictor(Predictor):
    """Delegates to another predictor and counts evaluated windows."""

    def __init__(self, inner: Predictor):
        self.inner = inner
        (self.n_features, self.width, self.n_exog,
         self.exog_width, self.n_outputs) = inner.dims
        self.calls = 0
        self._lock = threading.Lock()

    def predict_batch(self, endog, exog=None):
        with self._lock:
            self.calls += len(endog)
        return self.inner.predict_batch(endog, exog)


CHUNK = 1 << 15


def evaluate_coalitions(pred: Predictor, window: SeriesWindow, baseline: SeriesWindow,
                        idx: PlayerIndexing, Z: np.ndarray, n_jobs: int = 1) -> np.ndarray:
    """Predictions on the masked windows for every row of ``Z``; shape ``(S, M)``.

    Rows are split into fixed-size chunks whatever ``n_jobs`` is, and each
    chunk writes its own slice, so the output does not depend on worker count.
    """
    Z = np.asarray(Z, dtype=bool)
    out = np.empty((Z.shape[0], pred.n_outputs))

    def run(lo):
        hi = min(lo + CHUNK, Z.shape[0])
        endog, exog = mask_batch(window, baseline, idx, Z[lo:hi])
        out[lo:hi] = pred.predict_batch(endog, exog)

    starts = range(0, Z.shape[0], CHUNK)
    if n_jobs == 1 or Z.shape[0] <= CHUNK:
        for lo in starts:
            run(lo)
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(run, starts))
    return out


# ---------------------------------------------------------------------------
# attributions


@dataclass(frozen=True)
class Attribution:
    """Per-output Shapley values ``phi`` (``M x d``) aligned with ``indexing``."""

    base_value: np.ndarray
    phi: np.ndarray
    indexing: PlayerIndexing
    fx: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        base = np.atleast_1d(np.asarray(self.base_value, dtype=float))
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        if phi.shape != (base.shape[0], self.indexing.d):
            raise DimensionError(f"phi shape {phi.shape} inconsistent with M={base.shape[0]}, d={self.indexing.d}")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(base))):
            raise ValueError("attribution contains non-finite values")
        object.__setattr__(self, "base_value", base)
        object.__setattr__(self, "phi", phi)
        if self.fx is not None:
            object.__setattr__(self, "fx", np.atleast_1d(np.asarray(self.fx, dtype=float)))

    @property
    def n_outputs(self) -> int:
        return self.phi.shape[0]

    @property
    def endog(self) -> np.ndarray:
        """``M x N x W`` in CELL mode, ``M x N`` in FEATURE mode."""
        idx = self.indexing
        block = self.phi[:, :idx.n_endog_players]
        if idx.mode is Mode.CELL:
            return block.reshape(self.n_outputs, idx.n_features, idx.width)
        return block

    @property
    def exog(self) -> Optional[np.ndarray]:
        idx = self.indexing
        if idx.n_exog == 0:
            return None
        block = self.phi[:, idx.n_endog_players:]
        if idx.mode is Mode.CELL:
            return block.reshape(self.n_outputs, idx.n_exog, idx.exog_width)
        return block

    def total(self) -> np.ndarray:
        return self.phi.sum(axis=1)


def efficiency_gap(att: Attribution, fx, f_base) -> float:
    """Largest efficiency-axiom residual ``|sum(phi) - (fx - f_base)|`` over outputs."""
    fx = np.atleast_1d(np.asarray(fx, dtype=float))
    f_base = np.atleast_1d(np.asarray(f_base, dtype=float))
    if fx.shape != f_base.shape or fx.shape[0] != att.n_outputs:
        raise DimensionError("fx / f_base shape does not match the attribution outputs")
    return float(np.max(np.abs(att.total() - (fx - f_base))))


def window_at(series: np.ndarray, t: int, width: int, exog: Optional[np.ndarray] = None,
              exog_width: int = 0, feature_names=None, exog_names=None) -> SeriesWindow:
    """Lag window for predicting step ``t`` of an ``N x T`` series (lag 1 = step ``t - 1``)."""
    series = np.atleast_2d(np.asarray(series, dtype=float))
    lookback = max(width, exog_width)
    if not lookback <= t <= series.shape[1]:
        raise IndexOutOfRange(f"prediction time {t} needs {lookback} past steps within a series of length {series.shape[1]}")
    endog = series[:, t - width:t][:, ::-1]
    ex = None
    if exog is not None and exog_width:
        exog = np.atleast_2d(np.asarray(exog, dtype=float))
        ex = exog[:, t - exog_width:t][:, ::-1]
    return SeriesWindow(endog, ex, feature_names, exog_names if ex is not None else None)
