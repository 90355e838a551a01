"""Parametric time-series predictors, a weighted least-squares solver and a simulator.

MA, ARMA and VARMAX predictors use the differenced rewrite of the residual
terms: the unobserved innovation ``eps[t-w]`` is replaced by
``y[t-w] - y[t-w-1]`` and the current innovation by its zero mean. A model
with ``q`` moving-average lags therefore reads ``q + 1`` past observations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .core import DimensionError, Predictor, SeriesWindow, TSShapError


class SingularSystemError(TSShapError, np.linalg.LinAlgError):
    error_id = "E_SINGULAR"


def _vector(x, name) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DimensionError(f"{name} must be a vector")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def _stack(mats, rows, cols, name) -> np.ndarray:
    arr = np.asarray(mats, dtype=float)
    if arr.size == 0:
        return np.zeros((0, rows, cols))
    if arr.ndim == 2 and rows == 1:
        arr = arr[:, None, :]
    if arr.ndim != 3 or arr.shape[1:] != (rows, cols):
        raise DimensionError(f"{name} must be a list of {rows}x{cols} matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


# ---------------------------------------------------------------------------
# parameter bundles


@dataclass(frozen=True)
class ARParams:
    alpha: float
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        beta = _vector(self.beta, "beta")
        if beta.size < 1:
            raise DimensionError("AR order must be at least 1")
        object.__setattr__(self, "beta", beta)

    @property
    def width(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class MAParams:
    alpha: float
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        gamma = _vector(self.gamma, "gamma")
        if gamma.size < 1:
            raise DimensionError("MA order must be at least 1")
        object.__setattr__(self, "gamma", gamma)

    @property
    def width(self) -> int:
        return self.gamma.size + 1


@dataclass(frozen=True)
class ARMAParams:
    alpha: float
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        beta, gamma = _vector(self.beta, "beta"), _vector(self.gamma, "gamma")
        if beta.size < 1 or gamma.size < 1:
            raise DimensionError("ARMA needs p >= 1 and q >= 1")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def p(self) -> int:
        return self.beta.size

    @property
    def q(self) -> int:
        return self.gamma.size

    @property
    def width(self) -> int:
        return max(self.p, self.q + 1)


@dataclass(frozen=True)
class VARMAXParams:
    """``alpha`` (N,), ``A`` (P,N,N), ``Mmat`` (Q,N,N) and ``B`` (L,N,J).

    ``A[w-1]`` multiplies the lag-``w`` observation vector, ``Mmat[w-1]`` the
    lag-``w`` innovation and ``B[l-1]`` the lag-``l`` exogenous vector.
    """

    alpha: np.ndarray
    A: np.ndarray
    Mmat: np.ndarray
    B: Optional[np.ndarray] = None

    def __post_init__(self):
        alpha = _vector(self.alpha, "alpha")
        N = alpha.size
        A = _stack(self.A, N, N, "A")
        Mm = _stack(self.Mmat, N, N, "Mmat")
        if self.B is None or np.asarray(self.B).size == 0:
            B = np.zeros((0, N, 0))
        else:
            B = np.asarray(self.B, dtype=float)
            if B.ndim == 2 and N == 1:
                B = B[:, None, :]
            if B.ndim != 3 or B.shape[1] != N or B.shape[2] < 1:
                raise DimensionError(f"B must be a list of N x J matrices with N={N}, got shape {B.shape}")
            if not np.all(np.isfinite(B)):
                raise ValueError("B contains non-finite values")
        if A.shape[0] == 0 and Mm.shape[0] == 0:
            raise DimensionError("VARMAX needs at least one A or Mmat lag")
        for name, arr in (("alpha", alpha), ("A", A), ("Mmat", Mm), ("B", B)):
            object.__setattr__(self, name, arr)

    @property
    def n_features(self) -> int:
        return self.alpha.size

    @property
    def P(self) -> int:
        return self.A.shape[0]

    @property
    def Q(self) -> int:
        return self.Mmat.shape[0]

    @property
    def L(self) -> int:
        return self.B.shape[0]

    @property
    def n_exog(self) -> int:
        return self.B.shape[2] if self.L else 0

    @property
    def width(self) -> int:
        return max(self.P, self.Q + 1 if self.Q else 0)


@dataclass(frozen=True)
class ElmanParams:
    """Single-layer tanh recurrent network: ``h = tanh(Whh h + Wxh x + bh)``, ``out = Why h + by``."""

    W_hh: np.ndarray
    W_xh: np.ndarray
    b_h: np.ndarray
    W_hy: np.ndarray
    b_y: np.ndarray

    def __post_init__(self):
        arrs = {k: np.atleast_1d(np.asarray(getattr(self, k), dtype=float))
                for k in ("W_hh", "W_xh", "b_h", "W_hy", "b_y")}
        H = arrs["b_h"].size
        M = arrs["b_y"].size
        if H < 1:
            raise DimensionError("hidden size must be at least 1")
        arrs["W_hh"] = arrs["W_hh"].reshape(H, H)
        arrs["W_xh"] = arrs["W_xh"].reshape(H, -1)
        arrs["W_hy"] = arrs["W_hy"].reshape(M, H)
        for k, v in arrs.items():
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{k} contains non-finite values")
            object.__setattr__(self, k, v)

    @property
    def hidden(self) -> int:
        return self.b_h.size

    @property
    def n_features(self) -> int:
        return self.W_xh.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.b_y.size

    @classmethod
    def random(cls, n_features: int, n_outputs: int = 1, hidden: int = 8, seed: int = 0,
               scale: float = 0.5) -> "ElmanParams":
        rng = np.random.default_rng(seed)
        u = lambda *shape: rng.uniform(-scale, scale, size=shape)
        return cls(u(hidden, hidden), u(hidden, n_features), u(hidden), u(n_outputs, hidden), u(n_outputs))

    def scaled(self, factor: float) -> "ElmanParams":
        """Shrink the input weights; small factors push the network towards its linearisation."""
        return ElmanParams(self.W_hh, self.W_xh * factor, self.b_h, self.W_hy, self.b_y)


Params = Union[ARParams, MAParams, ARMAParams, VARMAXParams, ElmanParams]


# ---------------------------------------------------------------------------
# batched forward passes; endog is (S, N, W), exog (S, J, L)


def _ar_batch(p: ARParams, endog):
    return p.alpha + endog[:, 0, :] @ p.beta


def _ma_batch(p: MAParams, endog):
    y = endog[:, 0, :]
    return p.alpha + (y[:, :-1] - y[:, 1:]) @ p.gamma


def _arma_batch(p: ARMAParams, endog):
    y = endog[:, 0, :]
    out = p.alpha + y[:, :p.p] @ p.beta
    return out + (y[:, :p.q] - y[:, 1:p.q + 1]) @ p.gamma


def _varmax_batch(p: VARMAXParams, endog, exog):
    out = np.broadcast_to(p.alpha, (endog.shape[0], p.n_features)).copy()
    if p.P:
        out += np.einsum("wmn,snw->sm", p.A, endog[:, :, :p.P])
    if p.Q:
        diff = endog[:, :, :p.Q] - endog[:, :, 1:p.Q + 1]
        out += np.einsum("wmn,snw->sm", p.Mmat, diff)
    if p.L:
        out += np.einsum("lmj,sjl->sm", p.B, exog)
    return out


def _elman_batch(p: ElmanParams, endog):
    h = np.zeros((endog.shape[0], p.hidden))
    for w in range(endog.shape[2] - 1, -1, -1):
        h = np.tanh(h @ p.W_hh.T + endog[:, :, w] @ p.W_xh.T + p.b_h)
    return h @ p.W_hy.T + p.b_y


class ModelPredictor(Predictor):
    """:class:`Predictor` backed by one of the parameter bundles."""

    def __init__(self, params: Params, width: Optional[int] = None):
        self.params = params
        if isinstance(params, ElmanParams):
            if width is None:
                raise DimensionError("an Elman predictor needs an explicit window width")
            self.n_features, self.width, self.n_outputs = params.n_features, int(width), params.n_outputs
        else:
            if width is not None and width != params.width:
                raise DimensionError(f"{type(params).__name__} reads exactly {params.width} lags, not {width}")
            self.width = params.width
            if isinstance(params, VARMAXParams):
                self.n_features = self.n_outputs = params.n_features
                self.n_exog, self.exog_width = params.n_exog, params.L
            else:
                self.n_features = self.n_outputs = 1

    def predict_batch(self, endog, exog=None):
        p = self.params
        endog = np.asarray(endog, dtype=float)
        if isinstance(p, ARParams):
            out = _ar_batch(p, endog)
        elif isinstance(p, MAParams):
            out = _ma_batch(p, endog)
        elif isinstance(p, ARMAParams):
            out = _arma_batch(p, endog)
        elif isinstance(p, VARMAXParams):
            out = _varmax_batch(p, endog, exog)
        else:
            out = _elman_batch(p, endog)
        return np.asarray(out, dtype=float).reshape(endog.shape[0], self.n_outputs)

    def __repr__(self):
        return f"ModelPredictor({type(self.params).__name__}, width={self.width})"


def make_predictor(params: Params, width: Optional[int] = None) -> ModelPredictor:
    return ModelPredictor(params, width)


def _single(params, win: SeriesWindow, width=None) -> np.ndarray:
    return make_predictor(params, width).predict(win)


def predict_ar(params: ARParams, win: SeriesWindow) -> float:
    return float(_single(params, win)[0])


def predict_ma(params: MAParams, win: SeriesWindow) -> float:
    return float(_single(params, win)[0])


def predict_arma(params: ARMAParams, win: SeriesWindow) -> float:
    return float(_single(params, win)[0])


def predict_varmax(params: VARMAXParams, win: SeriesWindow) -> np.ndarray:
    return _single(params, win)


def predict_elman(params: ElmanParams, win: SeriesWindow) -> np.ndarray:
    return _single(params, win, win.width)


# ---------------------------------------------------------------------------
# weighted least squares


def wls_solve(X, y, w, ridge: float = 0.0) -> np.ndarray:
    """Minimise ``sum_s w_s |y_s - X_s c|^2 + ridge |c|^2``.

    The weight-scaled system (stacked with ``sqrt(ridge) I`` when ``ridge > 0``)
    is solved through a column-pivoted QR factorisation. Returns ``K`` or
    ``K x M`` coefficients matching the shape of ``y``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    vector_target = y.ndim == 1
    Y = y[:, None] if vector_target else y
    S, K = X.shape
    if Y.shape[0] != S or w.shape != (S,):
        raise DimensionError("X, y and w must agree on the number of rows")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be nonnegative and not all zero")

    sw = np.sqrt(w)[:, None]
    Xa, Ya = sw * X, sw * Y
    if ridge > 0:
        Xa = np.vstack([Xa, np.sqrt(ridge) * np.eye(K)])
        Ya = np.vstack([Ya, np.zeros((K, Y.shape[1]))])
    if Xa.shape[0] < K:
        raise SingularSystemError(f"{K - Xa.shape[0]} of {K} columns are undetermined: fewer rows than unknowns")

    Q, R, perm = scipy.linalg.qr(Xa, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(Xa.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < K:
        raise SingularSystemError(f"design matrix is rank deficient: {K - rank} of {K} columns are linearly dependent")
    coef = np.empty((K, Y.shape[1]))
    coef[perm] = scipy.linalg.solve_triangular(R, Q.T @ Ya)
    return coef[:, 0] if vector_target else coef


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SimulatedSeries:
    endog: np.ndarray            # N x T
    exog: Optional[np.ndarray]   # J x T
    innovations: np.ndarray      # N x T


def _as_varmax(params) -> VARMAXParams:
    if isinstance(params, VARMAXParams):
        return params
    if isinstance(params, ARParams):
        return VARMAXParams([params.alpha], params.beta[:, None, None], [])
    if isinstance(params, MAParams):
        return VARMAXParams([params.alpha], [], params.gamma[:, None, None])
    if isinstance(params, ARMAParams):
        return VARMAXParams([params.alpha], params.beta[:, None, None], params.gamma[:, None, None])
    raise TypeError(f"cannot simulate {type(params).__name__}")


def simulate(params: Params, T: int, noise_scale: float = 1.0, seed: int = 0,
             exog: Optional[np.ndarray] = None) -> SimulatedSeries:
    """Run the process forward from zero initial conditions with Gaussian innovations.

    Moving-average terms use the true innovations. When the model has
    exogenous inputs and ``exog`` is not given, a standard normal exogenous
    series is drawn from the same generator.
    """
    p = _as_varmax(params)
    rng = np.random.default_rng(seed)
    N = p.n_features
    if p.L:
        if exog is None:
            exog = rng.standard_normal((p.n_exog, T))
        exog = np.asarray(exog, dtype=float)
        if exog.shape != (p.n_exog, T):
            raise DimensionError(f"exog must have shape ({p.n_exog}, {T})")
    else:
        exog = None
    eps = noise_scale * rng.standard_normal((N, T))
    y = np.zeros((N, T))
    for t in range(T):
        acc = p.alpha + eps[:, t]
        for w in range(1, min(p.P, t) + 1):
            acc = acc + p.A[w - 1] @ y[:, t - w]
        for w in range(1, min(p.Q, t) + 1):
            acc = acc + p.Mmat[w - 1] @ eps[:, t - w]
        for lag in range(1, min(p.L, t) + 1):
            acc = acc + p.B[lag - 1] @ exog[:, t - lag]
        y[:, t] = acc
    return SimulatedSeries(y, exog, eps)


def random_params(family: str, seed: int = 0, n_features: int = 2, p: int = 2, q: int = 1,
                  n_exog: int = 0, exog_lags: int = 0, scale: float = 0.4) -> Params:
    """Random coefficients for tests and synthetic data.

    AR-type coefficients are shrunk so that their absolute sum stays below
    ``scale`` (per row for matrices), which keeps simulated series stable.
    """
    rng = np.random.default_rng(seed)
    alpha = rng.normal(0.0, 0.5)

    def shrink(v):
        total = np.sum(np.abs(v))
        return v if total == 0 else v * (scale / total) * rng.uniform(0.5, 1.0)

    if family == "ar":
        return ARParams(alpha, shrink(rng.normal(size=p)))
    if family == "ma":
        return MAParams(alpha, rng.normal(0.0, 0.5, size=q))
    if family == "arma":
        return ARMAParams(alpha, shrink(rng.normal(size=p)), rng.normal(0.0, 0.5, size=q))
    if family == "varmax":
        N = n_features
        A = rng.normal(size=(p, N, N))
        A *= scale / max(np.abs(A).sum(axis=(0, 2)).max(), 1e-12)
        Mm = rng.normal(0.0, 0.5 / N, size=(q, N, N))
        B = rng.normal(0.0, 0.5, size=(exog_lags, N, n_exog)) if n_exog and exog_lags else None
        return VARMAXParams(rng.normal(0.0, 0.5, size=N), A, Mm, B)
    if family == "elman":
        return ElmanParams.random(n_features, n_features, seed=seed)
    raise ValueError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# JSON documents


FAMILIES = ("ar", "ma", "arma", "varmax", "elman")


def params_to_dict(params: Params, width: Optional[int] = None) -> dict:
    if isinstance(params, ARParams):
        return {"family": "ar", "alpha": params.alpha, "beta": params.beta.tolist()}
    if isinstance(params, MAParams):
        return {"family": "ma", "alpha": params.alpha, "gamma": params.gamma.tolist()}
    if isinstance(params, ARMAParams):
        return {"family": "arma", "alpha": params.alpha, "beta": params.beta.tolist(),
                "gamma": params.gamma.tolist()}
    if isinstance(params, VARMAXParams):
        doc = {"family": "varmax", "alpha": params.alpha.tolist(), "A": params.A.tolist(),
               "M": params.Mmat.tolist()}
        if params.L:
            doc["B"] = params.B.tolist()
        return doc
    if isinstance(params, ElmanParams):
        doc = {"family": "elman", "W_hh": params.W_hh.tolist(), "W_xh": params.W_xh.tolist(),
               "b_h": params.b_h.tolist(), "W_hy": params.W_hy.tolist(), "b_y": params.b_y.tolist()}
        if width is not None:
            doc["window"] = int(width)
        return doc
    raise TypeError(f"unsupported parameter bundle {type(params).__name__}")


def params_from_dict(doc: dict) -> tuple:
    """Parse a model document; returns ``(params, width)``.

    ``width`` is only meaningful for the Elman family (``None`` otherwise).
    Elman weights are either embedded or generated from ``seed``.
    """
    family = doc.get("family")
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}")
    if family == "ar":
        return ARParams(doc.get("alpha", 0.0), doc["beta"]), None
    if family == "ma":
        return MAParams(doc.get("alpha", 0.0), doc["gamma"]), None
    if family == "arma":
        return ARMAParams(doc.get("alpha", 0.0), doc["beta"], doc["gamma"]), None
    if family == "varmax":
        return VARMAXParams(doc["alpha"], doc.get("A", []), doc.get("M", []), doc.get("B")), None
    width = doc.get("window")
    if "W_hh" in doc:
        params = ElmanParams(doc["W_hh"], doc["W_xh"], doc["b_h"], doc["W_hy"], doc["b_y"])
    else:
        params = ElmanParams.random(int(doc["n_features"]), int(doc.get("n_outputs", 1)),
                                    hidden=int(doc.get("hidden", 8)), seed=int(doc.get("seed", 0)),
                                    scale=float(doc.get("scale", 0.5)))
    return params, None if width is None else int(width)


def save_params(params: Params, path, width: Optional[int] = None) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params, width), indent=2))


def load_params(path) -> tuple:
    return params_from_dict(json.loads(Path(path).read_text()))
