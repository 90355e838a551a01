"""Command-line front end.

Exit codes: 0 on success, 2 on validation errors, 3 on numerical failures.
Errors go to stderr as ``error: <ERROR_ID>: <message>``.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import io
from .bench import convergence_sweep
from .closed_form import closed_form_shap
from .core import (Attribution, Mode, PlayerIndexing, SeriesWindow, TSShapError,
                   window_at, zero_baseline)
from .events import AlignedAttributions, Normalization, detect_event_argmax, event_importance
from .exact import ENUMERATION_CAP, EnumerationCapError, exact_shap
from .kernelshap import IdentifiabilityError, SamplerConfig, Strategy, kernel_shap, varshap
from .models import (ElmanParams, SingularSystemError, load_params, make_predictor, random_params,
                     save_params, simulate)
from .time_consistent import time_consistent_shap

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
METHODS = ("exact", "closed-form", "kernelshap", "varshap")
DEFAULT_WINDOW = 10
DEFAULT_SAMPLES = 1000


@dataclass
class RunConfig:
    input: str
    model: Optional[str] = None
    features: Optional[list] = None
    exog: list = field(default_factory=list)
    window: Optional[int] = None
    method: str = "kernelshap"
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    strategy: str = "stratified"
    baseline: str = "zero"
    baseline_file: Optional[str] = None
    mode: str = "cell"
    output: str = "-"
    format: str = "csv"
    times: Optional[list] = None
    cap: int = ENUMERATION_CAP
    jobs: int = 1
    normalization: str = "raw"


class _Problem:
    """Everything a command needs once the inputs are parsed and checked."""

    def __init__(self, cfg: RunConfig):
        if cfg.model is None:
            raise io.ValidationError("a model file is required (--model)")
        params, width = load_params(cfg.model)
        self.params = params
        header, _ = io.read_series(cfg.input)
        exog_cols = list(cfg.exog)
        features = cfg.features or [h for h in header if h not in exog_cols]
        self.names, self.series = io.read_series(cfg.input, features)
        self.exog_names, self.exog_series = (io.read_series(cfg.input, exog_cols) if exog_cols else ([], None))

        if isinstance(params, ElmanParams):
            width = cfg.window or width or DEFAULT_WINDOW
        elif cfg.window is not None and cfg.window != params.width:
            raise io.ValidationError(f"model reads {params.width} lags but --window is {cfg.window}")
        self.pred = make_predictor(params, width if isinstance(params, ElmanParams) else None)
        self.width = self.pred.width
        if self.pred.n_features != len(self.names):
            raise io.ValidationError(f"model expects {self.pred.n_features} features, input selects {len(self.names)}")
        if self.pred.n_exog != len(self.exog_names):
            raise io.ValidationError(f"model expects {self.pred.n_exog} exogenous columns, got {len(self.exog_names)}")
        self.T = self.series.shape[1]
        self.lookback = max(self.width, self.pred.exog_width)
        if self.lookback >= self.T:
            raise io.ValidationError(f"window of {self.lookback} steps does not fit a series of length {self.T}")
        self.times = cfg.times if cfg.times else list(range(self.lookback, self.T))
        for t in self.times:
            if not self.lookback <= t < self.T:
                raise io.ValidationError(f"prediction time {t} outside [{self.lookback}, {self.T})")
        self.cfg = cfg
        self._base_cache = None

    def window(self, t: int) -> SeriesWindow:
        return window_at(self.series, t, self.width, self.exog_series, self.pred.exog_width,
                         self.names, self.exog_names or None)

    def baseline(self, win: SeriesWindow) -> SeriesWindow:
        kind = self.cfg.baseline
        if kind == "zero":
            return zero_baseline(win)
        if kind == "mean":
            endog = np.repeat(self.series.mean(axis=1, keepdims=True), self.width, axis=1)
            exog = None
            if win.exog is not None:
                exog = np.repeat(self.exog_series.mean(axis=1, keepdims=True), win.exog_width, axis=1)
            return win.replace(endog=endog, exog=exog)
        if kind == "file":
            if self._base_cache is None:
                if not self.cfg.baseline_file:
                    raise io.ValidationError("--baseline file needs --baseline-file")
                _, b = io.read_series(self.cfg.baseline_file, self.names)
                bx = io.read_series(self.cfg.baseline_file, self.exog_names)[1] if self.exog_names else None
                n = b.shape[1]
                if n < self.lookback:
                    raise io.ValidationError(f"baseline file has {n} rows, needs {self.lookback}")
                self._base_cache = window_at(b, n, self.width, bx, self.pred.exog_width,
                                             self.names, self.exog_names or None)
            return self._base_cache
        raise io.ValidationError(f"unknown baseline {kind!r}")

    def indexing(self, win: SeriesWindow) -> PlayerIndexing:
        return PlayerIndexing(Mode(self.cfg.mode), *win.shape)

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(self.cfg.n_samples, self.cfg.seed, Strategy(self.cfg.strategy))

    def explain(self, win: SeriesWindow, n_jobs: Optional[int] = None) -> Attribution:
        cfg = self.cfg
        n_jobs = cfg.jobs if n_jobs is None else n_jobs
        base = self.baseline(win)
        idx = self.indexing(win)
        if cfg.method == "exact":
            return exact_shap(self.pred, win, base, idx, cap=cfg.cap, n_jobs=n_jobs)
        if cfg.method == "closed-form":
            if isinstance(self.params, ElmanParams):
                raise io.ValidationError("closed-form needs an ar/ma/arma/varmax model")
            if idx.mode is not Mode.CELL:
                raise io.ValidationError("closed-form attributions are per cell; use --mode cell")
            return closed_form_shap(self.params, win, base)
        if cfg.method == "kernelshap":
            return kernel_shap(self.pred, win, base, idx, self.sampler(), n_jobs=n_jobs)
        if cfg.method == "varshap":
            return varshap(self.pred, win, base, idx, self.sampler(), n_jobs=n_jobs)
        raise io.ValidationError(f"unknown method {cfg.method!r}; expected one of {METHODS}")

    def explain_all(self) -> list:
        """Attributions at every prediction time, in time order.

        With several jobs the windows are spread over threads; each window is
        then evaluated single-threaded, which gives the same bytes.
        """
        if self.cfg.jobs == 1 or len(self.times) == 1:
            return [self.explain(self.window(t)) for t in self.times]
        self.baseline(self.window(self.times[0]))      # fill the file-baseline cache before threading
        with ThreadPoolExecutor(max_workers=self.cfg.jobs) as pool:
            return list(pool.map(lambda t: self.explain(self.window(t), n_jobs=1), self.times))

    def check_method(self) -> None:
        cfg = self.cfg
        if cfg.method not in METHODS:
            raise io.ValidationError(f"unknown method {cfg.method!r}; expected one of {METHODS}")
        if cfg.method == "exact":
            d = self.indexing(self.window(self.times[0])).d
            if d > cfg.cap:
                raise EnumerationCapError(
                    f"exact enumeration over d={d} players exceeds the cap of {cfg.cap}; "
                    "use --method kernelshap or varshap, or raise --cap")
        if cfg.method == "closed-form" and isinstance(self.params, ElmanParams):
            raise io.ValidationError("closed-form needs an ar/ma/arma/varmax model")


def cmd_explain(cfg: RunConfig) -> list:
    prob = _Problem(cfg)
    prob.check_method()
    records = list(zip(prob.times, prob.explain_all()))
    if cfg.format == "json":
        meta = {"method": cfg.method, "seed": cfg.seed, "n_samples": cfg.n_samples}
        io.write_json(cfg.output, io.attributions_to_json(records, prob.names, prob.exog_names, meta))
    else:
        io.write_attributions_csv(cfg.output, records, prob.names, prob.exog_names)
    return records


def cmd_events(cfg: RunConfig):
    if cfg.mode != "cell":
        raise io.ValidationError("event detection needs --mode cell")
    prob = _Problem(cfg)
    prob.check_method()
    aligned = AlignedAttributions(prob.width, tuple(prob.times), tuple(prob.explain_all()), prob.T)
    es = event_importance(aligned, Normalization(cfg.normalization), feature_names=prob.names)
    io.write_events_csv(cfg.output, es, prob.names)
    hit = detect_event_argmax(es, on_empty="sentinel")
    if hit is None:
        print("no event: event importance is identically zero", file=sys.stderr)
    else:
        print(f"strongest event: feature={prob.names[hit[0]]} timestep={hit[1]}", file=sys.stderr)
    return es


def cmd_tcs(cfg: RunConfig):
    prob = _Problem(cfg)
    t = prob.times[-1] if cfg.times else prob.T - 1
    win = prob.window(t)
    sched = time_consistent_shap(prob.pred, win, prob.baseline(win), n_jobs=cfg.jobs)
    names = list(prob.names) + list(prob.exog_names)
    io.write_schedule_csv(cfg.output, sched, names)
    resid = sched.telescoping_residual()
    for n, name in enumerate(names):
        print(f"telescoping residual {name}: {resid[:, n].max():.3e}", file=sys.stderr)
    print(f"predictor evaluations: {sched.n_evaluations}", file=sys.stderr)
    return sched


def cmd_simulate(args) -> None:
    if args.model:
        params, _ = load_params(args.model)
    else:
        params = random_params(args.family, seed=args.seed, n_features=args.n_features, p=args.p,
                               q=args.q, n_exog=args.n_exog, exog_lags=args.exog_lags)
    sim = simulate(params, args.length, args.noise, args.seed)
    names = [f"y{n}" for n in range(sim.endog.shape[0])]
    data = sim.endog
    if sim.exog is not None:
        names += [f"x{j}" for j in range(sim.exog.shape[0])]
        data = np.vstack([sim.endog, sim.exog])
    io.write_series(args.output, names, data)
    if args.model_out:
        save_params(params, args.model_out)


def cmd_bench(cfg: RunConfig, seeds: int, methods) -> list:
    prob = _Problem(cfg)
    t = prob.times[-1] if cfg.times else prob.T - 1
    win = prob.window(t)
    idx = prob.indexing(win)
    if idx.d > cfg.cap:
        raise EnumerationCapError(f"the bench needs the exact oracle, but d={idx.d} exceeds the cap of {cfg.cap}")
    rows = convergence_sweep(prob.pred, win, prob.baseline(win), idx, methods=methods,
                             seeds=range(cfg.seed, cfg.seed + seeds), n_jobs=cfg.jobs)
    io.write_bench_csv(cfg.output, rows)
    return rows


# ---------------------------------------------------------------------------


def _csv_list(text):
    return [c.strip() for c in text.split(",") if c.strip()]


def _int_list(text):
    return [int(c) for c in _csv_list(text)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsshap", description="Shapley attributions for time-series predictors")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, method=True):
        p.add_argument("--input", required=True, help="CSV with a header row, one row per time step")
        p.add_argument("--model", required=True, help="model parameter JSON document")
        p.add_argument("--features", type=_csv_list, help="endogenous columns (default: all non-exog columns)")
        p.add_argument("--exog", type=_csv_list, default=[], help="exogenous columns")
        p.add_argument("--window", type=int, help=f"lookback width (Elman default {DEFAULT_WINDOW})")
        if method:
            p.add_argument("--method", choices=METHODS, default="kernelshap")
            p.add_argument("--mode", choices=("cell", "feature"), default="cell")
        p.add_argument("--n-samples", type=int, default=DEFAULT_SAMPLES)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--strategy", choices=("stratified", "full"), default="stratified")
        p.add_argument("--baseline", choices=("zero", "mean", "file"), default="zero")
        p.add_argument("--baseline-file")
        p.add_argument("--times", type=_int_list, help="comma-separated prediction times")
        p.add_argument("--cap", type=int, default=ENUMERATION_CAP, help="exact enumeration cap on d")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--output", default="-")

    p = sub.add_parser("explain", help="per-window attributions")
    common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("events", help="event importance across overlapping windows")
    common(p)
    p.add_argument("--normalization", choices=("raw", "mean"), default="raw")

    p = sub.add_parser("tcs", help="Time Consistent SHAP schedule for one window")
    common(p, method=False)

    p = sub.add_parser("bench", help="sampled-estimator error versus the exact oracle")
    common(p, method=False)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--methods", type=_csv_list, default=["kernelshap", "varshap"])

    p = sub.add_parser("simulate", help="write a seeded synthetic series")
    p.add_argument("--model", help="model JSON to simulate (otherwise a random one is drawn)")
    p.add_argument("--family", choices=("ar", "ma", "arma", "varmax"), default="ar")
    p.add_argument("--n-features", type=int, default=2)
    p.add_argument("-p", type=int, default=2)
    p.add_argument("-q", type=int, default=1)
    p.add_argument("--n-exog", type=int, default=0)
    p.add_argument("--exog-lags", type=int, default=0)
    p.add_argument("--length", type=int, default=500)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--model-out", help="write the generating model here")
    return parser


def _config(args) -> RunConfig:
    return RunConfig(
        input=args.input, model=args.model, features=args.features, exog=args.exog, window=args.window,
        method=getattr(args, "method", "exact"), n_samples=args.n_samples, seed=args.seed,
        strategy=args.strategy, baseline=args.baseline, baseline_file=args.baseline_file,
        mode=getattr(args, "mode", "cell"), output=args.output, format=getattr(args, "format", "csv"),
        times=args.times, cap=args.cap, jobs=args.jobs,
        normalization=getattr(args, "normalization", "raw"))


NUMERICAL = (SingularSystemError, IdentifiabilityError, FloatingPointError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args)
        elif args.command == "explain":
            cmd_explain(_config(args))
        elif args.command == "events":
            cmd_events(_config(args))
        elif args.command == "tcs":
            cmd_tcs(_config(args))
        elif args.command == "bench":
            cmd_bench(_config(args), args.seeds, args.methods)
    except NUMERICAL as exc:
        print(f"error: {getattr(exc, 'error_id', 'E_NUMERICAL')}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TSShapError, ValueError, KeyError, OSError) as exc:
        error_id = getattr(exc, "error_id", "E_VALIDATION")
        print(f"error: {error_id}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
