"""Shapley-value attributions for time-series predictors."""
from .core import (Attribution, Baseline, Coalition, FunctionPredictor, Mode, PlayerIndexing, Predictor,
                   SeriesWindow, efficiency_gap, mask_window, window_at, zero_baseline)
from .models import (ARMAParams, ARParams, ElmanParams, MAParams, VARMAXParams, make_predictor,
                     simulate, wls_solve)
from .exact import build_value_table, exact_shap, exact_shap_from_table, shapley_weight_log
from .closed_form import closed_form_shap, effective_coeffs
from .kernelshap import SamplerConfig, Strategy, kernel_shap, kernel_weight_log, sample_coalitions, varshap
from .time_consistent import feature_shap, imputation_schedule, subgame_shap, time_consistent_shap
from .events import AlignedAttributions, Normalization, detect_event_argmax, event_importance, explain_series

__version__ = "0.1.0"
