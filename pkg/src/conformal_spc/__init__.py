"""Distribution-free control charts and process monitoring via split conformal prediction."""

from .calibration import (
    QuantileClampWarning,
    SplitSpec,
    alarms,
    calibrate,
    conformal_p_value,
    conformal_quantile_index,
    fit,
    is_out_of_control,
    p_values,
    split,
)
from .charts import (
    ChartSeries,
    ShewhartLimits,
    conformal_interval_chart,
    conformal_score_chart,
    p_value_chart,
    shewhart_chart,
    uncertainty_spike_chart,
)
from .core import (
    CalibrationModel,
    ChartPoint,
    LabeledPoint,
    Observation,
    ProcessVector,
    Signal,
    Subgroup,
    median,
    range_of,
)
from .multivariate import calibrate_detector, monitor, train_knn, train_mahalanobis
from .scores import (
    FunctionModel,
    KNNRegressor,
    LeastSquaresLine,
    NonconformityScorer,
    fit_individual,
    fit_model_residual,
    fit_normalized_residual,
    fit_subgroup_mean,
    fit_subgroup_range,
)

__version__ = "0.1.0"
