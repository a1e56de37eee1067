"""Anomaly detection on graph time series.

A variational RNN with Chebyshev graph-spectral input features scores each
step of a multichannel signal on a grid graph by its evidence lower bound;
steps scoring below a calibrated quantile threshold are flagged and localized
to (node, channel) cells via likelihood-ratio tests.
"""

from ._core import (
    Model,
    apply_scale,
    auc_roc,
    average_precision,
    calibrate_threshold,
    chi_square_cdf,
    fit_scale,
    generate,
    inject_anomaly,
    invert_scale,
    lrt_statistic,
)

__all__ = [
    "Model",
    "apply_scale",
    "auc_roc",
    "average_precision",
    "calibrate_threshold",
    "chi_square_cdf",
    "fit_scale",
    "generate",
    "inject_anomaly",
    "invert_scale",
    "lrt_statistic",
]
