"""Automatic short-term load forecasting for large fleets of hourly series.

Models: a four-week averaging baseline with an ARMA residual corrector
(avgARIMA), the multiplicative double-seasonal Holt-Winters in its original
and modified forms, and per-lead-time NARX random forests. The evaluation
harness rolls hourly origins through fixed test weeks without re-estimation
and scores per-horizon MAPE.
"""

__version__ = "0.1.0"
