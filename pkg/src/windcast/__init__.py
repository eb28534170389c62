"""Short-term wind power forecasting: SCADA ingestion, outlier filtering,
from-scratch LSTM forecasters and evolutionary hyperparameter search."""

__version__ = "0.1.0"
