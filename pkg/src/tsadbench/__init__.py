"""Benchmark engine for unsupervised time-series anomaly detection."""

__version__ = "0.1.0"
