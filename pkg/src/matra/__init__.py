"""MaTrA: a trainable reference-based MT evaluation metric with native
baselines and a metric meta-evaluation harness."""

__version__ = "0.1.0"
