"""Fairness auditing for threshold-based binary risk score instruments.

Subpackages cover data ingestion (dataset), per-group classification
metrics (metrics), fairness criteria and their joint infeasibility
(fairness), penalty-policy impact (impact), trade-off geometry
(tradeoff), logistic regression on false-positive indicators (regress),
and synthetic population generation (synth). The command line lives in
cli.
"""

__version__ = "0.1.0"
