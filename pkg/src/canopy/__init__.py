"""canopy: a desk-scale urban green-space monitoring stack.

Simulated sensor fleet, radio uplink, time-series store, rule-based
alerting, vegetation-index analytics, maintenance operations, and an
HTTP API binding them together.
"""

__version__ = "0.1.0"
