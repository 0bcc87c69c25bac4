"""Risk-limiting audit toolkit: mismatch-based and card-level comparison
audits, tabulation, CVR margins, a sequential risk engine, a simulation
harness, and a live audit HTTP service."""

__version__ = "0.1.0"
