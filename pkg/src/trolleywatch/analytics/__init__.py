"""Metrics, alert statistics and report emission over event logs."""
