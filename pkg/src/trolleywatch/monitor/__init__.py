"""Threshold alerting over station observations plus the append-only log."""
