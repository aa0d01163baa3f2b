"""Deterministic trolley-station scene and demand simulator."""
