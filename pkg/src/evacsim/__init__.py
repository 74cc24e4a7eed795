"""Deterministic agent-based fire-evacuation simulator and drill harness."""

__version__ = "0.1.0"
