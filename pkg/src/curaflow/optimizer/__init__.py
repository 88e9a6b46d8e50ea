"""Optimizer layers that wrap compiled modules: validator, simulator, connector."""
