"""Trigger-action IoT attack simulation and reinforcement-learning defense."""

__version__ = "0.1.0"
