"""Cognitive radar time-budget simulator and constrained-RL dwell scheduler."""

__version__ = "0.1.0"
