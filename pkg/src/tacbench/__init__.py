"""Desk-scale tactile robotics benchmark: simulation, datasets, RL baselines."""

__version__ = "0.1.0"
