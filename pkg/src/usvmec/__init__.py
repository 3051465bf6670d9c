"""Cooperative USV/UAV/ground-station edge computing simulator with heterogeneous-agent PPO."""

__version__ = "0.1.0"
