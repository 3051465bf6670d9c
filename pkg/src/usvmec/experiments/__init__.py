"""Sweeps, heuristic baselines, evaluation, metrics files and plots."""
