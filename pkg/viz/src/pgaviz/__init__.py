"""Figures for rigid-body rollout experiments, fed by CSV and episode files."""
