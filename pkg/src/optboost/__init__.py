"""Optimal AdaBoost with margin-convergence diagnostics."""
