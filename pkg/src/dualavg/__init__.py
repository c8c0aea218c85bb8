"""Dual averaging with restarts for uniformly convex Lipschitz minimization."""

__version__ = "0.1.0"
