"""Mean-field variational inference as a lifted convex problem over monotone maps."""

__version__ = "0.1.0"
