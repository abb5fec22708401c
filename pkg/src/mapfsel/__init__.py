"""Algorithm selection for multi-agent path finding solver portfolios."""

__version__ = "0.1.0"
