"""M/G/k multiserver scheduling toolkit."""

__version__ = "0.1.0"
