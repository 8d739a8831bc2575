"""Speech-driven head motion synthesis and evaluation."""

__version__ = "0.1.0"
