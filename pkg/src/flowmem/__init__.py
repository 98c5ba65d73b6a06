"""Dual-memory action generation on conditional flow matching.

A velocity-field policy generates fixed-length action chunks. Its
generative start is replaced by a task-level Gaussian prior composed from
retrieved neighbor trajectories, and corrected by a learned temporal
consistency residual, with noise scale and solver step count adapted to
retrieval confidence.
"""

__version__ = "0.1.0"
