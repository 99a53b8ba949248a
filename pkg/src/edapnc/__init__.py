"""Eigen-direction aligned precoding for physical-layer network coding over
MIMO two-way relay channels, with capacity bounds, reference schemes and a
Monte-Carlo harness."""

__version__ = "0.1.0"
