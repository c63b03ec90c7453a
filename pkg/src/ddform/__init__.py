"""Double-divergence elliptic solvers and level-set regularity measurements."""

__version__ = "0.1.0"
