"""Streaming congruence identification and geometric hashing over rational points.

Exact-arithmetic toolkit for deciding whether two 2D/3D rational point
multisets are congruent (and recovering the rigid motion), plus a
logarithmic-length geometric hash for batches of point sets.  All sketch
state lives in prime fields; all verification oracles use exact rationals.
"""

__version__ = "0.1.0"
