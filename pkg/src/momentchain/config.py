"""Numerical tolerances and size limits.

These are module-level knobs so embedding applications can tighten or relax
them; library code reads them at call time.
"""

# Structural operator checks (unitarity, hermiticity, projector idempotence).
STRUCTURAL_TOL = 1e-10

# State normalization checks.
NORM_TOL = 1e-12

# Exact-mode probabilities at or below this are treated as zero and dropped.
PRUNE_EPS = 1e-14

# A total conditioned weight at or below this means the conditioning event
# cannot happen; well below any physical probability, well above |amp|^2
# round-off noise (~1e-32).
CONDITION_EPS = 1e-24

# Total Hilbert-space dimension guard: rejects runaway scenarios early.
DIMENSION_CAP = 1 << 20
