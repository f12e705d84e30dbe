"""Global numerical tolerances.

All modules share three windows: a clamp for tiny negative entries produced
by linear solves, a looser one for row-sum / stochasticity checks, and a
residual tolerance for linear identities between kernels.
"""

# entries in [-EPS_NEG, 0) are treated as exact zeros; anything below is a
# genuine negativity violation
EPS_NEG = 1e-12

# row sums count as 1 when within EPS_STOCH of 1
EPS_STOCH = 1e-9

# sup-norm tolerance for matrix identities (duality, intertwining, harmonicity)
RESID_TOL = 1e-10
