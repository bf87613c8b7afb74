"""Central tolerance table.

Every numerical threshold used across the package lives here, so that a
reviewer can see all of them in one place and any of them can be overridden
per call (functions take these as keyword defaults).

Two families:

* algebraic (1e-12): identities that hold to rounding error for well
  conditioned inputs (trace preservation of a Kraus pair, vec round trips,
  Hermiticity of constructed operators).
* structural (1e-10): properties that accumulate a little more floating
  point noise (unitarity of matrix exponentials, unitality of channels,
  biorthonormality of eigenvector pairs).
"""

# identities expected to hold to rounding error
ATOL_ALGEBRAIC = 1e-12

# properties allowed to accumulate some floating-point noise
ATOL_STRUCTURAL = 1e-10

# most negative eigenvalue tolerated before a matrix is declared not PSD
PSD_FLOOR = -1e-8

# most negative eigenvalue tolerated for a conditional state mid-trajectory
STATE_PSD_FLOOR = -1e-9

# commutator norm below which a fixed-point projector is accepted
FIXED_POINT_COMMUTATOR_TOL = 1e-9

# relative commutator norm below which two operators count as commuting
COMMUTE_TOL = 1e-10

# eigenvalue-gap and conditioning thresholds flagged by the general eigensolver
EIG_CLUSTER_GAP = 1e-8
EIG_COND_LIMIT = 1e10

# probability below which a measurement branch is treated as impossible
PROBABILITY_FLOOR = 1e-14

# classification heuristics for the metastable window (both configurable):
# the window must span at least WINDOW_SEPARATION in m, and the slowest
# metastable eigenvalue must survive at least WINDOW_MIN_LIFETIME cycles
# (this realizes "close to the unit circle" quantitatively).
WINDOW_SEPARATION = 10.0
WINDOW_MIN_LIFETIME = 100.0
