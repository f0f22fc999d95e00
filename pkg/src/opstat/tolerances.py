"""Numerical tolerances shared by the library and the test suite.

These are the single source of truth for what counts as "numerically true".
"""

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
IDEMPOTENT_TOL = 1e-10
COMPLETENESS_TOL = 1e-9
ORTHONORMAL_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-9
CAYLEY_SINGULAR_TOL = 1e-8
ARC_SNAP_TOL = 1e-12
ARC_ENDPOINT_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_CLAMP_TOL = 1e-10
PROB_SUM_TOL = 1e-12
ADDITIVITY_DEFECT_TOL = 1e-9
