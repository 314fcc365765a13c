"""Default numerical tolerances, kept in one place and echoed in every report."""

# Singular values below RANK_RTOL * sigma_max count as zero.
RANK_RTOL = 1e-10
# ||K + K^T||_max <= SKEW_RTOL * (1 + ||K||_max)
SKEW_RTOL = 1e-12
# Residual tolerance for the decomposition conditions.
POISSON_TOL = 1e-9
# ||K N|| <= KERNEL_RTOL * (1 + ||K|| ||N||)
KERNEL_RTOL = 1e-9
# Flow norm below which a point is accepted as a fixed point.
FIXED_POINT_TOL = 1e-9
# Entries of a diagonal with |d| <= ZERO_TOL are treated as zero.
ZERO_TOL = 1e-12
# Eigenvalue threshold for symmetrized_form, relative to ||M||_2.
EIG_RTOL = 1e-10
# Condition number above which an inverse QMT warns.
COND_WARN = 1e12

STEP = 1e-3
T_END = 100.0

SEED_ENV = "QPP_STAB_SEED"


def as_dict():
    return {
        "rank_rtol": RANK_RTOL,
        "skew_rtol": SKEW_RTOL,
        "poisson_tol": POISSON_TOL,
        "kernel_rtol": KERNEL_RTOL,
        "fixed_point_tol": FIXED_POINT_TOL,
        "zero_tol": ZERO_TOL,
        "eig_rtol": EIG_RTOL,
        "step": STEP,
        "t_end": T_END,
    }
