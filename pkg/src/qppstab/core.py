"""System and decomposition data model for quasipolynomial Poisson (QPP) flows.

A QP system on the open positive orthant reads

    dx_i/dt = x_i * (lambda_i + sum_j A_ij * prod_k x_k**B_jk)

and is QPP when lambda = K L and A = K B^T D with K skew-symmetric and D
diagonal without zero entries. The Hamiltonian is then

    H = sum_j D_j prod_k x_k**B_jk + sum_k L_k ln x_k

and the structure matrix is J_ij = K_ij x_i x_j.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import config
from .errors import DecompositionError, DomainError, StructuralError

logger = logging.getLogger(__name__)


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise StructuralError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def numerical_rank(M, rtol=config.RANK_RTOL):
    """Rank with singular values below ``rtol * sigma_max`` counted as zero."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def skew_defect(K):
    K = np.asarray(K, dtype=float)
    if K.size == 0:
        return 0.0
    return float(np.max(np.abs(K + K.T)))


def is_skew(K, rtol=config.SKEW_RTOL):
    K = np.asarray(K, dtype=float)
    scale = 1.0 + (float(np.max(np.abs(K))) if K.size else 0.0)
    return skew_defect(K) <= rtol * scale


def check_positive(x, name="x"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError(f"{name} must lie in the open positive orthant, got {x}")
    return x


@dataclass(frozen=True, eq=False)
class QPSystem:
    """Flow data ``(lambda, A, B)``; ``n`` states and ``m`` quasimonomials."""

    lam: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        lam = _frozen(self.lam, 1, "lambda")
        A = _frozen(self.A, 2, "A")
        B = _frozen(self.B, 2, "B")
        n, m = lam.shape[0], B.shape[0]
        if n < 1 or m < 1:
            raise StructuralError("n and m must be positive")
        if A.shape != (n, m):
            raise StructuralError(f"A must be {n}x{m}, got {A.shape}")
        if B.shape != (m, n):
            raise StructuralError(f"B must be {m}x{n}, got {B.shape}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.lam.shape[0]

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def theorem1_eligible(self):
        return self.m >= self.n and numerical_rank(self.B) == self.n

    def is_lotka_volterra(self, tol=0.0):
        return self.m == self.n and bool(np.max(np.abs(self.B - np.eye(self.n))) <= tol)

    def same_as(self, other, tol=0.0):
        return (
            self.lam.shape == other.lam.shape
            and self.B.shape == other.B.shape
            and np.allclose(self.lam, other.lam, rtol=0, atol=tol)
            and np.allclose(self.A, other.A, rtol=0, atol=tol)
            and np.allclose(self.B, other.B, rtol=0, atol=tol)
        )


@dataclass(frozen=True, eq=False)
class PoissonData:
    """Decomposition ``(K, L, D)``; ``D`` holds the diagonal of the m x m matrix.

    Construction only checks shapes, so that defective inputs (non-skew K,
    zero D entries) can still be loaded and reported on.
    """

    K: np.ndarray
    L: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        K = _frozen(self.K, 2, "K")
        L = _frozen(self.L, 1, "L")
        D = _frozen(self.D, 1, "D")
        n = K.shape[0]
        if K.shape != (n, n):
            raise StructuralError(f"K must be square, got {K.shape}")
        if L.shape != (n,):
            raise StructuralError(f"L must have length {n}, got {L.shape}")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "D", D)

    @property
    def n(self):
        return self.K.shape[0]

    @property
    def m(self):
        return self.D.shape[0]

    @property
    def rankK(self):
        return numerical_rank(self.K)

    @property
    def is_skew(self):
        return is_skew(self.K)

    @property
    def D_nonzero(self):
        return bool(np.all(self.D != 0.0))


@dataclass(frozen=True)
class StructureMatrixSpec:
    """Quadratic Poisson structure ``J_ij = K_ij x_i x_j``, represented by K alone."""

    K: np.ndarray

    def __post_init__(self):
        K = _frozen(self.K, 2, "K")
        if not is_skew(K):
            raise StructuralError("structure matrix K is not skew-symmetric")
        object.__setattr__(self, "K", K)

    def at(self, x):
        x = check_positive(x)
        return self.K * np.outer(x, x)


@dataclass(frozen=True, eq=False)
class QPFunctional:
    """``f(x) = sum_i c_i prod_k x_k**E_ik + sum_j l_j ln x_j + constant``."""

    coeffs: np.ndarray
    exponents: np.ndarray
    logcoeffs: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        c = _frozen(self.coeffs, 1, "coeffs")
        l = _frozen(self.logcoeffs, 1, "logcoeffs")
        E = np.array(self.exponents, dtype=float)
        if E.size == 0:
            E = np.zeros((c.shape[0], l.shape[0]))
        if E.ndim != 2 or E.shape != (c.shape[0], l.shape[0]):
            raise StructuralError(
                f"exponents must be {c.shape[0]}x{l.shape[0]}, got {E.shape}"
            )
        E.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "exponents", E)
        object.__setattr__(self, "logcoeffs", l)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def n(self):
        return self.logcoeffs.shape[0]

    def __call__(self, x):
        return evaluate_functional(self, x)

    def _point(self, x):
        x = check_positive(x)
        if x.shape[-1] != self.n:
            raise StructuralError(f"point has dimension {x.shape[-1]}, functional expects {self.n}")
        return x

    def add_log_terms(self, N):
        """Return ``f + sum_k N_k ln x_k``."""
        return QPFunctional(self.coeffs, self.exponents, self.logcoeffs + np.asarray(N, float),
                            self.constant)


def _power_products(x, E):
    # prod_k x_k**E_jk; powers rather than exp(E log x) keep unit and zero
    # exponents exact
    return np.prod(x[..., None, :] ** E, axis=-1)


def evaluate_monomials(sys, x):
    """Component j is ``prod_k x_k**B_jk``."""
    x = check_positive(x)
    if x.shape[-1] != sys.n:
        raise StructuralError(f"point has dimension {x.shape[-1]}, system has n={sys.n}")
    return _power_products(x, sys.B)


def evaluate_flow(sys, x):
    x = check_positive(x)
    return x * (sys.lam + evaluate_monomials(sys, x) @ sys.A.T)


def evaluate_functional(f, x):
    x = f._point(x)
    return _power_products(x, f.exponents) @ f.coeffs + np.log(x) @ f.logcoeffs + f.constant


def gradient_functional(f, x):
    x = f._point(x)
    mon = _power_products(x, f.exponents)
    return ((mon * f.coeffs) @ f.exponents + f.logcoeffs) / x


def hessian_functional(f, x):
    """Dense Hessian of ``f`` at a single point ``x``."""
    x = f._point(x)
    if x.ndim != 1:
        raise StructuralError("hessian_functional expects a single point")
    w = _power_products(x, f.exponents) * f.coeffs
    # d2/dx_j dx_k of prod x^E = E_j (E_k - delta_jk) prod x^E / (x_j x_k)
    H = (f.exponents.T * w) @ f.exponents
    H -= np.diag(w @ f.exponents + f.logcoeffs)
    return H / np.outer(x, x)


@dataclass(frozen=True)
class PoissonCheck:
    lambda_residual: float
    A_residual: float
    skew_defect: float
    eligible: bool
    D_nonzero: bool
    tol: float

    @property
    def ok(self):
        return (
            self.eligible
            and self.D_nonzero
            and self.lambda_residual <= self.tol
            and self.A_residual <= self.tol
            and self.skew_defect <= self.tol
        )

    def as_dict(self):
        return {
            "lambda_residual": self.lambda_residual,
            "A_residual": self.A_residual,
            "skew_defect": self.skew_defect,
            "theorem1_eligible": self.eligible,
            "D_nonzero": self.D_nonzero,
            "tol": self.tol,
            "valid": self.ok,
        }


def check_poisson_conditions(sys, pd, tol=config.POISSON_TOL):
    """Residuals of ``lambda = K L`` and ``A = K B^T D`` plus the skewness of K."""
    if pd.n != sys.n or pd.m != sys.m:
        raise StructuralError(
            f"decomposition has n={pd.n}, m={pd.m}; system has n={sys.n}, m={sys.m}"
        )
    lam_res = float(np.max(np.abs(sys.lam - pd.K @ pd.L)))
    A_res = float(np.max(np.abs(sys.A - (pd.K @ sys.B.T) * pd.D)))
    return PoissonCheck(
        lambda_residual=lam_res,
        A_residual=A_res,
        skew_defect=skew_defect(pd.K),
        eligible=sys.theorem1_eligible,
        D_nonzero=pd.D_nonzero,
        tol=tol,
    )


def hamiltonian_from_decomposition(sys, pd, tol=config.POISSON_TOL):
    report = check_poisson_conditions(sys, pd, tol)
    if not report.ok:
        raise DecompositionError(f"decomposition conditions fail: {report.as_dict()}", report)
    return QPFunctional(coeffs=pd.D, exponents=sys.B, logcoeffs=pd.L)


@dataclass
class RecoveryResult:
    pd: PoissonData | None
    reason: str = ""
    lambda_residual: float | None = None
    null_dim: int = 0
    notes: list = field(default_factory=list)


def _null_space(M, rtol=config.RANK_RTOL):
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n)
    _, s, Vh = np.linalg.svd(M)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(n)
    r = int(np.sum(s > rtol * s[0]))
    return Vh[r:].T


def _nowhere_zero(basis, rel=1e-8, rng=None):
    """Find a combination of the columns of ``basis`` with no zero component."""

    def good(v):
        scale = np.max(np.abs(v))
        return scale > 0 and np.all(np.abs(v) > rel * scale)

    k = basis.shape[1]
    for j in range(k):
        if good(basis[:, j]):
            return basis[:, j]
    head = min(k, 10)
    for signs in product((1.0, -1.0), repeat=head - 1):
        v = basis[:, :head] @ np.array((1.0,) + signs)
        if good(v):
            return v
    rng = rng or np.random.default_rng(0)
    for _ in range(50):
        v = basis @ rng.standard_normal(k)
        if good(v):
            return v
    return None


def attempt_recovery_lv(sys, tol=config.POISSON_TOL):
    """Recover ``(K, L, D)`` for a Lotka-Volterra system (B = identity).

    Solves ``A_ij d_j + A_ji d_i = 0`` for a nowhere-zero ``d`` and sets
    ``K_ij = A_ij d_j``, ``D_jj = 1/d_j``. The scale ambiguity
    ``K -> cK, D -> D/c, L -> L/c`` is fixed by ``max|d| = 1`` with the first
    component of ``d`` positive.
    """
    n = sys.n
    if sys.m != n or np.max(np.abs(sys.B - np.eye(n))) > tol:
        raise StructuralError("recover_decomposition_lv needs B = identity")
    A = sys.A
    diag = float(np.max(np.abs(np.diag(A))))
    if diag > tol:
        return RecoveryResult(None, f"nonzero diagonal of A (max {diag:.3g}) forces K_ii != 0")
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            row = np.zeros(n)
            row[j] += A[i, j]
            row[i] += A[j, i]
            rows.append(row)
    M = np.array(rows).reshape(-1, n)
    basis = _null_space(M)
    if basis.shape[1] == 0:
        return RecoveryResult(None, "the skewness equations for D admit only d = 0")
    d = _nowhere_zero(basis)
    if d is None:
        return RecoveryResult(
            None, "every solution of the skewness equations has a zero entry",
            null_dim=basis.shape[1],
        )
    d = d / np.max(np.abs(d))
    if d[0] < 0:
        d = -d
    K = A * d[None, :]
    K = 0.5 * (K - K.T)
    L, *_ = np.linalg.lstsq(K, sys.lam, rcond=None)
    res = float(np.max(np.abs(sys.lam - K @ L)))
    if res > tol:
        return RecoveryResult(
            None, f"lambda is not in range(K): residual {res:.3g}",
            lambda_residual=res, null_dim=basis.shape[1],
        )
    pd = PoissonData(K=K, L=L, D=1.0 / d)
    notes = []
    if basis.shape[1] > 1:
        notes.append(f"{basis.shape[1]}-dimensional family of admissible D; one representative chosen")
    return RecoveryResult(pd, "ok", lambda_residual=res, null_dim=basis.shape[1], notes=notes)


def recover_decomposition_lv(sys, tol=config.POISSON_TOL):
    """Return a :class:`PoissonData` for an LV system, or ``None`` when none exists."""
    result = attempt_recovery_lv(sys, tol)
    if result.pd is None:
        logger.info("decomposition recovery failed: %s", result.reason)
    return result.pd
