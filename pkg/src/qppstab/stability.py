"""Energy-Casimir stability analysis of QPP equilibria.

For a QPP system whose D is definite, every interior fixed point is stable,
and on the Lotka-Volterra representative the functional

    H_C = sum_j D_j x_j + (L_j + N_j) ln x_j,   N in ker(K)

with ``N = -L - D x0`` has a critical point at ``x0`` and diagonal Hessian
``D_j / x0_j``. Mapping ``H_C`` back through the reduction gives a Lyapunov
functional ``H + sum_k N_k ln x_k`` on the original system.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import config
from .core import (
    QPFunctional,
    check_positive,
    evaluate_flow,
    hamiltonian_from_decomposition,
)
from .errors import DomainError, NotFixedPointError, NotInKernelError, StructuralError
from .transforms import FORWARD, INVERSE, map_functional, map_point, to_lotka_volterra


class Verdict(str, enum.Enum):
    STABLE = "StableByTheorem2"
    INCONCLUSIVE = "Inconclusive"


class DSign(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    INDEFINITE = "indefinite"


@dataclass
class StabilityReport:
    verdict: Verdict
    d_sign: DSign
    lyapunov: QPFunctional | None = None
    hessian_diag: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def stable(self):
        return self.verdict is Verdict.STABLE

    def to_dict(self):
        from .io import functional_to_dict

        return {
            "verdict": self.verdict.value,
            "d_sign": self.d_sign.value,
            "lyapunov": functional_to_dict(self.lyapunov) if self.lyapunov is not None else None,
            "hessian_diag": None if self.hessian_diag is None else np.asarray(self.hessian_diag).tolist(),
            "notes": list(self.notes),
        }


def kernel_basis(K, tol=config.RANK_RTOL):
    """Orthonormal basis of the numerical null space of K (list of vectors)."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    n = K.shape[1]
    _, s, Vh = np.linalg.svd(K)
    if s.size == 0 or s[0] == 0.0:
        return [row for row in np.eye(n)]
    r = int(np.sum(s > tol * s[0]))
    return [Vh[i].copy() for i in range(r, n)]


def normalize_direction(v, rel=1e-12):
    """Scale ``v`` to max-abs 1 with its first significant entry positive."""
    v = np.asarray(v, dtype=float)
    scale = np.max(np.abs(v))
    if scale == 0:
        return v.copy()
    v = v / scale
    v[np.abs(v) <= rel] = 0.0
    first = v[np.flatnonzero(v)[0]]
    return v if first > 0 else -v


def casimir_vectors(K, tol=config.RANK_RTOL):
    """Kernel of K as readable integer-like directions (for 1-D kernels exact)."""
    basis = kernel_basis(K, tol)
    if len(basis) == 1:
        return [normalize_direction(basis[0])]
    return basis


def casimirs(pd, tol=config.RANK_RTOL):
    """Log-only functionals ``C = sum_j N_j ln x_j`` with ``N`` spanning ker(K)."""
    n = pd.n
    return [
        QPFunctional(np.zeros(0), np.zeros((0, n)), N)
        for N in casimir_vectors(pd.K, tol)
    ]


@dataclass(frozen=True, eq=False)
class FixedPointFamily:
    """Fixed points ``x0(N) = -D^{-1} (L - N)`` with ``N = sum kappa_i basis_i``."""

    base: np.ndarray
    kernel_basis: tuple
    Dinv: np.ndarray

    @property
    def dimension(self):
        return len(self.kernel_basis)

    def _N(self, kappa):
        kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
        if kappa.shape != (self.dimension,):
            raise StructuralError(f"family has {self.dimension} parameters, got {kappa.shape[0]}")
        if not self.dimension:
            return np.zeros_like(self.base)
        return np.array(self.kernel_basis).T @ kappa

    def member(self, kappa=()):
        return self.base + self.Dinv * self._N(kappa)

    def is_interior(self, kappa=()):
        return bool(np.all(self.member(kappa) > 0))

    def kappa_of(self, x0):
        """Least-squares family coordinates of ``x0``."""
        if not self.dimension:
            return np.zeros(0)
        M = np.array(self.kernel_basis).T * self.Dinv[:, None]
        kappa, *_ = np.linalg.lstsq(M, np.asarray(x0, float) - self.base, rcond=None)
        return kappa

    def describe(self):
        return {
            "base": self.base.tolist(),
            "directions": [(self.Dinv * v).tolist() for v in self.kernel_basis],
            "dimension": self.dimension,
            "base_interior": bool(np.all(self.base > 0)),
        }


def fixed_point_family(pd, tol=config.RANK_RTOL):
    if not pd.D_nonzero:
        raise StructuralError("D has a zero entry")
    if pd.n != pd.m:
        raise StructuralError("fixed_point_family needs the decomposition of an LV representative")
    Dinv = 1.0 / pd.D
    return FixedPointFamily(-Dinv * pd.L, tuple(casimir_vectors(pd.K, tol)), Dinv)


def d_sign(D, zero_tol=config.ZERO_TOL):
    D = np.asarray(D, dtype=float)
    if np.all(D > zero_tol):
        return DSign.POSITIVE
    if np.all(D < -zero_tol):
        return DSign.NEGATIVE
    return DSign.INDEFINITE


def theorem2_verdict(pd, sys=None):
    """Stability verdict from the sign pattern of D (without a Lyapunov functional)."""
    if not pd.D_nonzero:
        raise StructuralError("D has a zero entry; not a valid decomposition")
    sign = d_sign(pd.D)
    notes = []
    if sys is not None:
        if sys.m > sys.n:
            notes.append("hypothesis m > n holds")
        elif sys.m == sys.n:
            det = float(np.linalg.det(sys.B))
            if det > 0:
                notes.append("hypothesis m = n with |B| > 0 holds")
            else:
                notes.append(f"hypothesis violated: m = n but |B| = {det:.6g} <= 0")
        else:
            notes.append("hypothesis violated: m < n")
    if sign is DSign.INDEFINITE:
        notes.append("D is not definite; the energy-Casimir criterion does not apply")
        return StabilityReport(Verdict.INCONCLUSIVE, sign, notes=notes)
    notes.append(f"D is {sign.value} definite: every interior fixed point is stable")
    return StabilityReport(Verdict.STABLE, sign, notes=notes)


def sign_vector(pd, x0):
    """``L - N0 = -D x0`` for the family member ``x0``."""
    return -pd.D * np.asarray(x0, dtype=float)


def sign_certifies(pd, x0):
    v = sign_vector(pd, x0)
    return bool(np.all(v > 0) or np.all(v < 0))


def _lv_flow(pd, x0):
    # On the LV representative lambda = K L and A = K D.
    return x0 * (pd.K @ pd.L + pd.K @ (pd.D * x0))


def lyapunov_for_point(pd, x0, tol=config.FIXED_POINT_TOL):
    """Energy-Casimir functional of the LV representative at the fixed point ``x0``.

    Returns ``(H_C, hessian_diag)``. Raises :class:`NotInKernelError` when
    ``N = -L - D x0`` is not in ker(K) and :class:`NotFixedPointError` when the
    flow at ``x0`` exceeds ``tol``.
    """
    x0 = check_positive(x0, "x0")
    if x0.shape != (pd.m,) or pd.n != pd.m:
        raise StructuralError("x0 must be a point of the LV representative")
    N = -pd.L - pd.D * x0
    KN = float(np.linalg.norm(pd.K @ N))
    bound = config.KERNEL_RTOL * (1.0 + np.linalg.norm(pd.K, 2) * np.linalg.norm(N))
    if KN > bound:
        raise NotInKernelError(
            f"N = -L - D x0 is not in ker(K) (|K N| = {KN:.3g} > {bound:.3g}); "
            "no energy-Casimir certificate of this form exists at x0"
        )
    flow = float(np.linalg.norm(_lv_flow(pd, x0)))
    if flow > tol:
        raise NotFixedPointError(f"x0 is not a fixed point (|flow| = {flow:.3g} > {tol:.3g})")
    H_C = QPFunctional(coeffs=pd.D, exponents=np.eye(pd.m), logcoeffs=pd.L + N)
    return H_C, pd.D / x0


def lyapunov_original_coordinates(sys, pd, x0, tol=config.FIXED_POINT_TOL):
    """Lyapunov functional ``H + sum N_k ln x_k`` for the fixed point ``x0`` of ``sys``."""
    H = hamiltonian_from_decomposition(sys, pd)
    x0 = check_positive(x0, "x0")
    if x0.shape != (sys.n,):
        raise StructuralError(f"x0 must have dimension {sys.n}")
    flow = float(np.linalg.norm(evaluate_flow(sys, x0)))
    if flow > tol:
        raise NotFixedPointError(f"x0 is not a fixed point (|flow| = {flow:.3g} > {tol:.3g})")
    lv, rec, pd_lv = to_lotka_volterra(sys, pd)
    y0 = map_point(rec, x0, FORWARD)
    # Log-rates transform linearly by B~, so scale the tolerance accordingly.
    scale = 1.0
    if not rec.is_identity:
        scale = (1.0 + np.linalg.norm(rec.steps[-1].Gamma_inv, 2)) * max(1.0, y0.max()) / min(1.0, x0.min())
    H_C_lv, _ = lyapunov_for_point(pd_lv, y0, tol * scale)
    H_C = map_functional(rec, H_C_lv, INVERSE)
    # Exponents coincide with B by construction; pin them exactly.
    return QPFunctional(H.coeffs, H.exponents, H_C.logcoeffs, H_C.constant)


def casimir_coefficients(H_C, H):
    """``N`` such that ``H_C = H + sum N_k ln x_k``."""
    return H_C.logcoeffs - H.logcoeffs


def kappa_coordinates(N, K, tol=config.RANK_RTOL):
    """Coefficients of ``N`` in the Casimir directions of :func:`casimir_vectors`."""
    vecs = casimir_vectors(K, tol)
    if not vecs:
        return np.zeros(0)
    kappa, *_ = np.linalg.lstsq(np.array(vecs).T, np.asarray(N, float), rcond=None)
    return kappa


SYM_CLASSES = (
    "negative definite",
    "negative semidefinite",
    "zero",
    "indefinite",
    "positive semidefinite",
    "positive definite",
)


def symmetrized_form(A, Dbar):
    """``M = diag(Dbar) A + A^T diag(Dbar)`` and its definiteness class."""
    A = np.asarray(A, dtype=float)
    Dbar = np.asarray(Dbar, dtype=float)
    if np.any(Dbar <= 0):
        raise DomainError("Dbar entries must be positive")
    M = Dbar[:, None] * A + A.T * Dbar[None, :]
    scale = 1.0 + float(np.max(np.abs(A))) * float(np.max(Dbar))
    if float(np.max(np.abs(M))) <= config.ZERO_TOL * scale:
        return M, "zero"
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))
    thr = config.EIG_RTOL * np.max(np.abs(ev))
    pos, neg = np.any(ev > thr), np.any(ev < -thr)
    zero = np.any(np.abs(ev) <= thr)
    if pos and neg:
        return M, "indefinite"
    if neg:
        return M, "negative semidefinite" if zero else "negative definite"
    return M, "positive semidefinite" if zero else "positive definite"


def volterra_functional(x0, d):
    """``V = sum d_i (x_i - x0_i - x0_i ln(x_i / x0_i))``; zero at ``x0``, positive elsewhere."""
    x0 = check_positive(x0, "x0")
    d = check_positive(d, "d")
    if x0.shape != d.shape:
        raise StructuralError("x0 and d must have the same length")
    const = -float(np.sum(d * x0 * (1.0 - np.log(x0))))
    return QPFunctional(coeffs=d, exponents=np.eye(x0.shape[0]), logcoeffs=-d * x0, constant=const)


def find_fixed_points(sys, per_axis=7, lo=1e-3, hi=1e3, tol=1e-12, max_iter=100, starts=None,
                      seed=0):
    """Interior fixed points by damped Newton on ``lambda + A exp(B y) = 0``, ``y = ln x``.

    Starts from a log-uniform grid over ``[lo, hi]^n`` (random log-uniform
    samples when the grid would exceed 400 points). Returns distinct roots
    sorted lexicographically.
    """
    n = sys.n
    if starts is None:
        axis = np.linspace(np.log(lo), np.log(hi), per_axis)
        if per_axis ** n <= 400:
            starts = [np.array(p) for p in product(axis, repeat=n)]
        else:
            rng = np.random.default_rng(seed)
            starts = list(rng.uniform(np.log(lo), np.log(hi), size=(400, n)))
    else:
        starts = [np.log(check_positive(s)) for s in starts]
    scale = 1.0 + np.max(np.abs(sys.lam)) + np.max(np.abs(sys.A))

    def residual(y):
        z = sys.B @ y
        if np.max(z) > 700:
            return None, None
        m = np.exp(z)
        return sys.lam + sys.A @ m, m

    roots = []
    for y in starts:
        F, m = residual(y)
        if F is None:
            continue
        fn = np.max(np.abs(F))
        for _ in range(max_iter):
            if fn <= tol * scale:
                break
            J = (sys.A * m) @ sys.B
            step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            big = np.max(np.abs(step))
            if big > 2.0:
                step *= 2.0 / big
            t = 1.0
            for _ in range(40):
                Fn, mn = residual(y + t * step)
                if Fn is not None and np.max(np.abs(Fn)) < fn:
                    break
                t *= 0.5
            else:
                break
            y = y + t * step
            F, m = Fn, mn
            fn = np.max(np.abs(F))
        if fn <= tol * scale and np.all(np.isfinite(y)):
            if not any(np.max(np.abs(y - r)) <= 1e-6 for r in roots):
                roots.append(y)
    pts = sorted((np.exp(r) for r in roots), key=tuple)
    return pts
