"""Reduction of QP systems to their Lotka-Volterra representative.

The pipeline is embedding (make the exponent matrix square), then a
quasimonomial transformation ``x_i = prod_k y_k**Gamma_ik`` with
``Gamma = B~^{-1}``, which turns the exponent matrix into the identity.
Every step is recorded so that points, functionals and decompositions can be
carried back and forth.

Direction convention: ``"forward"`` always points from the original system
towards the representative. For points this means ``ln y = Gamma^{-1} ln x``
under a QMT and appending ones under an embedding; for functionals it means
pulling back, ``f'(y) = f(x(y))``, so that
``f'(map_point(rec, x, "forward")) == f(x)``.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import config
from .core import (
    PoissonData,
    QPFunctional,
    QPSystem,
    attempt_recovery_lv,
    check_poisson_conditions,
    check_positive,
    numerical_rank,
)
from .errors import RefusalError, StructuralError

FORWARD = "forward"
INVERSE = "inverse"


def _check_direction(direction):
    if direction not in (FORWARD, INVERSE):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


@dataclass(frozen=True, eq=False)
class Embed:
    """Append ``added`` variables pinned at 1, with extra exponent columns ``Bprime``."""

    Bprime: np.ndarray
    n_in: int

    @property
    def added(self):
        return self.Bprime.shape[1]

    @property
    def dim_in(self):
        return self.n_in

    @property
    def dim_out(self):
        return self.n_in + self.added

    def point(self, x, direction):
        if direction == FORWARD:
            return np.concatenate([x, np.ones(self.added)])
        return x[: self.n_in].copy()

    def functional(self, f, direction):
        if direction == FORWARD:
            E = np.hstack([f.exponents, np.zeros((f.exponents.shape[0], self.added))])
            l = np.concatenate([f.logcoeffs, np.zeros(self.added)])
        else:
            E, l = f.exponents[:, : self.n_in], f.logcoeffs[: self.n_in]
        return QPFunctional(f.coeffs, E, l, f.constant)

    def poisson(self, pd, direction):
        if direction == FORWARD:
            K = np.zeros((self.dim_out, self.dim_out))
            K[: self.n_in, : self.n_in] = pd.K
            L = np.concatenate([pd.L, np.zeros(self.added)])
        else:
            K, L = pd.K[: self.n_in, : self.n_in], pd.L[: self.n_in]
        return PoissonData(K, L, pd.D)

    def to_dict(self):
        return {"type": "embed", "Bprime": self.Bprime.tolist(), "n_in": self.n_in}


@dataclass(frozen=True, eq=False)
class QMT:
    """Quasimonomial transformation ``x_i = prod_k y_k**Gamma_ik``."""

    Gamma: np.ndarray
    Gamma_inv: np.ndarray

    @classmethod
    def from_gamma(cls, Gamma):
        Gamma = np.array(Gamma, dtype=float)
        return cls(Gamma, _inverse(Gamma))

    @property
    def dim_in(self):
        return self.Gamma.shape[0]

    dim_out = dim_in

    def point(self, x, direction):
        if direction == FORWARD:
            return np.exp(self.Gamma_inv @ np.log(x))
        return np.exp(self.Gamma @ np.log(x))

    def functional(self, f, direction):
        G = self.Gamma if direction == FORWARD else self.Gamma_inv
        return QPFunctional(f.coeffs, f.exponents @ G, G.T @ f.logcoeffs, f.constant)

    def poisson(self, pd, direction):
        # K' = Gamma^{-1} K Gamma^{-T}, L' = Gamma^T L
        if direction == FORWARD:
            G, Gi = self.Gamma, self.Gamma_inv
        else:
            G, Gi = self.Gamma_inv, self.Gamma
        return PoissonData(Gi @ pd.K @ Gi.T, G.T @ pd.L, pd.D)

    def to_dict(self):
        return {"type": "qmt", "Gamma": self.Gamma.tolist()}


@dataclass(frozen=True)
class Decouple:
    """Keep the variables in ``keep``; the dropped ones are pinned at 1."""

    keep: tuple
    n_in: int

    @property
    def dim_in(self):
        return self.n_in

    @property
    def dim_out(self):
        return len(self.keep)

    @property
    def dropped(self):
        return tuple(i for i in range(self.n_in) if i not in self.keep)

    def point(self, x, direction):
        if direction == FORWARD:
            return x[list(self.keep)].copy()
        out = np.ones(self.n_in)
        out[list(self.keep)] = x
        return out

    def functional(self, f, direction):
        keep = list(self.keep)
        if direction == FORWARD:
            return QPFunctional(f.coeffs, f.exponents[:, keep], f.logcoeffs[keep], f.constant)
        E = np.zeros((f.exponents.shape[0], self.n_in))
        E[:, keep] = f.exponents
        l = np.zeros(self.n_in)
        l[keep] = f.logcoeffs
        return QPFunctional(f.coeffs, E, l, f.constant)

    def poisson(self, pd, direction):
        keep = list(self.keep)
        if direction == FORWARD:
            return PoissonData(pd.K[np.ix_(keep, keep)], pd.L[keep], pd.D)
        K = np.zeros((self.n_in, self.n_in))
        K[np.ix_(keep, keep)] = pd.K
        L = np.zeros(self.n_in)
        L[keep] = pd.L
        return PoissonData(K, L, pd.D)

    def to_dict(self):
        return {"type": "decouple", "keep": list(self.keep), "n_in": self.n_in}


@dataclass(frozen=True)
class TransformRecord:
    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        for a, b in zip(self.steps, self.steps[1:]):
            if a.dim_out != b.dim_in:
                raise StructuralError("consecutive transform steps have mismatched dimensions")

    @property
    def is_identity(self):
        return not self.steps

    def dims(self, direction):
        if not self.steps:
            return None, None
        if direction == FORWARD:
            return self.steps[0].dim_in, self.steps[-1].dim_out
        return self.steps[-1].dim_out, self.steps[0].dim_in

    def _ordered(self, direction):
        _check_direction(direction)
        return self.steps if direction == FORWARD else tuple(reversed(self.steps))

    def to_json(self):
        return [s.to_dict() for s in self.steps]

    @classmethod
    def from_json(cls, items):
        steps = []
        for item in items:
            kind = item.get("type")
            if kind == "qmt":
                steps.append(QMT.from_gamma(item["Gamma"]))
            elif kind == "embed":
                steps.append(Embed(np.array(item["Bprime"], dtype=float), int(item["n_in"])))
            elif kind == "decouple":
                steps.append(Decouple(tuple(int(i) for i in item["keep"]), int(item["n_in"])))
            else:
                raise StructuralError(f"unknown transform step type {kind!r}")
        return cls(tuple(steps))


def _inverse(Gamma):
    Gamma = np.asarray(Gamma, dtype=float)
    if Gamma.ndim != 2 or Gamma.shape[0] != Gamma.shape[1]:
        raise StructuralError(f"Gamma must be square, got {Gamma.shape}")
    # singular only at machine precision, so that the COND_WARN band between
    # 1/RANK_RTOL and 1/eps is reachable
    s = np.linalg.svd(Gamma, compute_uv=False)
    if s[-1] <= Gamma.shape[0] * np.finfo(float).eps * s[0]:
        raise StructuralError("Gamma is singular")
    cond = s[0] / s[-1]
    if cond > config.COND_WARN:
        warnings.warn(f"ill-conditioned QMT matrix (cond = {cond:.3g})", RuntimeWarning, stacklevel=3)
    lu = sla.lu_factor(Gamma)
    return sla.lu_solve(lu, np.eye(Gamma.shape[0]))


def map_point(rec, x, direction=FORWARD):
    x = check_positive(x)
    for step in rec._ordered(direction):
        expected = step.dim_in if direction == FORWARD else step.dim_out
        if x.shape != (expected,):
            raise StructuralError(f"point has dimension {x.shape}, step expects {expected}")
        x = step.point(x, direction)
    return x


def map_functional(rec, f, direction=FORWARD):
    for step in rec._ordered(direction):
        expected = step.dim_in if direction == FORWARD else step.dim_out
        if f.n != expected:
            raise StructuralError(f"functional has dimension {f.n}, step expects {expected}")
        f = step.functional(f, direction)
    return f


def map_poisson(rec, pd, direction=FORWARD):
    """Carry a decomposition through the record (D is unchanged by every step)."""
    for step in rec._ordered(direction):
        pd = step.poisson(pd, direction)
    return pd


def apply_qmt(sys, Gamma):
    """Transform ``sys`` under ``x = prod y**Gamma``: A' = Gamma^-1 A, B' = B Gamma, lambda' = Gamma^-1 lambda."""
    Gamma = np.asarray(Gamma, dtype=float)
    if Gamma.shape != (sys.n, sys.n):
        raise StructuralError(f"Gamma must be {sys.n}x{sys.n}, got {Gamma.shape}")
    Gi = _inverse(Gamma)
    if np.linalg.det(Gamma) < 0:
        warnings.warn("QMT with det(Gamma) < 0 reverses orientation", RuntimeWarning, stacklevel=2)
    return QPSystem(Gi @ sys.lam, Gi @ sys.A, sys.B @ Gamma)


def _seed():
    return int(os.environ.get(config.SEED_ENV, "0"))


def choose_embedding_columns(B):
    """Pick ``B'`` (m x (m-n)) so that ``det [B | B'] > 0``.

    Greedy completion by unit vectors maximizing the volume of the growing
    column set; a negative final determinant flips the last column. Random
    integer columns in {-2..2} are the fallback.
    """
    B = np.asarray(B, dtype=float)
    m, n = B.shape
    if numerical_rank(B) < n:
        raise StructuralError("rank(B) < n: no valid completion")
    if m == n:
        return np.zeros((m, 0))
    cols = []
    cur = B
    for _ in range(m - n):
        best, best_vol = None, 0.0
        for j in range(m):
            e = np.zeros((m, 1))
            e[j] = 1.0
            cand = np.hstack([cur, e])
            vol = float(np.prod(np.linalg.svd(cand, compute_uv=False)))
            if vol > best_vol * (1 + 1e-12):
                best, best_vol = e, vol
        if best is None:
            break
        cols.append(best)
        cur = np.hstack([cur, best])
    if len(cols) == m - n and numerical_rank(cur) == m:
        Bp = np.hstack(cols)
        if np.linalg.det(cur) < 0:
            Bp[:, -1] *= -1.0
        return Bp
    rng = np.random.default_rng(_seed())
    for _ in range(100):
        Bp = rng.integers(-2, 3, size=(m, m - n)).astype(float)
        det = np.linalg.det(np.hstack([B, Bp]))
        if abs(det) > 0 and numerical_rank(np.hstack([B, Bp])) == m:
            if det < 0:
                Bp[:, -1] *= -1.0
            return Bp
    raise StructuralError("could not complete B to a square matrix with positive determinant")


def embed(sys, Bprime):
    """Expanded m-dimensional system with the added variables pinned at 1."""
    n, m = sys.n, sys.m
    if m <= n:
        raise StructuralError("embedding needs m > n")
    Bprime = np.asarray(Bprime, dtype=float).reshape(m, m - n)
    Bt = np.hstack([sys.B, Bprime])
    if not np.linalg.det(Bt) > 0:
        raise StructuralError("invalid embedding choice: det [B | B'] must be > 0")
    At = np.vstack([sys.A, np.zeros((m - n, m))])
    lt = np.concatenate([sys.lam, np.zeros(m - n)])
    return QPSystem(lt, At, Bt)


def decouple(sys, keep, tol=0.0):
    """Restrict an embedding image to the variables in ``keep`` (or the first ``keep``)."""
    if isinstance(keep, (int, np.integer)):
        keep = tuple(range(int(keep)))
    keep = tuple(int(i) for i in keep)
    dropped = [i for i in range(sys.n) if i not in keep]
    if not keep or len(set(keep)) != len(keep) or max(keep) >= sys.n:
        raise StructuralError(f"invalid index set {keep}")
    if dropped:
        bad = max(np.max(np.abs(sys.lam[dropped])), np.max(np.abs(sys.A[dropped, :])))
        if bad > tol:
            raise RefusalError(
                "dropped variables are not constant: nonzero lambda or A rows "
                f"(max {bad:.3g}); not an embedding image"
            )
    return QPSystem(sys.lam[list(keep)], sys.A[list(keep), :], sys.B[:, list(keep)])


def to_lotka_volterra(sys, pd=None):
    """Return ``(lv, record, pd_lv)`` with ``lv.B`` the identity.

    ``pd_lv`` carries the same D and the transformed K, L so that
    ``A_lv = K_lv D`` and ``lambda_lv = K_lv L_lv``.
    """
    if not sys.theorem1_eligible:
        raise StructuralError("system is rank deficient (rank(B) < n or m < n)")
    if sys.is_lotka_volterra():
        return sys, TransformRecord(()), pd
    steps = []
    cur = sys
    if sys.m > sys.n:
        Bp = choose_embedding_columns(sys.B)
        cur = embed(sys, Bp)
        steps.append(Embed(Bp, sys.n))
    Bt = cur.B
    # Gamma = B~^{-1}; the forward point map needs Gamma^{-1} = B~ exactly.
    step = QMT(_inverse(Bt), Bt.copy())
    steps.append(step)
    lv = QPSystem(Bt @ cur.lam, Bt @ cur.A, np.eye(sys.m))
    rec = TransformRecord(tuple(steps))
    pd_lv = map_poisson(rec, pd, FORWARD) if pd is not None else None
    return lv, rec, pd_lv


def recover_decomposition(sys, tol=config.POISSON_TOL):
    """Recover ``(K, L, D)`` for any rank-n system via its LV representative.

    Returns the :class:`~qppstab.core.RecoveryResult` with ``pd`` expressed in
    the original coordinates.
    """
    if sys.is_lotka_volterra(tol):
        return attempt_recovery_lv(sys, tol)
    lv, rec, _ = to_lotka_volterra(sys)
    res = attempt_recovery_lv(lv, tol)
    if res.pd is None:
        return res
    back = map_poisson(rec, res.pd, INVERSE)
    K = 0.5 * (back.K - back.K.T)
    pd = PoissonData(K, back.L, back.D)
    check = check_poisson_conditions(sys, pd, tol)
    if not check.ok:
        res.pd = None
        res.reason = f"decomposition of the representative does not map back: {check.as_dict()}"
        return res
    res.pd = pd
    return res
