"""Numerical verification: conservative integration, linearization, small oscillations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np

from . import config
from .core import check_positive, evaluate_flow, evaluate_functional, evaluate_monomials
from .errors import DivergenceError, DomainError, NotFixedPointError, RefusalError, StructuralError
from .stability import kernel_basis


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of an integration; ``logs`` keeps the integrator state ``ln x``."""

    times: np.ndarray
    states: np.ndarray
    step: float
    logs: np.ndarray | None = None

    def __len__(self):
        return self.times.shape[0]

    @property
    def n(self):
        return self.states.shape[1]


@numba.njit(cache=True)
def _rk4(lam, A, B, y, h, nsteps, out):
    """Classical RK4 on ``y' = lam + A exp(B y)``, writing states into ``out``.

    Returns the number of steps completed before a non-finite value appeared.
    The update uses compensated summation so roundoff does not mask the
    fourth-order truncation error over long runs.
    """
    comp = np.zeros_like(y)
    out[0] = y
    h2 = 0.5 * h
    h6 = h / 6.0
    for i in range(1, nsteps + 1):
        k1 = lam + A @ np.exp(B @ y)
        k2 = lam + A @ np.exp(B @ (y + h2 * k1))
        k3 = lam + A @ np.exp(B @ (y + h2 * k2))
        k4 = lam + A @ np.exp(B @ (y + h * k3))
        inc = h6 * (k1 + 2.0 * (k2 + k3) + k4) - comp
        new = y + inc
        comp = (new - y) - inc
        for v in new:
            if not np.isfinite(v) or abs(v) > 700.0:
                return i - 1
        y = new
        out[i] = y
    return nsteps


def integrate(sys, x0, t_end=config.T_END, step=config.STEP):
    """Fixed-step RK4 in ``y = ln x``; returned states are ``exp(y)``.

    The final time is the first grid point ``>= t_end``. On overflow a
    :class:`DivergenceError` carries the valid prefix.
    """
    x0 = check_positive(x0, "x0")
    if x0.shape != (sys.n,):
        raise StructuralError(f"x0 must have dimension {sys.n}")
    if not step > 0 or not t_end > 0:
        raise DomainError("step and t_end must be positive")
    nsteps = int(math.ceil(t_end / step - 1e-9))
    ys = np.empty((nsteps + 1, sys.n))
    c = np.ascontiguousarray
    done = _rk4(c(sys.lam), c(sys.A), c(sys.B), np.log(x0), float(step), nsteps, ys)
    times = step * np.arange(done + 1)
    if done < nsteps:
        traj = Trajectory(times, np.exp(ys[: done + 1]), step, ys[: done + 1])
        raise DivergenceError(
            f"integration diverged at t = {times[-1]:.6g}", last_state=traj.states[-1], trajectory=traj
        )
    return Trajectory(times, np.exp(ys), step, ys)


@dataclass(frozen=True)
class Drift:
    absolute: float
    relative: float


def functional_series(traj, f):
    """``f`` along the trajectory, evaluated in extended precision from ``ln x``.

    Evaluating in float64 would put a floor of a few ulps of ``|f|`` under
    every drift measurement, hiding the integrator's convergence order.
    """
    if traj.logs is None:
        return evaluate_functional(f, traj.states)
    y = traj.logs.astype(np.longdouble)
    E = f.exponents.astype(np.longdouble)
    val = np.exp(y @ E.T) @ f.coeffs.astype(np.longdouble)
    val = val + y @ f.logcoeffs.astype(np.longdouble) + np.longdouble(f.constant)
    return val


def functional_drift(traj, f):
    """Max ``|f(x(t)) - f(x(0))|`` over stored samples, and that over ``|f(x(0))|``."""
    if len(traj) == 0:
        raise StructuralError("empty trajectory")
    v = functional_series(traj, f)
    a = float(np.max(np.abs(v - v[0])))
    v0 = abs(float(v[0]))
    return Drift(a, a / v0 if v0 != 0 else a)


def jacobian(sys, x):
    """Analytic Jacobian of the flow at ``x``."""
    x = check_positive(x)
    m = evaluate_monomials(sys, x)
    J = (sys.A * m) @ sys.B * (x[:, None] / x[None, :])
    J[np.diag_indices_from(J)] += sys.lam + sys.A @ m
    return J


def spectrum_at(sys, x0, tol=config.FIXED_POINT_TOL):
    x0 = check_positive(x0, "x0")
    flow = float(np.linalg.norm(evaluate_flow(sys, x0)))
    if flow > tol:
        raise NotFixedPointError(f"x0 is not a fixed point (|flow| = {flow:.3g})")
    return np.linalg.eigvals(jacobian(sys, x0))


def phase_shift(rho, phi):
    """Predator-prey phase shift ``pi/2 + atan(rho tan phi) - atan(tan phi / rho)``."""
    if not rho > 0:
        raise DomainError("rho must be positive")
    if not -math.pi / 2 < phi < math.pi / 2 or math.cos(phi) == 0.0:
        raise DomainError("phi must lie strictly inside (-pi/2, pi/2)")
    t = math.tan(phi)
    # difference first so that rho = 1 gives pi/2 exactly
    return math.pi / 2 + (math.atan(rho * t) - math.atan(t / rho))


@dataclass(frozen=True)
class OscillationAnalysis:
    mu1: float
    mu2: float
    mu: float
    lambda1: float
    lambda2: float
    phi: float
    rho: float
    omega: float
    Phi: float
    lag: float

    @property
    def period(self):
        return 2.0 * math.pi / self.omega

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"period": self.period}


def oscillation_analysis(sys, pd, x0, tol=config.FIXED_POINT_TOL):
    """Small-oscillation frequency, principal axes and phase shift of a 2-D symplectic QPP center.

    In ``y = ln x`` the flow is ``y' = K grad_y H``. Near ``y0`` write
    ``H ~ mu1 e1^2 + mu2 e2^2 + 2 mu e1 e2``; a rotation by ``phi`` with
    ``tan 2 phi = 2 mu / (mu1 - mu2)`` diagonalizes it to
    ``lambda1 xi1^2 + lambda2 xi2^2`` and, with ``K = [[0, k], [-k, 0]]``,
    ``omega = 2 |k| sqrt(lambda1 lambda2)``.

    ``lag`` is the phase by which component 2 trails component 1, in
    ``[0, 2 pi)``: ``Phi`` when ``sign(k) sign(lambda2) < 0``, else
    ``2 pi - Phi``.
    """
    if not (sys.n == sys.m == 2):
        raise StructuralError("oscillation_analysis needs n = m = 2")
    if kernel_basis(pd.K):
        raise StructuralError("ker K is nontrivial; the flow is not symplectic")
    x0 = check_positive(x0, "x0")
    flow = float(np.linalg.norm(evaluate_flow(sys, x0)))
    if flow > tol:
        raise NotFixedPointError(f"x0 is not a fixed point (|flow| = {flow:.3g})")
    m = evaluate_monomials(sys, x0)
    hess = (sys.B.T * (pd.D * m)) @ sys.B
    mu1, mu2, mu = 0.5 * hess[0, 0], 0.5 * hess[1, 1], 0.5 * hess[0, 1]
    if mu1 == mu2:
        phi = 0.0 if mu == 0 else math.copysign(math.pi / 4, mu)
    else:
        phi = 0.5 * math.atan(2 * mu / (mu1 - mu2))
    c, s = math.cos(phi), math.sin(phi)
    lam1 = mu1 * c * c + 2 * mu * s * c + mu2 * s * s
    lam2 = mu1 * s * s - 2 * mu * s * c + mu2 * c * c
    if lam1 * lam2 <= 0:
        raise RefusalError("Hessian of H at x0 is not definite; x0 is not a center")
    k = float(pd.K[0, 1])
    rho = math.sqrt(lam1 / lam2)
    omega = 2.0 * abs(k) * math.sqrt(lam1 * lam2)
    Phi = phase_shift(rho, phi)
    lag = Phi if k * lam2 < 0 else 2 * math.pi - Phi
    return OscillationAnalysis(mu1, mu2, mu, lam1, lam2, phi, rho, omega, Phi, lag)


def _maxima(t, v):
    i = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1
    a, b, c = v[i - 1], v[i], v[i + 1]
    denom = a - 2 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(denom != 0, 0.5 * (a - c) / denom, 0.0)
    dt = t[1] - t[0]
    return t[i] + off * dt


def measure_period_and_phase(traj, components=(0, 1)):
    """Period from successive maxima of the first component; lag of the second.

    Maxima are refined by a parabola through three samples. The lag is
    ``2 pi * (t2 - t1) / period`` for the first maximum ``t2`` of the second
    component following each maximum ``t1`` of the first, averaged on the
    circle.
    """
    i, j = components
    logs = np.log(traj.states)
    for c in (i, j):
        if np.ptp(logs[:, c]) <= 1e-9:
            raise RefusalError(f"component {c + 1} does not oscillate")
    t1 = _maxima(traj.times, logs[:, i])
    t2 = _maxima(traj.times, logs[:, j])
    if len(t1) < 3 or len(t2) < 3:
        raise RefusalError("need at least three maxima per component")
    period = float(np.mean(np.diff(t1)))
    angles = []
    for t in t1:
        later = t2[t2 >= t]
        if later.size:
            angles.append(2 * math.pi * ((later[0] - t) % period) / period)
    ang = np.array(angles)
    lag = math.atan2(np.mean(np.sin(ang)), np.mean(np.cos(ang))) % (2 * math.pi)
    return period, lag


def write_trajectory_csv(fh, traj, functionals=None):
    """CSV ``t,x1,...,xn`` plus one ``drift_<name>`` column per functional, 17 significant digits."""
    functionals = functionals or {}
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t"] + [f"x{k + 1}" for k in range(traj.n)] + [f"drift_{k}" for k in functionals])
    cols = [traj.times[:, None], traj.states]
    for f in functionals.values():
        v = functional_series(traj, f)
        cols.append((v - v[0]).astype(float)[:, None])
    data = np.hstack(cols)
    for row in data:
        writer.writerow([format(v, ".17g") for v in row])
