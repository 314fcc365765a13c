"""Reproduction checks over the bundled corpus.

Each ``check_*`` returns a :class:`CheckResult`; :func:`run_all` runs them in
order. Tolerances are fixed here and reported with every result.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import config, corpus
from .core import (
    PoissonData,
    QPSystem,
    check_poisson_conditions,
    evaluate_flow,
    gradient_functional,
    hamiltonian_from_decomposition,
    recover_decomposition_lv,
)
from .errors import NotInKernelError
from .io import load_system
from .simulate import (
    functional_drift,
    integrate,
    measure_period_and_phase,
    phase_shift,
    spectrum_at,
)
from .stability import (
    casimir_vectors,
    casimirs,
    find_fixed_points,
    fixed_point_family,
    kappa_coordinates,
    kernel_basis,
    sign_vector,
    lyapunov_for_point,
    lyapunov_original_coordinates,
    symmetrized_form,
    theorem2_verdict,
)
from .transforms import FORWARD, INVERSE, decouple, embed, map_point, to_lotka_volterra


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name} ({self.seconds:.2f} s)"


def _timed(name, fn, *args):
    t0 = time.perf_counter()
    passed, details = fn(*args)
    return CheckResult(name, bool(passed), details, time.perf_counter() - t0)


def _systems(directory=None):
    if directory is None:
        return corpus.bundled()
    return {k: load_system(os.path.join(directory, k + ".json")) for k in corpus.bundled()}


def _volterra(sys, pd):
    t0 = time.perf_counter()
    d = {}
    d["residuals"] = check_poisson_conditions(sys, pd).as_dict()
    rep = theorem2_verdict(pd, sys)
    d["verdict"], d["d_sign"] = rep.verdict.value, rep.d_sign.value
    fam = fixed_point_family(pd)
    x0 = fam.member()
    d["fixed_point"] = x0.tolist()
    H = hamiltonian_from_decomposition(sys, pd)
    f = lyapunov_original_coordinates(sys, pd, x0)
    _, hess = lyapunov_for_point(pd, x0)
    d["hessian_diag"] = hess.tolist()
    ok = (
        d["residuals"]["lambda_residual"] == 0.0
        and d["residuals"]["A_residual"] == 0.0
        and d["residuals"]["valid"]
        and rep.stable
        and rep.d_sign.value == "negative"
        and fam.dimension == 0
        and np.array_equal(x0, [1.0, 1.0])
        and np.array_equal(H.coeffs, [-1.0, -1.0])
        and np.array_equal(H.exponents, np.eye(2))
        and np.array_equal(H.logcoeffs, [1.0, 1.0])
        and np.array_equal(f.logcoeffs, H.logcoeffs)
        and np.array_equal(hess, [-1.0, -1.0])
    )
    d["runtime"] = time.perf_counter() - t0
    return ok and d["runtime"] < 1.0, d


def check_volterra(systems):
    """Volterra predator-prey: negative definite D, fixed point (1,1), H is the Lyapunov functional."""
    return _timed("1 Volterra predator-prey reproduction", _volterra, *systems["volterra2d"])


def _three_species(sys, pd):
    t0 = time.perf_counter()
    a = b = c = -1.0
    conds = corpus.nutku_conditions(a, b, c, 1.0, 1.0, -2.0)
    d = {"conditions": conds, "residuals": check_poisson_conditions(sys, pd).as_dict()}
    ker = kernel_basis(pd.K)
    ones = np.ones(3) / math.sqrt(3)
    d["kernel"] = [v.tolist() for v in ker]
    ker_ok = len(ker) == 1 and abs(abs(ker[0] @ ones) - 1.0) <= 1e-12
    C = casimirs(pd)
    closed_C = np.array([a * b, -b, 1.0])
    casimir_ok = len(C) == 1 and np.allclose(C[0].logcoeffs, closed_C / np.max(np.abs(closed_C)),
                                             rtol=0, atol=1e-12)
    fam = fixed_point_family(pd)
    kappas = [-1.0, 0.0, 0.5, 1.0, 2.0, 10.0]
    fam_ok = all(np.allclose(fam.member(k), [k, 2 + k, 1 + k], rtol=0, atol=1e-12) for k in kappas)
    rep = theorem2_verdict(pd, sys)
    stable_all = rep.stable and all(
        fam.is_interior(k) and np.all(lyapunov_for_point(pd, fam.member(k))[1] > 0)
        for k in (1e-3, 0.5, 1.0, 7.0)
    )
    x0 = np.array([1.0, 3.0, 2.0])
    H = hamiltonian_from_decomposition(sys, pd)
    f = lyapunov_original_coordinates(sys, pd, x0)
    N = f.logcoeffs - H.logcoeffs
    kappa = kappa_coordinates(N, pd.K)
    grad = float(np.linalg.norm(gradient_functional(f, x0)))
    _, hess = lyapunov_for_point(pd, x0)
    d.update(kappa=kappa.tolist(), gradient_norm=grad, hessian_diag=hess.tolist(),
             verdict=rep.verdict.value)
    ok = (
        abs(conds["abc_plus_one"]) <= 1e-15
        and abs(conds["nu_residual"]) <= 1e-15
        and d["residuals"]["valid"]
        and ker_ok and casimir_ok and fam_ok and stable_all
        and np.allclose(kappa, [-1.0], rtol=0, atol=1e-12)
        and np.allclose(f.logcoeffs, [-1.0, -3.0, -2.0], rtol=0, atol=1e-12)
        and grad <= 1e-10
        and np.allclose(hess, [1.0, 1 / 3, 1 / 2], rtol=0, atol=1e-12)
    )
    d.update(kernel_ok=ker_ok, casimir_ok=casimir_ok, family_ok=fam_ok, stable_for_positive_kappa=stable_all)
    d["runtime"] = time.perf_counter() - t0
    return ok and d["runtime"] < 1.0, d


def check_three_species(systems):
    """Nutku system: Casimir, fixed-point family and H_C at (1,3,2)."""
    return _timed("2 three-species family reproduction", _three_species, *systems["nutku3d"])


def _conservation(systems, step):
    d = {}
    ok = True
    runs = [
        ("volterra2d", systems["volterra2d"], [2.0, 1.0], True),
        ("nutku3d", systems["nutku3d"], [1.5, 3.5, 2.5], False),
        ("nutku3d_off_family", systems["nutku3d"], [1.0, 3.5, 2.5], True),
    ]
    for name, (sys, pd), x0, order in runs:
        H = hamiltonian_from_decomposition(sys, pd)
        Cs = casimirs(pd)
        t0 = time.perf_counter()
        tr = integrate(sys, x0, 100.0, step)
        elapsed = time.perf_counter() - t0
        dH = functional_drift(tr, H)
        dC = [functional_drift(tr, C).absolute for C in Cs]
        entry = {"H_relative_drift": dH.relative, "casimir_drift": dC, "seconds": elapsed}
        run_ok = dH.relative <= 1e-7 and all(c <= 1e-7 for c in dC) and elapsed < 10.0
        if order:
            t0 = time.perf_counter()
            half = integrate(sys, x0, 100.0, step / 2)
            elapsed_half = time.perf_counter() - t0
            dH2 = functional_drift(half, H)
            ratio = dH.absolute / dH2.absolute if dH2.absolute > 0 else math.inf
            entry.update(half_step_drift=dH2.relative, improvement=ratio, seconds_half=elapsed_half)
            run_ok = run_ok and ratio >= 8.0 and elapsed_half < 10.0
        entry["passed"] = run_ok
        d[name] = entry
        ok = ok and run_ok
    return ok, d


def check_conservation(systems, step=config.STEP):
    """RK4 drift of H and Casimirs over t in [0, 100]; fourth-order step halving."""
    return _timed("3 conservation", _conservation, systems, step)


def _spectral(systems):
    d = {"points": []}
    worst = 0.0
    tested = []
    sys, pd = systems["volterra2d"]
    tested.append(("volterra2d", sys, pd, np.array([1.0, 1.0])))
    for key in ("example2", "example3"):
        sys, pd = systems[key]
        for x0 in find_fixed_points(sys):
            tested.append((key, sys, pd, x0))
    sys, pd = corpus.power_volterra(1.0, 0.0)
    tested.append(("power_volterra", sys, pd, np.array([math.sqrt(0.5), 1.0])))
    sys, pd = systems["nutku3d"]
    fam = fixed_point_family(pd)
    for k in (0.25, 1.0, 2.0, 5.0):
        tested.append((f"nutku3d kappa={k}", sys, pd, fam.member(k)))
    zero_modes_ok = True
    for name, sys, pd, x0 in tested:
        if not theorem2_verdict(pd, sys).stable:
            continue
        ev = spectrum_at(sys, x0)
        re = float(np.max(np.abs(ev.real)))
        worst = max(worst, re)
        entry = {"system": name, "point": x0.tolist(), "max_abs_real": re}
        if name.startswith("nutku3d"):
            nz = int(np.sum(np.abs(ev) <= 1e-9))
            entry["zero_modes"] = nz
            zero_modes_ok = zero_modes_ok and nz == 1
        d["points"].append(entry)
    d["max_abs_real"] = worst
    found = {p["system"].split()[0] for p in d["points"]}
    ok = worst <= 1e-8 and zero_modes_ok and {"volterra2d", "example2", "example3", "power_volterra", "nutku3d"} <= found
    return ok, d


def check_spectral(systems):
    """Purely imaginary spectra at certified fixed points; one Casimir zero mode for Nutku."""
    return _timed("4 spectral oracle", _spectral, systems)


EXAMPLE2_GRID_A = (0.3, 0.7, 1.0, 1.6, 3.1)
EXAMPLE2_GRID_D = (0.4, 0.9, 1.3, 2.2, 5.0)


def _small_oscillations():
    d = {}
    sys, pd = corpus.power_volterra(1.0, 0.0)
    x0 = np.array([math.sqrt(0.5), 1.0])
    tr = integrate(sys, x0 * np.array([1.01, 1.0]), 60.0, config.STEP)
    period, lag = measure_period_and_phase(tr)
    expected = 2 * math.pi / math.sqrt(2)
    d["period"], d["expected_period"] = period, expected
    d["period_rel_error"] = abs(period - expected) / expected
    period_ok = d["period_rel_error"] <= 1e-3

    grid = []
    grid_ok = True
    alpha, beta, gamma, delta = 2.0, 1.0, 1.0, 2.0
    for a in EXAMPLE2_GRID_A:
        for dd in EXAMPLE2_GRID_D:
            s, _ = corpus.generalized_volterra(alpha, beta, gamma, delta, a=a, d=dd)
            predicted = corpus.interior_condition(alpha, beta, gamma, delta, a, dd)
            found = len(find_fixed_points(s)) > 0
            grid.append({"a": a, "d": dd, "predicted": predicted, "newton_found": found})
            grid_ok = grid_ok and predicted == found
    d["grid"] = grid
    d["grid_counts"] = {"interior": sum(g["predicted"] for g in grid), "total": len(grid)}

    phi0_ok = all(phase_shift(r, 0.0) == math.pi / 2 for r in (0.1, 0.5, 1.0, 2.0, 7.0))
    worst = 0.0
    for rho in np.linspace(0.5, 2.0, 16):
        for phi in np.linspace(-0.1, 0.1, 41):
            if phi == 0:
                continue
            err = abs(phase_shift(rho, phi) - (math.pi / 2 + (rho - 1 / rho) * phi))
            worst = max(worst, err / (5 * abs(phi) ** 3))
    d["phi0_exact"] = phi0_ok
    d["expansion_worst_ratio"] = worst
    return period_ok and grid_ok and phi0_ok and worst <= 1.0, d


def check_small_oscillations(systems=None):
    """Small-oscillation period, interior-point condition on a 5x5 grid, phase-shift formula."""
    return _timed("5 small-oscillation physics", _small_oscillations)


def random_conservative_lv(rng, n):
    """Random LV system ``A = K D`` with K skew and D definite (random common sign)."""
    G = rng.standard_normal((n, n))
    K = G - G.T
    D = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0])
    L = rng.standard_normal(n)
    return QPSystem(K @ L, K * D[None, :], np.eye(n)), PoissonData(K, L, D)


def _symmetrized_identity(count, seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    recovered = 0
    for _ in range(count):
        n = int(rng.integers(2, 7))
        sys, pd = random_conservative_lv(rng, n)
        M, _ = symmetrized_form(sys.A, np.abs(pd.D))
        worst = max(worst, float(np.max(np.abs(M))))
        rec = recover_decomposition_lv(sys)
        if rec is not None and check_poisson_conditions(sys, rec).ok:
            recovered += 1
    return worst <= 1e-12 and recovered == count, {
        "systems": count, "max_abs_M": worst, "recovered": recovered, "seed": seed}


def check_symmetrized_identity(systems=None, count=50, seed=None):
    """Zero symmetrized form with Dbar = |D| and decomposition recovery on random systems."""
    if seed is None:
        seed = int(os.environ.get(config.SEED_ENV, "0"))
    return _timed("6 symmetrized-form identity", _symmetrized_identity, count, seed)


def _reduction(sys, pd):
    d = {}
    lv, rec, pd_lv = to_lotka_volterra(sys, pd)
    Bp = rec.steps[0].Bprime
    ex = embed(sys, Bp)
    back = decouple(ex, sys.n)
    d["roundtrip_exact"] = bool(
        np.array_equal(back.lam, sys.lam) and np.array_equal(back.A, sys.A) and np.array_equal(back.B, sys.B)
    )
    qmt = rec.steps[-1]
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        y = np.exp(rng.uniform(-1.5, 1.5, lv.n))
        xt = qmt.point(y, INVERSE)
        lhs = evaluate_flow(ex, xt)
        # x_i = prod y_k^G_ik  =>  dx_i/dt = x_i sum_k G_ik (dy_k/dt) / y_k
        rhs = xt * (qmt.Gamma @ (evaluate_flow(lv, y) / y))
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / (1.0 + np.max(np.abs(lhs)))))
    d["qmt_conjugacy_max_rel"] = worst
    d["D_invariant"] = bool(np.array_equal(pd_lv.D, pd.D))
    d["lv_decomposition_valid"] = check_poisson_conditions(lv, pd_lv).ok
    v_orig, v_lv = theorem2_verdict(pd, sys), theorem2_verdict(pd_lv, lv)
    d["verdict_original"], d["verdict_lv"] = v_orig.verdict.value, v_lv.verdict.value
    ok = (
        d["roundtrip_exact"] and worst <= 1e-9 and d["D_invariant"] and d["lv_decomposition_valid"]
        and v_orig.verdict == v_lv.verdict and v_orig.stable
    )
    return ok, d


def check_reduction(systems):
    """Embedding round trip, QMT conjugacy, D invariance and verdict agreement for example3."""
    return _timed("7 reduction correctness", _reduction, *systems["example3"])


def _sign_criterion(sys, pd):
    fam = fixed_point_family(pd)
    agree = True
    rows = []
    for k in np.linspace(-4.0, 4.0, 33):
        x0 = fam.member(k)
        v = sign_vector(pd, x0)
        lhs = bool(np.all(v < 0))
        rhs = bool(np.all(x0 > 0)) and bool(np.all(pd.D > 0))
        rows.append({"kappa": float(k), "all_negative": lhs, "interior": bool(np.all(x0 > 0))})
        agree = agree and lhs == rhs
    x_off = fam.member(1.0) + np.array([0.1, 0.0, 0.0])
    try:
        lyapunov_for_point(pd, x_off)
        refused = False
    except NotInKernelError:
        refused = True
    return agree and refused, {"rows": rows, "refusal_off_family": refused}


def check_sign_criterion(systems):
    """Sign criterion over the Nutku family and refusal off the family."""
    return _timed("8 fixed-point sign criterion", _sign_criterion, *systems["nutku3d"])


def check_condition24(systems):
    def run():
        sys, _ = systems["example2"]
        a_, b_ = sys.B
        alpha, beta = a_
        gamma, delta = b_
        cond = corpus.interior_condition(alpha, beta, gamma, delta, sys.lam[0], -sys.lam[1])
        pts = find_fixed_points(sys)
        return cond and len(pts) == 1, {"condition": cond, "fixed_points": [p.tolist() for p in pts]}

    return _timed("example2 interior-point condition", run)


def check_zero_form_corpus(systems):
    def run():
        out = {}
        for key in ("volterra2d", "nutku3d"):
            sys, pd = systems[key]
            M, cls = symmetrized_form(sys.A, np.abs(pd.D))
            out[key] = {"max_abs_M": float(np.max(np.abs(M))), "classification": cls}
        return all(v["classification"] == "zero" for v in out.values()), out

    return _timed("zero symmetrized form on corpus", run)


ALL_CHECKS = (
    check_volterra,
    check_three_species,
    check_conservation,
    check_spectral,
    check_small_oscillations,
    check_symmetrized_identity,
    check_reduction,
    check_sign_criterion,
    check_condition24,
    check_zero_form_corpus,
)


def run_all(directory=None):
    systems = _systems(directory)
    return [check(systems) for check in ALL_CHECKS]
