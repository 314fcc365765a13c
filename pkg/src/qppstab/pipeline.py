"""End-to-end analysis used by the command line: reduce, kernel, family, verdict."""

from __future__ import annotations

import logging

import numpy as np

from . import config
from .core import (
    check_poisson_conditions,
    evaluate_flow,
    gradient_functional,
    hamiltonian_from_decomposition,
    hessian_functional,
)
from .errors import RefusalError
from .stability import (
    DSign,
    StabilityReport,
    Verdict,
    casimir_coefficients,
    casimir_vectors,
    find_fixed_points,
    fixed_point_family,
    kappa_coordinates,
    lyapunov_for_point,
    lyapunov_original_coordinates,
    symmetrized_form,
    theorem2_verdict,
)
from .transforms import FORWARD, INVERSE, map_point, recover_decomposition, to_lotka_volterra

logger = logging.getLogger(__name__)


def resolve_decomposition(sys, pd=None, tol=config.POISSON_TOL):
    """Use the supplied decomposition if it checks out, otherwise try to recover one.

    Returns ``(pd or None, info dict)``.
    """
    info = {"theorem1_eligible": sys.theorem1_eligible}
    if pd is not None:
        check = check_poisson_conditions(sys, pd, tol)
        info["supplied"] = check.as_dict()
        if check.ok:
            info["source"] = "file"
            return pd, info
    if not sys.theorem1_eligible:
        info["source"] = None
        info["reason"] = "rank(B) < n or m < n"
        return None, info
    res = recover_decomposition(sys, tol)
    info["recovery"] = {
        "success": res.pd is not None,
        "reason": res.reason,
        "lambda_residual": res.lambda_residual,
        "null_dim": res.null_dim,
        "notes": res.notes,
    }
    if res.pd is None:
        info["source"] = None
        return None, info
    info["source"] = "recovered"
    info["recovered"] = check_poisson_conditions(sys, res.pd, tol).as_dict()
    return res.pd, info


def interior_fixed_points(sys, pd):
    """Known interior fixed points and, for LV systems, the parametric family."""
    lv, rec, pd_lv = to_lotka_volterra(sys, pd)
    family = fixed_point_family(pd_lv)
    if rec.is_identity:
        if family.dimension == 0:
            x0 = family.member()
            pts = [x0] if np.all(x0 > 0) else []
            return pts, family, rec
        return [], family, rec
    return find_fixed_points(sys), family, rec


def analyze(sys, pd=None, tol=config.POISSON_TOL):
    """Full report as a JSON-ready dict (StabilityReport fields at top level)."""
    pd, info = resolve_decomposition(sys, pd, tol)
    out = {"system": {"n": sys.n, "m": sys.m, "theorem1_eligible": sys.theorem1_eligible},
           "decomposition": info, "tolerances": config.as_dict()}
    if pd is None:
        report = StabilityReport(Verdict.INCONCLUSIVE, DSign.INDEFINITE,
                                 notes=["no Poisson decomposition: the energy-Casimir criterion does not apply"])
        if sys.is_lotka_volterra(tol):
            M, cls = symmetrized_form(sys.A, np.ones(sys.n))
            out["symmetrized_form"] = {"Dbar": [1.0] * sys.n, "M": M.tolist(), "classification": cls}
            report.notes.append(f"D A + A^T D with D = I is {cls}")
        out.update(report.to_dict())
        return out

    out["decomposition"].update({"K": pd.K.tolist(), "L": pd.L.tolist(), "D": pd.D.tolist(),
                                 "rankK": pd.rankK})
    report = theorem2_verdict(pd, sys)
    H = hamiltonian_from_decomposition(sys, pd, tol)
    out["hamiltonian"] = H
    out["casimirs"] = [N.tolist() for N in casimir_vectors(pd.K)]
    pts, family, rec = interior_fixed_points(sys, pd)
    out["transform"] = rec.to_json()
    out["fixed_point_family"] = family.describe() | {"coordinates": "identity" if rec.is_identity
                                                      else "lotka-volterra representative"}
    out["fixed_points"] = [p.tolist() for p in pts]
    if sys.is_lotka_volterra():
        M, cls = symmetrized_form(sys.A, np.abs(pd.D))
        out["symmetrized_form"] = {"Dbar": np.abs(pd.D).tolist(), "max_abs": float(np.max(np.abs(M))),
                                   "classification": cls}
    if report.stable and len(pts) == 1:
        x0 = pts[0]
        report.lyapunov = lyapunov_original_coordinates(sys, pd, x0)
        _, _, pd_lv = to_lotka_volterra(sys, pd)
        y0 = map_point(rec, x0, FORWARD)
        report.hessian_diag = pd_lv.D / y0
        report.notes.append(f"Lyapunov functional constructed at the unique interior fixed point {x0.tolist()}")
    elif report.stable and family.dimension:
        report.notes.append(f"{family.dimension}-parameter family of fixed points; "
                            "use the lyapunov command with --point or --kappa")
    elif report.stable and not pts:
        report.notes.append("no interior fixed point found")
    out.update(report.to_dict())
    return out


def point_from_kappa(sys, pd, kappa):
    """Original-coordinate point of the LV family member with parameters ``kappa``."""
    lv, rec, pd_lv = to_lotka_volterra(sys, pd)
    family = fixed_point_family(pd_lv)
    y = family.member(kappa)
    if not np.all(y > 0):
        raise RefusalError(f"family member {y.tolist()} is not in the positive orthant")
    x = map_point(rec, y, INVERSE)
    if not np.allclose(map_point(rec, x, FORWARD), y, rtol=1e-9, atol=0):
        raise RefusalError("family member does not correspond to a point of the original system")
    return x


def lyapunov_report(sys, pd, x0, tol=config.FIXED_POINT_TOL):
    x0 = np.asarray(x0, dtype=float)
    H = hamiltonian_from_decomposition(sys, pd)
    f = lyapunov_original_coordinates(sys, pd, x0, tol)
    N = casimir_coefficients(f, H)
    hess = hessian_functional(f, x0)
    ev = np.linalg.eigvalsh(0.5 * (hess + hess.T))
    lv, rec, pd_lv = to_lotka_volterra(sys, pd)
    y0 = map_point(rec, x0, FORWARD)
    _, diag = lyapunov_for_point(pd_lv, y0, np.inf)
    # "kappa" is the Casimir multiplier in H_C = H + kappa C; the family
    # parameter of --kappa locates x0 on the fixed-point family instead.
    return {
        "point": x0.tolist(),
        "flow_norm": float(np.linalg.norm(evaluate_flow(sys, x0))),
        "lyapunov": f,
        "hamiltonian": H,
        "casimir_correction": N.tolist(),
        "kappa": kappa_coordinates(N, pd.K).tolist(),
        "family_parameter": fixed_point_family(pd_lv).kappa_of(y0).tolist(),
        "casimir_directions": [v.tolist() for v in casimir_vectors(pd.K)],
        "gradient_norm": float(np.linalg.norm(gradient_functional(f, x0))),
        "hessian_eigenvalues": ev.tolist(),
        "hessian_definite": bool(np.all(ev > 0) or np.all(ev < 0)),
        "hessian_diag_lv": diag.tolist(),
        "verdict": theorem2_verdict(pd, sys).verdict.value,
    }
