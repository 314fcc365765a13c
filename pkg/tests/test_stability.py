import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from qppstab import corpus
from qppstab.core import (
    PoissonData,
    QPSystem,
    evaluate_flow,
    gradient_functional,
    hamiltonian_from_decomposition,
    hessian_functional,
)
from qppstab.errors import DomainError, NotFixedPointError, NotInKernelError, StructuralError
from qppstab.stability import (
    casimir_vectors,
    casimirs,
    DSign,
    find_fixed_points,
    fixed_point_family,
    kappa_coordinates,
    kernel_basis,
    lyapunov_for_point,
    lyapunov_original_coordinates,
    sign_certifies,
    sign_vector,
    symmetrized_form,
    theorem2_verdict,
    Verdict,
    volterra_functional,
)

NUTKU_K = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


def test_kernel_invertible():
    assert kernel_basis(np.array([[0.0, 1.0], [-1.0, 0.0]])) == []


def test_kernel_nutku(nutku):
    np.testing.assert_array_equal(nutku[1].K, NUTKU_K)
    (v,) = kernel_basis(NUTKU_K)
    assert abs(abs(v @ np.ones(3)) / math.sqrt(3) - 1.0) <= 1e-12
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-14)


def test_kernel_zero():
    basis = kernel_basis(np.zeros((3, 3)))
    np.testing.assert_array_equal(np.array(basis), np.eye(3))


@given(st.integers(0, 10_000), st.integers(2, 7), st.integers(1, 3))
def test_kernel_size_and_orthonormal(seed, n, half_rank):
    rng = np.random.default_rng(seed)
    r = 2 * min(half_rank, n // 2)
    U = np.linalg.qr(rng.standard_normal((n, n)))[0][:, :r]
    S = rng.standard_normal((r, r))
    K = U @ (S - S.T) @ U.T
    basis = np.array(kernel_basis(K)).reshape(-1, n)
    assert basis.shape[0] == n - r
    np.testing.assert_allclose(basis @ basis.T, np.eye(n - r), atol=1e-12)
    assert np.max(np.abs(K @ basis.T), initial=0.0) <= 1e-12 * (1 + np.abs(K).max())
    # independent oracle: same subspace as scipy's null space
    ref = sla.null_space(K, rcond=1e-10)
    assert ref.shape[1] == n - r
    np.testing.assert_allclose(basis.T @ basis, ref @ ref.T, atol=1e-10)


def test_casimirs_volterra(volterra):
    assert casimirs(volterra[1]) == []


def test_casimir_nutku_matches_closed_form(nutku):
    (C,) = casimirs(nutku[1])
    a, b = -1.0, -1.0
    expected = np.array([a * b, -b, 1.0])
    np.testing.assert_allclose(C.logcoeffs, expected / np.max(np.abs(expected)), atol=1e-12)
    assert C.coeffs.size == 0


def test_casimir_general_nutku_parameters():
    a, b = -2.0, -0.5
    c = -1.0 / (a * b)
    sys, pd = corpus.nutku(a, b, c, 1.0, 1.0, 1.0 * b - 1.0 * a * b)
    (C,) = casimirs(pd)
    expected = np.array([a * b, -b, 1.0])
    ratio = C.logcoeffs / expected
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)
    assert np.max(np.abs(pd.K.T @ C.logcoeffs)) <= 1e-12


def test_casimir_normalization():
    v = casimir_vectors(NUTKU_K)[0]
    assert np.max(np.abs(v)) == pytest.approx(1.0, abs=1e-15)
    assert v[np.argmax(np.abs(v))] > 0


def test_family_volterra():
    a, b, c, d = 2.0, 0.5, 4.0, 3.0
    fam = fixed_point_family(corpus.volterra(a, b, c, d)[1])
    assert fam.dimension == 0
    np.testing.assert_allclose(fam.member(), [d / c, a / b], rtol=1e-15)


def test_family_nutku(nutku):
    fam = fixed_point_family(nutku[1])
    assert fam.dimension == 1
    for k in (-3.0, 0.0, 0.25, 1.0, 8.0):
        np.testing.assert_allclose(fam.member(k), [k, 2 + k, 1 + k], atol=1e-12)
        assert fam.is_interior(k) == (k > 0)
    assert fam.kappa_of([1.0, 3.0, 2.0]) == pytest.approx([1.0], abs=1e-12)


def test_family_flagged_origin():
    pd = PoissonData([[0.0, 1.0], [-1.0, 0.0]], [0.0, 0.0], [1.0, 2.0])
    fam = fixed_point_family(pd)
    np.testing.assert_array_equal(fam.member(), [0.0, 0.0])
    assert not fam.is_interior()
    assert fam.describe()["base_interior"] is False


@given(st.integers(0, 10_000))
def test_family_members_are_fixed_points(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    r = 2 * int(rng.integers(1, n // 2 + 1)) if n > 2 else 2
    U = np.linalg.qr(rng.standard_normal((n, n)))[0][:, :r]
    S = rng.standard_normal((r, r))
    K = U @ (S - S.T) @ U.T
    D = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
    L = rng.standard_normal(n)
    pd = PoissonData(K, L, D)
    sys = QPSystem(K @ L, K * D, np.eye(n))
    fam = fixed_point_family(pd)
    for _ in range(5):
        x0 = fam.member(rng.standard_normal(fam.dimension) * 3)
        if np.all(x0 > 0):
            assert np.linalg.norm(evaluate_flow(sys, x0)) <= 1e-9 * (1 + np.linalg.norm(x0) ** 2)


def test_family_needs_square():
    _, pd = corpus.extra_terms(-1.0, -1.0, 0.5, 0.5)
    with pytest.raises(StructuralError):
        fixed_point_family(pd)


@pytest.mark.parametrize("D, sign, verdict", [
    ((-1.0, -2.0), DSign.NEGATIVE, Verdict.STABLE),
    ((-1.0, -1.0, -1.0, -1.0), DSign.NEGATIVE, Verdict.STABLE),
    ((1.0, 1.0, 1.0), DSign.POSITIVE, Verdict.STABLE),
    ((1.0, -1.0), DSign.INDEFINITE, Verdict.INCONCLUSIVE),
    ((1.0, 1e-13), DSign.INDEFINITE, Verdict.INCONCLUSIVE),
])
def test_verdict_from_sign(D, sign, verdict):
    n = len(D)
    rep = theorem2_verdict(PoissonData(np.zeros((n, n)), np.zeros(n), D))
    assert rep.d_sign is sign and rep.verdict is verdict
    assert rep.stable == (sign is not DSign.INDEFINITE)


def test_verdict_examples(volterra, example3, nutku):
    assert theorem2_verdict(volterra[1], volterra[0]).d_sign is DSign.NEGATIVE
    rep = theorem2_verdict(example3[1], example3[0])
    assert rep.stable and "m > n" in " ".join(rep.notes)
    assert theorem2_verdict(nutku[1], nutku[0]).d_sign is DSign.POSITIVE


def test_verdict_positive_extra_terms_inconclusive():
    _, pd = corpus.extra_terms(1.0, 1.0, 0.5, 0.5)
    assert theorem2_verdict(pd).verdict is Verdict.INCONCLUSIVE


def test_verdict_zero_D_raises():
    with pytest.raises(StructuralError):
        theorem2_verdict(PoissonData(np.zeros((2, 2)), np.zeros(2), [1.0, 0.0]))


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_verdict_scale_invariant(c):
    _, pd = corpus.nutku()
    scaled = PoissonData(c * pd.K, pd.L / c, pd.D / c)
    assert theorem2_verdict(scaled).verdict is theorem2_verdict(pd).verdict


def test_lyapunov_volterra(volterra):
    sys, pd = volterra
    H_C, diag = lyapunov_for_point(pd, [1.0, 1.0])
    H = hamiltonian_from_decomposition(sys, pd)
    np.testing.assert_array_equal(H_C.logcoeffs, H.logcoeffs)
    np.testing.assert_array_equal(diag, [-1.0, -1.0])


def test_lyapunov_nutku(nutku):
    H_C, diag = lyapunov_for_point(nutku[1], [1.0, 3.0, 2.0])
    np.testing.assert_array_equal(H_C.coeffs, [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(H_C.logcoeffs, [-1.0, -3.0, -2.0])
    np.testing.assert_allclose(diag, [1.0, 1 / 3, 1 / 2], rtol=1e-15)
    assert np.linalg.norm(gradient_functional(H_C, [1.0, 3.0, 2.0])) <= 1e-10


def test_lyapunov_hessian_diag_is_true_hessian(nutku):
    x0 = np.array([2.5, 4.5, 3.5])
    H_C, diag = lyapunov_for_point(nutku[1], x0)
    np.testing.assert_allclose(hessian_functional(H_C, x0), np.diag(diag), atol=1e-14)


def test_lyapunov_refuses_non_fixed_point(volterra):
    # (2, 2) gives N = (1, 1): ker K = {0} so the kernel test already refuses
    with pytest.raises(NotInKernelError):
        lyapunov_for_point(volterra[1], [2.0, 2.0])


def test_lyapunov_refuses_off_family(nutku):
    with pytest.raises(NotInKernelError):
        lyapunov_for_point(nutku[1], [1.1, 3.0, 2.0])


@given(st.integers(0, 10_000))
def test_kernel_membership_iff_fixed_point(seed):
    # on an LV representative, N = -L - D x0 lies in ker K exactly when x0 is fixed
    rng = np.random.default_rng(seed)
    _, pd = corpus.nutku()
    x0 = fixed_point_family(pd).member(rng.uniform(0.1, 5.0))
    x0 = x0 + (rng.uniform(-0.05, 0.05, 3) if rng.random() < 0.5 else 0.0)
    fixed = np.linalg.norm(x0 * (pd.K @ (pd.L + pd.D * x0))) <= 1e-9
    try:
        lyapunov_for_point(pd, x0)
        accepted = True
    except NotInKernelError:
        accepted = False
    assert accepted == fixed


@given(st.floats(0.01, 50.0))
def test_lyapunov_family_properties(k):
    _, pd = corpus.nutku()
    x0 = fixed_point_family(pd).member(k)
    H_C, diag = lyapunov_for_point(pd, x0)
    assert np.linalg.norm(gradient_functional(H_C, x0)) <= 1e-10 * (1 + k)
    assert np.all(np.sign(diag) == np.sign(pd.D))


def test_sign_criterion(nutku):
    pd = nutku[1]
    fam = fixed_point_family(pd)
    x0 = fam.member(1.0)
    np.testing.assert_array_equal(sign_vector(pd, x0), -x0)
    assert sign_certifies(pd, x0)
    assert not sign_certifies(pd, fam.member(-0.5))


def test_lyapunov_original_volterra(volterra):
    sys, pd = volterra
    f = lyapunov_original_coordinates(sys, pd, [1.0, 1.0])
    H = hamiltonian_from_decomposition(sys, pd)
    for attr in ("coeffs", "exponents", "logcoeffs"):
        np.testing.assert_array_equal(getattr(f, attr), getattr(H, attr))


def test_lyapunov_original_generalized_volterra(example2):
    sys, pd = example2
    (x0,) = find_fixed_points(sys)
    f = lyapunov_original_coordinates(sys, pd, x0)
    H = hamiltonian_from_decomposition(sys, pd)
    np.testing.assert_allclose(f.logcoeffs, H.logcoeffs, atol=1e-10)
    assert np.linalg.norm(gradient_functional(f, x0)) <= 1e-10
    assert np.all(np.linalg.eigvalsh(hessian_functional(f, x0)) < 0)


def test_lyapunov_original_nutku_kappa(nutku):
    sys, pd = nutku
    H = hamiltonian_from_decomposition(sys, pd)
    (C,) = casimirs(pd)
    fam = fixed_point_family(pd)
    for k in (0.5, 1.0, 3.0):
        x0 = fam.member(k)
        f = lyapunov_original_coordinates(sys, pd, x0)
        kappa = kappa_coordinates(f.logcoeffs - H.logcoeffs, pd.K)
        np.testing.assert_allclose(f.logcoeffs, H.logcoeffs + kappa[0] * C.logcoeffs, atol=1e-12)
        # in this normalization the Casimir multiplier is minus the family parameter
        assert kappa[0] == pytest.approx(-k, abs=1e-12)
        assert np.all(np.linalg.eigvalsh(hessian_functional(f, x0)) > 0)


def test_lyapunov_original_refuses(volterra):
    with pytest.raises(NotFixedPointError):
        lyapunov_original_coordinates(*volterra, [2.0, 2.0])


def test_symmetrized_examples():
    M, cls = symmetrized_form([[0.0, -1.0], [1.0, 0.0]], [1.0, 1.0])
    assert cls == "zero" and np.array_equal(M, np.zeros((2, 2)))
    M, cls = symmetrized_form(-np.eye(2), [1.0, 1.0])
    assert cls == "negative definite" and np.array_equal(M, -2 * np.eye(2))
    assert symmetrized_form([[1.0, 0.0], [0.0, -1.0]], [1.0, 1.0])[1] == "indefinite"
    assert symmetrized_form([[-1.0, 0.0], [0.0, 0.0]], [1.0, 1.0])[1] == "negative semidefinite"
    assert symmetrized_form(np.eye(2), [1.0, 2.0])[1] == "positive definite"
    with pytest.raises(DomainError):
        symmetrized_form(np.eye(2), [1.0, -1.0])


@given(st.integers(0, 10_000), st.integers(2, 8), st.sampled_from([-1.0, 1.0]))
def test_symmetrized_form_vanishes_when_conservative(seed, n, sign):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    K = G - G.T
    D = sign * rng.uniform(0.1, 5.0, n)
    M, cls = symmetrized_form(K * D, np.abs(D))
    assert np.max(np.abs(M)) <= 1e-12
    assert cls == "zero"


def test_volterra_functional_basic():
    V = volterra_functional([1.0, 1.0], [1.0, 1.0])
    assert V([1.0, 1.0]) == 0.0
    x = np.array([2.0, 0.5])
    assert V(x) == pytest.approx(x.sum() - 2 - np.log(x).sum(), abs=1e-15)


@given(st.integers(0, 10_000))
def test_volterra_functional_minimum(seed):
    rng = np.random.default_rng(seed)
    x0 = np.exp(rng.uniform(-2, 2, 3))
    V = volterra_functional(x0, rng.uniform(0.1, 3, 3))
    assert abs(V(x0)) <= 1e-12 * (1 + np.sum(x0))
    x = np.exp(rng.uniform(-2, 2, 3))
    assert V(x) >= -1e-12


def test_volterra_functional_matches_hamiltonian(volterra, rng):
    sys, pd = volterra
    H = hamiltonian_from_decomposition(sys, pd)
    V = volterra_functional([1.0, 1.0], np.abs(pd.D))
    for _ in range(20):
        x = np.exp(rng.uniform(-1, 1, 2))
        assert V(x) == pytest.approx(H([1.0, 1.0]) - H(x), abs=1e-12)


def test_volterra_functional_domain():
    with pytest.raises(DomainError):
        volterra_functional([1.0, 0.0], [1.0, 1.0])


def test_find_fixed_points_example3(example3):
    (x0,) = find_fixed_points(example3[0])
    expected = ((-0.5 + math.sqrt(4.25)) / 2) ** 2
    np.testing.assert_allclose(x0, [expected, expected], rtol=1e-12)


def test_find_fixed_points_none():
    # x1' = x1 (1 + x1) has no positive root
    sys = QPSystem([1.0], [[1.0]], [[1.0]])
    assert find_fixed_points(sys) == []


def test_find_fixed_points_power_volterra():
    sys, _ = corpus.power_volterra(1.0, 0.0)
    (x0,) = find_fixed_points(sys)
    np.testing.assert_allclose(x0, [math.sqrt(0.5), 1.0], rtol=1e-12)
