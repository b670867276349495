from __future__ import annotations

import warnings

import numpy as np
import pytest

from rmtshrink.errors import DegenerateSpectrum, DenominatorNearZero, InputError, NonInvertible, NonSPD, PoleHit
from rmtshrink.overlaps import predicted_overlap_uu
from rmtshrink.shrinkage import (
    LossKind,
    Mode,
    SampleDecomposition,
    _finv_formula,
    assemble_estimator,
    default_eta,
    eigenvalue_loss,
    empirical_stieltjes,
    loss,
    oracle_shrinkage,
    shrink,
    shrink_frobenius,
    shrink_inverse_frobenius,
    transitional_shrinkage,
)
from rmtshrink.simlab import generate_sample
from rmtshrink.spectral import PopulationSpectrum, find_support, solve_stieltjes


@pytest.fixture(scope="module")
def three_level():
    return PopulationSpectrum.from_weights([1.0, 3.0, 10.0], [0.2, 0.4, 0.4], 2000, 1000)


@pytest.fixture(scope="module")
def three_level_decomp(three_level):
    return SampleDecomposition.from_eigh(generate_sample(three_level, 2000, seed=1))


@pytest.fixture()
def tiny():
    """lambda = (2, 1), M = 2, N = 4."""
    return SampleDecomposition.from_covariance(np.diag([1.0, 2.0]), 4)


# --------------------------------------------------------------------------
# decompositions
# --------------------------------------------------------------------------


def test_from_eigh_sorted_orthonormal():
    y = np.random.default_rng(0).standard_normal((30, 80))
    d = SampleDecomposition.from_eigh(y)
    assert np.all(np.diff(d.sample_eigenvalues) <= 0)
    assert d.orthonormality_error() < 1e-8
    np.testing.assert_array_equal(d.singular_values**2, d.sample_eigenvalues)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(y @ y.T / 80))[::-1], d.sample_eigenvalues, rtol=1e-12)


def test_from_svd_agrees_with_eigh():
    y = np.random.default_rng(1).standard_normal((30, 80))
    a, b = SampleDecomposition.from_eigh(y), SampleDecomposition.from_svd(y)
    np.testing.assert_allclose(a.sample_eigenvalues, b.sample_eigenvalues, rtol=1e-10)
    assert b.right_singular_vectors.shape == (80, 30)


def test_ties_keep_solver_order():
    d = SampleDecomposition.from_covariance(np.eye(3), 10)
    np.testing.assert_array_equal(d.sample_eigenvalues, [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(np.abs(d.eigenvectors), np.eye(3))


# --------------------------------------------------------------------------
# empirical transform and algorithmic shrinkage
# --------------------------------------------------------------------------


def test_empirical_stieltjes_hand_value():
    z = 1 + 1j
    expected = 0.25 * (1 / (1 - 1j) + 1 / (-1j)) - 0.5 / (1 + 1j)
    assert abs(empirical_stieltjes([2.0, 1.0], 2, 4, z) - expected) < 1e-15


def test_empirical_stieltjes_square_case():
    lam = np.array([3.0, 2.0, 0.5])
    z = 1.5 + 0.2j
    assert abs(empirical_stieltjes(lam, 3, 3, z) - np.sum(1 / (lam - z)) / 3) < 1e-15


def test_empirical_stieltjes_pole():
    with pytest.raises(PoleHit):
        empirical_stieltjes([2.0, 1.0], 2, 4, 2.0)


def test_empirical_approaches_deterministic(three_level, three_level_decomp):
    z = 5.0 + 0.5j
    g = empirical_stieltjes(three_level_decomp.sample_eigenvalues, 1000, 2000, z)
    mf = solve_stieltjes(three_level, z).m_frak
    assert abs(g - mf) <= 5.0 / (2000 * 0.5) * 2000**0.1


def test_frobenius_hand_values(tiny):
    # g(2 + i) = -0.325 + 0.475i, g(1 + 0.5i) = -0.2 + 0.8i
    res = shrink_frobenius(tiny, 0.5)
    np.testing.assert_allclose(res.shrunk_eigenvalues, [1 / (2 * 0.33125), 1 / 0.68], rtol=1e-14)
    assert res.mode is Mode.ALGORITHMIC and res.eta == 0.5
    np.testing.assert_allclose(res.per_eigenvalue_z, [2 + 1j, 1 + 0.5j])


def test_inverse_frobenius_hand_values(tiny):
    with pytest.warns(UserWarning, match="not positive"):
        res = shrink_inverse_frobenius(tiny, 0.5)
    np.testing.assert_allclose(res.shrunk_eigenvalues, [2.5, -10.0], rtol=1e-13)
    # reported, not clamped
    assert res.nonpositive.tolist() == [1]


def test_shrink_dispatch(tiny):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert shrink(tiny, "f", 0.5).loss_kind is LossKind.FROBENIUS
        assert shrink(tiny, "finv", 0.5).loss_kind is LossKind.INVERSE_FROBENIUS
    with pytest.raises(ValueError):
        LossKind.parse("l2")


def test_scale_equivariance_exact(three_level_decomp):
    # a power-of-two factor keeps every floating-point step exact
    lam = three_level_decomp.sample_eigenvalues
    scaled = SampleDecomposition(4.0 * lam, three_level_decomp.eigenvectors, 2.0 * three_level_decomp.singular_values, None, 1000, 2000)
    for kind in LossKind:
        np.testing.assert_array_equal(shrink(scaled, kind).shrunk_eigenvalues, 4.0 * shrink(three_level_decomp, kind).shrunk_eigenvalues)


def test_estimator_scale_equivariance():
    y = generate_sample(PopulationSpectrum(np.linspace(1, 4, 50), 200), 200, seed=3)
    a = assemble_estimator(d := SampleDecomposition.from_eigh(y), shrink(d, "f"))
    b = assemble_estimator(d2 := SampleDecomposition.from_eigh(2.0 * y), shrink(d2, "f"))
    np.testing.assert_allclose(b, 4.0 * a, rtol=1e-12, atol=1e-12)


def test_rotational_invariance():
    rng = np.random.default_rng(9)
    y = generate_sample(PopulationSpectrum(np.linspace(1, 4, 50), 200), 200, seed=4)
    q, _ = np.linalg.qr(rng.standard_normal((50, 50)))
    d, dq = SampleDecomposition.from_eigh(y), SampleDecomposition.from_eigh(q @ y)
    for kind in LossKind:
        r, rq = shrink(d, kind), shrink(dq, kind)
        np.testing.assert_allclose(rq.shrunk_eigenvalues, r.shrunk_eigenvalues, rtol=1e-8)
        np.testing.assert_allclose(assemble_estimator(dq, rq), q @ assemble_estimator(d, r) @ q.T, atol=1e-8)


def test_three_level_finv_positive_and_plateaus(three_level, three_level_decomp):
    f = shrink_frobenius(three_level_decomp).shrunk_eigenvalues
    finv = shrink_inverse_frobenius(three_level_decomp).shrunk_eigenvalues
    assert np.all(finv > 0)
    # stretches dominated by the three population levels sit on the oracle plateaus
    for kind, vals in (("f", f), ("finv", finv)):
        orc = oracle_shrinkage(three_level_decomp, three_level.eigenvalues, kind).shrunk_eigenvalues
        for sl in (slice(0, 400), slice(450, 750), slice(850, 1000)):
            assert abs(np.median(vals[sl]) - np.median(orc[sl])) < 0.1 * np.median(orc[sl])
    assert np.median(f[:400]) > 2 * np.median(f[450:750]) > 2 * np.median(f[850:])


def test_algorithmic_guards(tiny):
    with pytest.raises(InputError, match="M < N"):
        shrink_frobenius(SampleDecomposition.from_covariance(np.eye(4), 4))
    with pytest.raises(InputError):
        shrink_frobenius(tiny, 1.5)
    with pytest.warns(UserWarning, match="outside"):
        shrink_frobenius(tiny, 0.05)
    with pytest.raises(DegenerateSpectrum):
        shrink_frobenius(SampleDecomposition.from_covariance(np.diag([1.0, 0.0]), 4))


def test_finv_denominator_guard():
    with pytest.raises(DenominatorNearZero):
        _finv_formula(np.array([1.0]), np.array([-0.25]), 0.5)


def test_default_eta():
    assert default_eta(2500) == 0.02


# --------------------------------------------------------------------------
# oracle and transitional shrinkage
# --------------------------------------------------------------------------


def test_oracle_identity_population():
    d = SampleDecomposition.from_eigh(np.random.default_rng(2).standard_normal((5, 20)))
    for kind in LossKind:
        np.testing.assert_allclose(oracle_shrinkage(d, np.ones(5), kind).shrunk_eigenvalues, 1.0, rtol=1e-12)


def test_oracle_coordinate_vectors():
    d = SampleDecomposition.from_covariance(np.diag([3.0, 2.0, 1.0]), 10)
    sigma = np.array([[4.0, 1.0, 0.0], [1.0, 5.0, 0.5], [0.0, 0.5, 6.0]])
    np.testing.assert_allclose(oracle_shrinkage(d, sigma).shrunk_eigenvalues, [4.0, 5.0, 6.0], rtol=1e-14)


def test_oracle_random_quadratic_forms():
    rng = np.random.default_rng(12)
    a = rng.standard_normal((3, 3))
    sigma = a @ a.T + np.eye(3)
    d = SampleDecomposition.from_covariance(np.diag([3.0, 2.0, 1.0]) + 0.1 * (a + a.T), 10)
    u = d.eigenvectors
    expected_f = [u[:, i] @ sigma @ u[:, i] for i in range(3)]
    expected_i = [1.0 / (u[:, i] @ np.linalg.inv(sigma) @ u[:, i]) for i in range(3)]
    np.testing.assert_allclose(oracle_shrinkage(d, sigma, "f").shrunk_eigenvalues, expected_f, rtol=1e-12)
    np.testing.assert_allclose(oracle_shrinkage(d, sigma, "finv").shrunk_eigenvalues, expected_i, rtol=1e-12)


def test_oracle_errors():
    d = SampleDecomposition.from_covariance(np.eye(2), 10)
    with pytest.raises(NonSPD):
        oracle_shrinkage(d, np.array([[1.0, 2.0], [2.0, 1.0]]), "finv")
    with pytest.raises(InputError):
        oracle_shrinkage(d, np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InputError):
        oracle_shrinkage(d, np.ones(3))


def test_oracle_is_loss_minimizer():
    rng = np.random.default_rng(21)
    sig = np.linspace(1, 4, 20)
    d = SampleDecomposition.from_eigh(generate_sample(PopulationSpectrum(sig, 60), 60, seed=5))
    sigma = np.diag(np.sort(sig)[::-1])
    best = oracle_shrinkage(d, sigma).shrunk_eigenvalues
    base = loss(assemble_estimator(d, best), sigma)
    for _ in range(100):
        v = best + 0.1 * rng.standard_normal(20)
        assert base <= loss(assemble_estimator(d, v), sigma) + 1e-14


def test_transitional_matches_predicted_overlap(three_level):
    g = find_support(three_level).classical_locations[::37]
    lhs = transitional_shrinkage(g**2, three_level, "f").shrunk_eigenvalues
    rhs = np.real(predicted_overlap_uu(three_level, g, three_level.eigenvalues))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-8)


def test_transitional_inverse_matches_predicted_overlap(three_level):
    g = find_support(three_level).classical_locations[::53]
    lhs = transitional_shrinkage(g**2, three_level, "finv").shrunk_eigenvalues
    rhs = 1.0 / np.real(predicted_overlap_uu(three_level, g, 1.0 / three_level.eigenvalues))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-8)


def test_transitional_small_ratio():
    # c = 1e-3: almost no high-dimensional distortion
    sp = PopulationSpectrum(np.ones(1), 1000)
    g2 = find_support(sp).classical_locations ** 2
    t = transitional_shrinkage(g2, sp).shrunk_eigenvalues
    assert np.all(np.abs(t - g2) / g2 < 0.02)


def test_transitional_rejects_nonpositive(three_level):
    with pytest.raises(InputError):
        transitional_shrinkage([1.0, -1.0], three_level)


# --------------------------------------------------------------------------
# losses and assembly
# --------------------------------------------------------------------------


def test_loss_examples():
    a = np.diag([2.0, 1.0])
    assert loss(a, a) == 0.0
    assert loss(a, np.eye(2)) == 0.5
    assert loss(a, np.eye(2), "finv") == pytest.approx(0.125, rel=1e-15)
    with pytest.raises(NonInvertible):
        loss(np.diag([1.0, 0.0]), np.eye(2), "finv")


def test_codiagonal_losses():
    rng = np.random.default_rng(4)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    x, y = rng.uniform(1, 3, 6), rng.uniform(1, 3, 6)
    a, b = q @ np.diag(x) @ q.T, q @ np.diag(y) @ q.T
    for kind in LossKind:
        assert abs(loss(a, b, kind) - eigenvalue_loss(x, y, kind)) < 1e-12


def test_assemble_examples(three_level_decomp):
    d = SampleDecomposition.from_eigh(y := np.random.default_rng(8).standard_normal((20, 50)))
    np.testing.assert_allclose(assemble_estimator(d, d.sample_eigenvalues), y @ y.T / 50, atol=1e-10)
    x, z = np.linspace(3, 1, 20), np.linspace(2.5, 1.2, 20)
    gap = np.linalg.norm(assemble_estimator(d, x) - assemble_estimator(d, z), 2)
    assert abs(gap - np.max(np.abs(x - z))) < 1e-10
    np.testing.assert_allclose(np.linalg.eigvalsh(assemble_estimator(d, x)), np.sort(x), atol=1e-10)
    with pytest.raises(InputError):
        assemble_estimator(d, np.ones(3))
