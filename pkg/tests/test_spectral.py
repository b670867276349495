from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import grid_scan_edges, mp_density, mp_edges, mp_gram_stieltjes, mp_quantile_above, mp_stieltjes
from rmtshrink.errors import InputError
from rmtshrink.kernels import spectral_point
from rmtshrink.spectral import (
    PopulationSpectrum,
    boundary_stieltjes,
    boundary_stieltjes_array,
    bulk_mass,
    density,
    eigenvalue_density,
    find_support,
    gamma_of_w,
    mass_above,
    sample_stieltjes,
    self_consistent_map,
    solve_stieltjes,
    solve_stieltjes_array,
    stieltjes_at_w,
)


@pytest.fixture(scope="module")
def identity_half():
    return PopulationSpectrum(np.ones(500), 1000)


@pytest.fixture(scope="module")
def three_level():
    return PopulationSpectrum.from_weights([1.0, 3.0, 10.0], [0.2, 0.4, 0.4], 2000, 1000)


# --------------------------------------------------------------------------
# population spectrum
# --------------------------------------------------------------------------


def test_spectrum_sorted_and_grouped():
    sp = PopulationSpectrum([1.0, 3.0, 1.0, 2.0], 8)
    np.testing.assert_array_equal(sp.eigenvalues, [3.0, 2.0, 1.0, 1.0])
    np.testing.assert_array_equal(sp.values, [3.0, 2.0, 1.0])
    np.testing.assert_array_equal(sp.counts, [1, 1, 2])
    assert sp.M == 4 and sp.N == 8 and sp.ratio == 0.5


def test_spectrum_rejects_bad_input():
    with pytest.raises(InputError):
        PopulationSpectrum([-1.0, 1.0], 4)
    with pytest.raises(InputError):
        PopulationSpectrum([], 4)
    with pytest.raises(InputError):
        PopulationSpectrum([1.0], 0)


def test_spectrum_regularity_warns_not_rejects():
    with pytest.warns(UserWarning):
        PopulationSpectrum([1e6, 1.0], 4, tau=1e-3)


def test_from_weights_counts():
    sp = PopulationSpectrum.from_weights([1.0, 3.0, 10.0], [0.2, 0.4, 0.4], 2000, 1000)
    np.testing.assert_array_equal(sp.counts, [400, 400, 200])


# --------------------------------------------------------------------------
# self-consistent equation
# --------------------------------------------------------------------------


def test_identity_matches_closed_form(identity_half):
    z = 2.0 + 0.1j
    # M x M law against the closed form; the Gram transform through c m - (1-c)/z
    assert abs(sample_stieltjes(identity_half, z) - mp_stieltjes(z, 0.5)) < 1e-10
    assert abs(solve_stieltjes(identity_half, z).m_frak - mp_gram_stieltjes(z, 0.5)) < 1e-10


def test_large_z_asymptotics(three_level):
    z = 1e6j
    mf = solve_stieltjes(three_level, z).m_frak
    assert abs(mf - (-1.0 / z)) / abs(1.0 / z) < 1e-3


def test_first_moment(three_level):
    z = 1e4j
    mf = solve_stieltjes(three_level, z).m_frak
    assert abs(-z * mf - 1.0) < 1e-2
    # m(z) = -1/z - (first moment)/z^2 + ..., so -z (1 + z m) tends to the first moment
    first = np.sum(three_level.eigenvalues) / three_level.N
    assert abs(-z * (1.0 + z * mf) - first) / first < 1e-2


def test_residual_and_sign(three_level):
    rng = np.random.default_rng(3)
    z = rng.uniform(0.05, 25.0, 200) + 1j * 10 ** rng.uniform(-6, 1, 200)
    mf = solve_stieltjes_array(three_level, z)
    assert np.all(mf.imag > 0)
    assert np.max(np.abs(self_consistent_map(three_level, mf) - z)) < 1e-10


def test_conjugate_symmetry_exact(three_level):
    z = np.array([3.0 + 0.2j, 15.0 + 1e-3j])
    np.testing.assert_array_equal(solve_stieltjes_array(three_level, z.conj()), solve_stieltjes_array(three_level, z).conj())


def test_scale_covariance(three_level):
    s = 2.5
    z = 4.0 + 0.3j
    lhs = solve_stieltjes(three_level.scaled(s), s * z).m_frak * s
    assert abs(lhs - solve_stieltjes(three_level, z).m_frak) < 1e-10


def test_stieltjes_at_w_halves(three_level):
    w = 2.0 - 0.1j
    v = stieltjes_at_w(three_level, w)
    assert abs(v.m - w * solve_stieltjes(three_level, w * w).m_frak) < 1e-12
    # Im m has the sign of Im w
    assert v.m.imag < 0


# --------------------------------------------------------------------------
# boundary values and density
# --------------------------------------------------------------------------


def test_boundary_density_matches_closed_form(identity_half):
    v = boundary_stieltjes(identity_half, 1.0)
    assert abs(v.m_frak.imag / math.pi - 0.5 * mp_density(1.0, 0.5)) < 1e-6
    assert abs(eigenvalue_density(identity_half, 1.0) - mp_density(1.0, 0.5)) < 1e-6


def test_density_off_support_vanishes(three_level):
    assert density(three_level, 40.0) <= 1e-6
    assert density(three_level, 0.05) <= 1e-6
    assert density(three_level, -1.0) == 0.0
    assert density(three_level, 0.0) == 0.0


def test_square_root_edge(three_level):
    upper = find_support(three_level, with_locations=False).edges[0]
    d = np.geomspace(1e-6, 1e-4, 8)
    im = boundary_stieltjes_array(three_level, upper - d).imag
    slope = np.polyfit(np.log(d), np.log(im), 1)[0]
    assert abs(slope - 0.5) < 0.05


def test_density_integrates_to_one(three_level, identity_half):
    for sp in (three_level, identity_half):
        support = find_support(sp, with_locations=False)
        total = sum(bulk_mass(sp, lo, hi) for lo, hi in support.bulks)
        # the Gram law has an atom 1 - M/N at 0
        assert abs(total / sp.ratio - 1.0) < 1e-6


# --------------------------------------------------------------------------
# support and classical locations
# --------------------------------------------------------------------------


def test_identity_support(identity_half):
    s = find_support(identity_half)
    np.testing.assert_allclose(s.edges, mp_edges(0.5), atol=1e-8)
    assert s.n_bulks == 1
    assert s.bulk_counts.tolist() == [500]


def test_three_level_edges_match_grid_scan(three_level):
    s = find_support(three_level, with_locations=False)
    ref = grid_scan_edges([1.0, 3.0, 10.0], [0.2, 0.4, 0.4], 0.5)
    assert s.edges.size == ref.size
    np.testing.assert_allclose(s.edges, ref, rtol=1e-9)


def test_separated_spectrum_has_two_bulks():
    sp = PopulationSpectrum.from_weights([1.0, 20.0], [0.5, 0.5], 4000, 400)
    s = find_support(sp)
    ref = grid_scan_edges([1.0, 20.0], [0.5, 0.5], 0.1)
    assert s.n_bulks == 2
    np.testing.assert_allclose(s.edges, ref, rtol=1e-9)
    assert s.bulk_counts.tolist() == [200, 200]


def test_edges_scale(three_level):
    a = find_support(three_level, with_locations=False).edges
    b = find_support(three_level.scaled(3.0), with_locations=False).edges
    np.testing.assert_allclose(b, 3.0 * a, rtol=1e-10)


def test_classical_locations_against_quantiles(identity_half):
    s = find_support(identity_half)
    g2 = s.classical_locations**2
    # rho([g_i^2, inf)) = (i - 1/2)/N for the Gram law, i.e. (i - 1/2)/M for the M x M law
    for i in (1, 10, 250, 499):
        assert abs(g2[i - 1] - mp_quantile_above((i - 0.5) / 500, 0.5)) < 1e-6


def test_classical_locations_forward_quadrature(three_level):
    s = find_support(three_level)
    g = s.classical_locations
    for i in (1, 2, 137, 500, 999, 1000):
        assert abs(mass_above(three_level, g[i - 1] ** 2, s) - (i - 0.5) / three_level.N) < 1e-8


def test_classical_locations_inside_and_monotone(three_level):
    s = find_support(three_level)
    g2 = s.classical_locations**2
    assert np.all(np.diff(g2) < 0)
    for t, k in enumerate(s.location_bulk):
        lo, hi = s.bulks[k]
        assert lo < g2[t] < hi
    assert s.bulk_counts.sum() == min(three_level.M, three_level.N)


def test_gamma_identity_case():
    sp = PopulationSpectrum(np.ones(20), 40)
    p = spectral_point(sp, 1.1 + 0.2j)
    np.testing.assert_allclose(gamma_of_w(sp, p.w, p.m), -1.0 / (p.w + p.m) * np.ones(20), rtol=1e-14)


def test_gamma_trace_identities(three_level):
    p = spectral_point(three_level, 2.3 + 0.05j)
    gam = gamma_of_w(three_level, p.w, p.m)
    sig = three_level.eigenvalues
    n = three_level.N
    w, m = p.w, p.m
    # tracing Gamma (w + m Sigma) = -1 against <Gamma Sigma> = -w - 1/m gives <Gamma> = m + (1 - M/N)/w
    assert abs(np.sum(gam) / n - (m + (1 - three_level.ratio) / w)) < 1e-10
    assert abs(np.sum(gam.imag) / n - (m.imag - (1 - three_level.ratio) * w.imag / abs(w) ** 2)) < 1e-10
    assert abs(np.sum(gam.imag * sig) / n - (m.imag / abs(m) ** 2 - w.imag)) < 1e-10
    assert abs(np.sum(gam * sig) / n - (-w - 1.0 / m)) < 1e-10
