"""Tests for potentials and projected phase-factor tables.

The analytic square-well table and the certified quadrature path are
both checked against an oversampled 2^20-point transform oracle written
directly here.
"""

import numpy as np
import pytest

from efp1d.errors import QuadratureError
from efp1d.potentials import (
    CallablePotential,
    PhaseFactorTable,
    PowerLaw,
    SquareWell,
    WindowedPowerLaw,
    ZeroPotential,
    clear_phase_cache,
    eval_potential,
    phase_factor_cache,
    phase_projection,
    quadrature_phase_coeffs,
    standard_potential,
)
from efp1d.spectral import Domain

BOX = Domain(-16.0, 16.0)


def oracle_phase_coeffs(potential, tau, n, jump_points=()):
    """Oversampled discrete transform of exp(-i tau V) at 2^20 points.

    At a jump point sitting on a node the sample is replaced by the mean
    of the one-sided limits (the Fourier-series value); otherwise the
    transform of a discontinuous integrand carries an O(1/M) node-value
    artifact that would swamp the comparison tolerance.
    """
    m = 2**20
    domain = potential.domain
    h = domain.length / m
    x = domain.a + np.arange(m) * h
    vals = np.exp(-1j * tau * potential(x))
    for xj in jump_points:
        j = round((xj - domain.a) / h)
        assert abs(domain.a + j * h - xj) < 1e-12, "jump must sit on a node"
        lo = potential(np.array([xj - 1e-9]))[0]
        hi = potential(np.array([xj + 1e-9]))[0]
        vals[j] = 0.5 * (np.exp(-1j * tau * lo) + np.exp(-1j * tau * hi))
    c = np.fft.fftshift(np.fft.fft(vals)) / m
    off = (m - 2 * n) // 2
    return c[off : off + 2 * n]


# ---------------------------------------------------------------------------
# pointwise values


def test_square_well_values():
    v1 = standard_potential("v1")
    x = np.array([0.0, 3.999, 5.0, -10.0, 4.0, -4.0, 16.0])
    np.testing.assert_array_equal(v1(x), [0.0, 0.0, 10.0, 10.0, 10.0, 10.0, 10.0])


def test_power_law_values():
    v2 = standard_potential("v2")
    assert v2(np.array([1.0]))[0] == 1.0
    assert abs(v2(np.array([-2.0]))[0] - 2.0**0.76) < 1e-15
    assert v2(np.array([0.0]))[0] == 0.0


def test_windowed_power_law_values():
    v3 = standard_potential("v3")
    v4 = standard_potential("v4")
    assert v3(np.array([16.0]))[0] == 0.0
    assert v3(np.array([-16.0]))[0] == 0.0
    want = 8.0**1.51 * (1.0 - 64.0 / 256.0) ** 2
    assert abs(v3(np.array([8.0]))[0] - want) < 1e-13
    want4 = 8.0**2.51 * (1.0 - 64.0 / 256.0) ** 3
    assert abs(v4(np.array([8.0]))[0] - want4) < 1e-13


def test_zero_potential_values():
    z = standard_potential("zero")
    np.testing.assert_array_equal(z(np.linspace(-16, 16, 7)), np.zeros(7))


def test_eval_potential_scalar_and_bounds():
    v1 = standard_potential("v1")
    assert eval_potential(v1, 0.0) == 0.0
    assert eval_potential(v1, 5.0) == 10.0
    with pytest.raises(ValueError):
        eval_potential(v1, 20.0)
    with pytest.raises(ValueError):
        eval_potential(v1, np.array([0.0, -17.0]))


def test_catalog_contents():
    assert isinstance(standard_potential("v1"), SquareWell)
    assert isinstance(standard_potential("v2"), PowerLaw)
    assert isinstance(standard_potential("v3"), WindowedPowerLaw)
    assert isinstance(standard_potential("v4"), WindowedPowerLaw)
    assert isinstance(standard_potential("zero"), ZeroPotential)
    with pytest.raises(ValueError):
        standard_potential("v9")


def test_square_well_requires_interior_well():
    with pytest.raises(ValueError):
        SquareWell(BOX, inner_left=-20.0, inner_right=4.0)
    with pytest.raises(ValueError):
        SquareWell(BOX, inner_left=4.0, inner_right=-4.0)


def test_windowed_power_law_requires_symmetric_domain():
    with pytest.raises(ValueError):
        WindowedPowerLaw(Domain(-8.0, 16.0), alpha=1.51, window_power=2)


# ---------------------------------------------------------------------------
# phase projection


def test_zero_potential_table_is_identity():
    table = phase_projection(ZeroPotential(BOX), tau=0.01, n=16)
    expected = np.zeros(32, dtype=complex)
    expected[16] = 1.0
    np.testing.assert_array_equal(table.projection.coeffs, expected)
    assert table.provenance == "analytic"


def test_square_well_table_matches_oversampled_oracle():
    table = phase_projection(standard_potential("v1"), tau=0.01, n=128)
    want = oracle_phase_coeffs(standard_potential("v1"), 0.01, 128, jump_points=(-4.0, 4.0))
    assert table.provenance == "analytic"
    assert np.max(np.abs(table.projection.coeffs - want)) <= 1e-10


def test_power_law_table_matches_oversampled_oracle():
    table = phase_projection(standard_potential("v2"), tau=0.01, n=128, tol=1e-11)
    want = oracle_phase_coeffs(standard_potential("v2"), 0.01, 128)
    assert table.provenance == "quadrature"
    assert table.levels >= 2
    assert table.achieved <= 1e-11
    assert np.max(np.abs(table.projection.coeffs - want)) <= 1e-10


def test_windowed_power_law_table_matches_oversampled_oracle():
    table = phase_projection(standard_potential("v3"), tau=0.01, n=64)
    want = oracle_phase_coeffs(standard_potential("v3"), 0.01, 64)
    assert np.max(np.abs(table.projection.coeffs - want)) <= 1e-10


def test_quadrature_agrees_with_analytic_on_continuous_catalog():
    # dual route: force the generic quadrature path onto a potential that
    # also has a closed form is impossible (only the well has one), so
    # instead pin the quadrature path against the oracle on v4
    table_coeffs, levels, achieved = quadrature_phase_coeffs(
        standard_potential("v4"), tau=0.02, n=64, tol=1e-12
    )
    want = oracle_phase_coeffs(standard_potential("v4"), 0.02, 64)
    assert np.max(np.abs(table_coeffs - want)) <= 1e-10
    assert achieved <= 1e-12


@pytest.mark.parametrize("name", ["v1", "v2", "v3", "v4"])
def test_table_reflection_symmetry(name):
    # every catalog potential is even about the domain center, so the
    # phase-factor coefficients satisfy c_{-l} = c_l on paired indices
    # (exp(-i tau V) is not real-valued, so conjugate symmetry does not
    # apply to these tables)
    table = phase_projection(standard_potential(name), tau=0.01, n=32)
    c = table.projection.coeffs  # indices l = -32 .. 31
    for l in range(1, 32):
        assert abs(c[32 + l] - c[32 - l]) <= 1e-10


@pytest.mark.parametrize("name", ["v1", "v2", "v3", "v4", "zero"])
def test_table_energy_bound(name):
    table = phase_projection(standard_potential(name), tau=0.01, n=32)
    c = table.projection.coeffs
    assert np.sum(np.abs(c) ** 2) <= 1.0 + 1e-10
    assert abs(c[32]) <= 1.0 + 1e-14  # l = 0 entry


@pytest.mark.parametrize("name", ["v1", "v2"])
def test_table_tends_to_identity_for_small_tau(name):
    table = phase_projection(standard_potential(name), tau=1e-8, n=32)
    ident = np.zeros(64, dtype=complex)
    ident[32] = 1.0
    assert np.linalg.norm(table.projection.coeffs - ident) <= 1e-6


def test_quadrature_certified_failure_carries_achieved():
    # a jump potential defeats the equidistant refinement at tight tol;
    # the failure must report how close it got
    with pytest.raises(QuadratureError) as info:
        quadrature_phase_coeffs(
            standard_potential("v1"), tau=0.01, n=64, tol=1e-12, max_points=2**16
        )
    assert 0.0 < info.value.achieved < 1e-3


def test_quadrature_determinism():
    a, _, _ = quadrature_phase_coeffs(standard_potential("v2"), tau=0.01, n=32)
    b, _, _ = quadrature_phase_coeffs(standard_potential("v2"), tau=0.01, n=32)
    np.testing.assert_array_equal(a, b)


def test_phase_projection_requires_positive_tau():
    with pytest.raises(ValueError):
        phase_projection(standard_potential("v1"), tau=0.0, n=16)
    with pytest.raises(ValueError):
        phase_projection(standard_potential("v1"), tau=0.01, n=0)


def test_callable_potential_goes_through_quadrature():
    pot = CallablePotential(BOX, fn=lambda x: np.cos(np.pi * x / 16.0) ** 2, key="cos2")
    table = phase_projection(pot, tau=0.05, n=16)
    want = oracle_phase_coeffs(pot, 0.05, 16)
    assert table.provenance == "quadrature"
    assert np.max(np.abs(table.projection.coeffs - want)) <= 1e-10


# ---------------------------------------------------------------------------
# cache


def test_phase_cache_returns_same_object():
    clear_phase_cache()
    v1 = standard_potential("v1")
    t1 = phase_factor_cache(v1, tau=0.01, n=32)
    t2 = phase_factor_cache(v1, tau=0.01, n=32)
    assert t1 is t2
    t3 = phase_factor_cache(v1, tau=0.02, n=32)
    assert t3 is not t1


def test_phase_cache_distinguishes_potentials():
    clear_phase_cache()
    t1 = phase_factor_cache(standard_potential("v1"), tau=0.01, n=16)
    t2 = phase_factor_cache(SquareWell(BOX, depth=5.0), tau=0.01, n=16)
    assert not np.array_equal(t1.projection.coeffs, t2.projection.coeffs)


def test_table_grid_values_are_cached_and_frozen():
    table = phase_projection(standard_potential("v1"), tau=0.01, n=16)
    a = table.values_on(64)
    b = table.values_on(64)
    assert a is b
    with pytest.raises((ValueError, RuntimeError)):
        a[0] = 0.0
