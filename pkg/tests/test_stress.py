"""Stress measures, disc radii, and their scaling/monotonicity properties."""

import math

import numpy as np
import pytest

from pfcert.stress import NoCertificate, compute_radii, compute_stress

from conftest import random_loads, random_ztilde


ZT = np.array([[0.1j]])


def test_two_bus_values():
    m = compute_stress(ZT, np.array([2.5 + 0j]))
    assert m.eta_complex[0] == pytest.approx(0.25j)
    assert m.xi[0] == pytest.approx(0.25)
    assert m.gamma[0] == pytest.approx(0.375)
    assert m.Delta == pytest.approx(0.375)
    assert m.stress_level == pytest.approx(0.5)  # gamma + 2 xi eta


def test_zero_load_all_zero():
    m = compute_stress(ZT, np.array([0j]))
    assert m.eta_max == m.xi_max == m.gamma_max == 0.0
    assert m.Delta == 1.0


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        compute_stress(ZT, np.array([1 + 0j, 2 + 0j]))


def test_maxima_consistent(rng):
    Zt = random_ztilde(rng, 6)
    m = compute_stress(Zt, random_loads(rng, 6))
    assert m.eta_max == m.eta_abs.max()
    assert m.xi_max == m.xi.max()
    assert m.gamma_max == m.gamma.max()
    assert m.Delta == pytest.approx((1 - m.gamma_max) ** 2 - 4 * m.xi_max**2 * m.eta_max**2, rel=1e-12)


def test_triangle_inequality_when_sigma_is_total(rng):
    for n in (2, 5, 11):
        Zt = random_ztilde(rng, n)
        S = random_loads(rng, n)
        m = compute_stress(Zt, S)
        assert np.all(m.eta_abs <= m.xi + 1e-14)


def test_linear_scaling(rng):
    Zt = random_ztilde(rng, 4)
    S = random_loads(rng, 4)
    m1 = compute_stress(Zt, S)
    lam = 1.7
    m2 = compute_stress(Zt, lam * S)
    assert np.allclose(m2.eta_abs, lam * m1.eta_abs, rtol=1e-12)
    assert np.allclose(m2.xi, lam * m1.xi, rtol=1e-12)
    expected_gamma = 2 * lam * (m1.xi + m1.eta_complex.real) - lam**2 * (m1.xi**2 + m1.eta_abs**2)
    assert np.allclose(m2.gamma, expected_gamma, rtol=1e-10)


def test_monotone_fused_stress_on_rescaled_directions(rng):
    """With xi - eta normalized to 1, gamma + 2 xi eta is nondecreasing on [0, 1]
    and reaches at least 1 at the endpoint."""
    checked = 0
    for _ in range(40):
        n = int(rng.integers(2, 8))
        Zt = random_ztilde(rng, n)
        S = random_loads(rng, n)
        m = compute_stress(Zt, S)
        gap = m.xi_max - m.eta_max
        if gap <= 1e-9 * m.xi_max:
            continue
        s = S / gap  # now xi(s) - eta(s) == 1
        values = []
        for lam in np.linspace(0.0, 1.0, 100):
            values.append(compute_stress(Zt, lam * s).stress_level)
        diffs = np.diff(values)
        assert np.all(diffs >= -1e-12)
        assert values[-1] >= 1.0 - 1e-12
        checked += 1
    assert checked >= 20


def test_radii_two_bus():
    radii = compute_radii(compute_stress(ZT, np.array([2.5 + 0j])))
    assert radii.r_lo == pytest.approx(0.317836, abs=5e-6)
    assert radii.r_hi == pytest.approx(3.146264, abs=5e-6)
    assert not radii.degenerate


def test_radii_root_product(rng):
    for _ in range(20):
        n = int(rng.integers(1, 7))
        Zt = random_ztilde(rng, n)
        S = 0.3 * random_loads(rng, n)
        m = compute_stress(Zt, S)
        if not (m.stress_level < 1.0) or m.eta_max == 0:
            continue
        radii = compute_radii(m)
        assert radii.r_lo * radii.r_hi == pytest.approx(m.eta_max / m.xi_max, rel=1e-9)
        assert 0 < radii.r_lo <= radii.r_hi


def test_radii_degenerate_zero_load():
    radii = compute_radii(compute_stress(ZT, np.array([0j])))
    assert radii.degenerate
    assert radii.r_lo == 0.0
    assert math.isinf(radii.r_hi)


def test_radii_precondition_violated():
    # gamma + 2 xi eta = 0.2 p reaches exactly 1 at p = 5
    with pytest.raises(NoCertificate):
        compute_radii(compute_stress(ZT, np.array([5.0 + 0j])))


def test_case9_base_loading_stress():
    from pfcert.limits import prepare
    from pfcert.net_model import load_case_file

    from conftest import case_path

    case = load_case_file(case_path("case9.m"))
    red, S = prepare(case)
    m = compute_stress(red.Ztilde, S)
    assert m.xi_max == pytest.approx(0.142759, abs=1e-5)  # = 1/(4 * 1.7512)
