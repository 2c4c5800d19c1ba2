import math

import numpy as np
import pytest

from ambientlink.media import (
    Background,
    Bubble,
    Drude,
    Tunable,
    Inclusion,
    Metasurface,
    green0,
    green0_im_coincident,
    grad_green0,
    rho_of,
    minnaert_frequency,
    green_full,
)

BG = Background(c0=1.0)
OMEGA = 2.0 * math.pi  # wavelength 1 in the dimensionless system


def test_green0_full_period_phase():
    x = np.zeros(3)
    y = np.array([1.0, 0.0, 0.0])  # separation = wavelength
    g = green0(OMEGA, x, y, BG)
    assert g == pytest.approx(1.0 / (4.0 * math.pi), rel=1e-14)
    assert abs(g.imag) < 1e-15


def test_green0_half_wavelength_imag_zero():
    g = green0(OMEGA, np.zeros(3), np.array([0.5, 0.0, 0.0]), BG)
    assert abs(g.imag) < 1e-15


def test_green0_modulus_law():
    rng = np.random.default_rng(7)
    for _ in range(20):
        omega = rng.uniform(0.5, 20.0)
        x = rng.normal(size=3)
        y = rng.normal(size=3)
        r = np.linalg.norm(x - y)
        g = green0(omega, x, y, BG)
        assert abs(g) == pytest.approx(1.0 / (4.0 * math.pi * r), rel=1e-12)


def test_green0_coincident_refused():
    with pytest.raises(ValueError):
        green0(OMEGA, np.zeros(3), np.zeros(3), BG)


def test_green0_broadcasts_over_point_stacks():
    rng = np.random.default_rng(0)
    ys = rng.normal(size=(17, 3)) + 5.0
    x = np.zeros(3)
    g = green0(OMEGA, x, ys, BG)
    assert g.shape == (17,)
    for i in range(17):
        assert g[i] == pytest.approx(green0(OMEGA, x, ys[i], BG), rel=1e-14)


def test_green0_im_coincident_value():
    assert green0_im_coincident(2.0 * math.pi, BG) == pytest.approx(0.5, rel=1e-15)
    assert green0_im_coincident(1e-12, BG) < 1e-12


def test_green0_im_coincident_matches_small_separation_limit():
    r = 1e-4  # 1e-4 wavelengths
    g = green0(OMEGA, np.zeros(3), np.array([r, 0.0, 0.0]), BG)
    assert g.imag == pytest.approx(green0_im_coincident(OMEGA, BG), rel=1e-6)


def test_grad_green0_matches_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-6  # step of 1e-6 wavelengths at lambda = 1
    for _ in range(100):
        omega = rng.uniform(2.0, 12.0)
        lam = 2.0 * math.pi / omega
        x = rng.normal(size=3)
        z = x + rng.normal(size=3)
        if np.linalg.norm(x - z) < 0.3:
            z = x + np.array([0.7, 0.1, -0.2])
        grad = grad_green0(omega, x, z, BG)
        step = h * lam
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = step
            fd = (green0(omega, x, z + e, BG) - green0(omega, x, z - e, BG)) / (2 * step)
            assert grad[axis] == pytest.approx(fd, rel=1e-5)


def test_grad_green0_is_radial():
    x = np.array([0.3, -0.2, 1.0])
    z = x + np.array([1.3, -0.4, 0.22])
    grad = grad_green0(OMEGA, x, z, BG)
    direction = (z - x) / np.linalg.norm(z - x)
    cross = np.cross(grad, direction.astype(complex))
    assert np.abs(cross).max() < 1e-12 * np.abs(grad).max()


def test_grad_green0_equals_minus_first_argument_gradient():
    x = np.array([0.1, 0.5, -0.3])
    z = np.array([1.2, -0.4, 0.8])
    grad_z = grad_green0(OMEGA, x, z, BG)
    step = 1e-6
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = step
        fd_x = (green0(OMEGA, x + e, z, BG) - green0(OMEGA, x - e, z, BG)) / (2 * step)
        assert grad_z[axis] == pytest.approx(-fd_x, rel=1e-5)


# --- reflectivity models ---

AIR_WATER = dict(c1=340.0, delta=1.29e-3, c0=1482.0)


def test_bubble_minnaert_reflectivity_880Ri():
    for R in (1e-3, 0.05, 2.0):
        bub = Bubble(R=R, **AIR_WATER)
        omega_m = minnaert_frequency(bub)
        rho = rho_of(bub, omega_m)
        assert abs(rho.real) < 1e-6 * abs(rho)
        assert rho.imag / R == pytest.approx(880.602047823905, rel=1e-9)
        assert abs(rho.imag / R - 880.0) < 9.0


def test_bubble_at_shifted_frequency_extended_precision_oracle():
    # mpmath 50-digit evaluation of the same display formula, frozen:
    bub = Bubble(R=1e-3, **AIR_WATER)
    omega = 1.05 * minnaert_frequency(bub)
    rho = rho_of(bub, omega)
    assert rho.real == pytest.approx(-0.132304582456018925, rel=1e-9)
    assert rho.imag == pytest.approx(0.0193351232971404791, rel=1e-9)


def test_bubble_series_branch_continuous():
    # both sides of the series cutover alpha1 = 1e-3 track the exact value,
    # so no jump is introduced by the branch switch
    import mpmath as mp

    mp.mp.dps = 40
    bub = Bubble(R=1.0, c1=1.0, delta=0.01, c0=1.0)  # alpha1 = omega
    for omega in (1e-3 * (1 - 1e-6), 1e-3 * (1 + 1e-6)):
        a1 = mp.mpf(omega)
        num = 1 - a1 / mp.tan(a1)
        den = a1 / mp.tan(a1) - 1 + mp.mpf(bub.delta) - 1j * mp.mpf(bub.delta) * a1
        expected = 4 * mp.pi * num / den
        got = rho_of(bub, omega)
        assert got.real == pytest.approx(float(expected.real), rel=1e-9)
        assert got.imag == pytest.approx(float(expected.imag), rel=1e-9)


def test_bubble_small_alpha_series_accuracy():
    # against mpmath-style direct evaluation at moderate precision the series
    # branch must agree where both are well conditioned
    import mpmath as mp

    mp.mp.dps = 40
    bub = Bubble(R=0.5, c1=2.0, delta=0.05, c0=1.0)
    omega = 4e-4  # alpha1 = 1e-4, inside the series branch
    a1 = mp.mpf(omega) * mp.mpf(bub.R) / mp.mpf(bub.c1)
    num = 1 - a1 / mp.tan(a1)
    den = a1 / mp.tan(a1) - 1 + mp.mpf(bub.delta) - 1j * mp.mpf(bub.delta) * (
        mp.mpf(bub.c1) / mp.mpf(bub.c0)
    ) * a1
    expected = 4 * mp.pi * mp.mpf(bub.R) * num / den
    got = rho_of(bub, omega)
    assert got.real == pytest.approx(float(expected.real), rel=1e-10)
    assert got.imag == pytest.approx(float(expected.imag), rel=1e-10)


def test_bubble_pole_refused():
    bub = Bubble(R=1.0, c1=1.0, delta=0.01, c0=1.0)
    with pytest.raises(ValueError):
        rho_of(bub, math.pi)  # alpha1 = pi, cot pole


def test_minnaert_small_delta_rule():
    bub = Bubble(R=1.0, **AIR_WATER)
    omega_m = minnaert_frequency(bub)
    alpha_m = omega_m * bub.R / bub.c1
    assert alpha_m == pytest.approx(math.sqrt(3 * bub.delta), rel=0.01)
    assert alpha_m == pytest.approx(0.062201299722767263, rel=1e-10)


def test_minnaert_vanishes_with_delta():
    tiny = Bubble(R=1.0, c1=1.0, delta=1e-8, c0=1.0)
    assert minnaert_frequency(tiny) == pytest.approx(math.sqrt(3e-8), rel=1e-3)


def test_minnaert_grid_scan_oracle():
    # dense scan of tan(a)(1-delta) - a sign change, frozen root for delta=0.1
    bub = Bubble(R=2.0, c1=3.0, delta=0.1, c0=1.0)
    alpha_m = minnaert_frequency(bub) * bub.R / bub.c1
    assert alpha_m == pytest.approx(0.5422808854161556, rel=1e-10)
    grid = np.linspace(1e-6, math.pi / 2 - 1e-6, 2_000_001)
    vals = np.tan(grid) * (1 - bub.delta) - grid
    idx = np.nonzero(np.diff(np.sign(vals)) > 0)[0]
    assert len(idx) == 1
    assert abs(grid[idx[0]] - alpha_m) < 2 * (grid[1] - grid[0])


def test_drude_lossless_limit_real():
    d = Drude(omega_p=5.0, tau=1e30, volume=1e-6, c0=1.0)
    rho = rho_of(d, 3.0)
    assert abs(rho.imag) < 1e-25 * abs(rho.real)
    # explicit value: (omega^2/c0^2)(-(omega_p/omega)^2)|D| = -omega_p^2 |D|
    assert rho.real == pytest.approx(-25.0 * 1e-6, rel=1e-12)


def test_drude_lossy_positive_imag():
    d = Drude(omega_p=5.0, tau=0.3, volume=1e-6, c0=1.0)
    assert rho_of(d, 3.0).imag > 0


def test_tunable_levels():
    t = Tunable(rho1=0.4, re_rho=0.05)
    assert rho_of(t, OMEGA) == 0.05 + 0.0j
    assert rho_of(t.at_level(1), OMEGA) == 0.05 + 0.4j
    assert rho_of(t.at_level(1).at_level(0), OMEGA) == 0.05 + 0.0j


# --- full Green's function ---


def test_green_full_no_inclusions():
    x = np.zeros(3)
    y = np.array([2.2, 0.3, -1.0])
    assert green_full(OMEGA, x, y, [], BG) == green0(OMEGA, x, y, BG)


def test_green_full_one_inclusion_term_oracle():
    import mpmath as mp

    mp.mp.dps = 40
    x = np.array([0.0, 0.0, 0.0])
    y = np.array([1.7, -0.2, 0.4])
    z = np.array([3.0, 4.0, 1.0])
    rho = 0.03 + 0.1j
    inc = Inclusion(position=z, reflectivity=Tunable(rho1=0.1, re_rho=0.03, level=1))

    def g0(a, b):
        r = mp.sqrt(sum((mp.mpf(float(u)) - mp.mpf(float(v))) ** 2 for u, v in zip(a, b)))
        return mp.exp(1j * mp.mpf(OMEGA) * r) / (4 * mp.pi * r)

    expected = g0(x, y) + (mp.mpf(rho.real) + 1j * mp.mpf(rho.imag)) * g0(x, z) * g0(y, z)
    got = green_full(OMEGA, x, y, [inc], BG)
    assert got.real == pytest.approx(float(expected.real), rel=1e-12)
    assert got.imag == pytest.approx(float(expected.imag), rel=1e-12)


def test_green_full_reciprocity_including_dipole():
    rng = np.random.default_rng(3)
    for _ in range(25):
        x = rng.normal(size=3)
        y = rng.normal(size=3) + np.array([4.0, 0, 0])
        incs = []
        for _ in range(rng.integers(1, 4)):
            A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            M = 1e-3 * (A + A.T)  # symmetric
            incs.append(
                Inclusion(
                    position=rng.normal(size=3) + np.array([0, 6.0, 0]),
                    reflectivity=Tunable(rho1=0.2, re_rho=0.1, level=1),
                    polarization=M,
                )
            )
        omega = rng.uniform(2.0, 10.0)
        gxy = green_full(omega, x, y, incs, BG)
        gyx = green_full(omega, y, x, incs, BG)
        assert gxy == pytest.approx(gyx, rel=1e-12)


def test_green_full_refuses_inclusion_coincidence():
    z = np.array([1.0, 0.0, 0.0])
    inc = Inclusion(position=z, reflectivity=Tunable(rho1=0.1, level=1))
    with pytest.raises(ValueError):
        green_full(OMEGA, z, np.array([2.0, 0, 0]), [inc], BG)


def test_asymmetric_polarization_rejected():
    M = np.array([[1.0, 2.0, 0], [0.0, 1.0, 0], [0, 0, 1.0]], dtype=complex)
    with pytest.raises(ValueError):
        Inclusion(position=np.zeros(3), reflectivity=Tunable(rho1=0.1), polarization=M)


def test_metasurface_square_grid_layout():
    t = Tunable(rho1=0.5)
    surf = Metasurface.square_grid(8, 4.0, center=[0, 0, 10.0], normal=[0, 0, 1.0], tunable=t)
    assert surf.J == 64
    assert np.allclose(surf.positions.mean(axis=0), [0, 0, 10.0], atol=1e-12)
    # all in the z = 10 plane, spanning side D
    assert np.allclose(surf.positions[:, 2], 10.0)
    span = surf.positions[:, :2].max(axis=0) - surf.positions[:, :2].min(axis=0)
    assert np.allclose(span, 4.0)
    assert surf.spacing == pytest.approx(4.0 / 7.0)
    # switching levels switches every element's reflectivity
    incs = surf.at_level(1).inclusions()
    assert all(rho_of(i.reflectivity, OMEGA) == 0.5j for i in incs)
    incs0 = surf.inclusions()
    assert all(rho_of(i.reflectivity, OMEGA) == 0.0j for i in incs0)
