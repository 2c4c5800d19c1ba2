"""Cross-spectral kernel, surface-integral identities, and closed-form link predictions.

The central object is the kernel

    Q(omega, xr, xrp) = integral over the source shell of
                        conj(G(omega, xr, y)) G(omega, xrp, y) dsigma(y)

which fixes the second-order statistics of the noise-driven field at the
receivers.  This module evaluates Q two independent ways (surface quadrature
against the five-term point-scatterer expansion), verifies the standard and
generalized surface-integral identities that connect them, and assembles every
closed-form prediction used by the link: ECSD mean terms, variance, the array
phase-sum bound via Fresnel integrals, measurement-noise inflation, and the
signal-to-noise budget.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np
from scipy.special import erf, fresnel as _scipy_fresnel

from .media import (
    Background,
    Inclusion,
    Metasurface,
    ReflectivityModel,
    grad_green0,
    green0,
    green0_im_coincident,
    rho_of,
)
from .scene import Scene, make_shell

__all__ = [
    "RegimeError",
    "RegimeWarning",
    "NoiseSpectrum",
    "WindowSpec",
    "QTerms",
    "LinkBudget",
    "q_quadrature",
    "q_expansion",
    "hk_residual_standard",
    "hk_residual_generalized",
    "mean_general",
    "mean_closed_form",
    "rho_B",
    "r_B1",
    "r_B2",
    "fresnel_cs",
    "fresnel_bound_check",
    "var_closed_form",
    "var_general",
    "snr_budget",
    "measurement_noise_var",
]


class RegimeError(ValueError):
    """An operating-regime precondition is violated hard enough to refuse."""


class RegimeWarning(UserWarning):
    """An asymptotic assumption is strained; results may degrade."""


# ---------------------------------------------------------------------------
# noise spectrum and windows
# ---------------------------------------------------------------------------

_SPECTRUM_SHAPES = ("boxcar", "raised_cosine", "truncated_gaussian")


@dataclass(frozen=True)
class NoiseSpectrum:
    """Narrowband two-sided power spectrum F(omega) = (1/B) F0((|omega|-omega0)/B).

    The base shape F0 is even, nonnegative, compactly supported, and
    normalized to integral pi so that the time-domain correlation at lag zero
    is exactly one (both frequency bands counted).
    """

    omega0: float
    B: float
    shape: str = "boxcar"

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not self.B > 0:
            raise ValueError("B must be positive")
        if self.shape not in _SPECTRUM_SHAPES:
            raise ValueError(
                "shape must be one of %s (was %r)" % (_SPECTRUM_SHAPES, self.shape)
            )
        ratio = self.B / self.omega0
        if ratio > 0.2:
            raise RegimeError(
                "narrowband assumption broken: B/omega0 = %.3g > 0.2" % ratio
            )
        if ratio > 0.05:
            warnings.warn(
                "B/omega0 = %.3g strains the narrowband assumption" % ratio,
                RegimeWarning,
                stacklevel=2,
            )

    @property
    def s_max(self) -> float:
        """Half-width of the support of F0 in band units."""
        return 1.0 if self.shape == "truncated_gaussian" else 0.5

    def f0(self, s):
        """Base shape F0(s) on its compact support, integral pi."""
        s = np.asarray(s, dtype=float)
        if self.shape == "boxcar":
            out = np.where(np.abs(s) <= 0.5, math.pi, 0.0)
        elif self.shape == "raised_cosine":
            out = np.where(np.abs(s) <= 0.5, math.pi * (1.0 + np.cos(2 * math.pi * s)), 0.0)
        else:
            # integral of exp(-8 s^2) over [-1, 1]
            mass = math.sqrt(math.pi / 8.0) * erf(math.sqrt(8.0))
            out = np.where(np.abs(s) <= 1.0, (math.pi / mass) * np.exp(-8.0 * s**2), 0.0)
        return out if out.ndim else float(out)

    def f_hat(self, omega):
        """Two-sided spectrum; (1/2 pi) integral F dohmega = 1."""
        omega = np.asarray(omega, dtype=float)
        out = self.f0((np.abs(omega) - self.omega0) / self.B) / self.B
        return out if np.ndim(out) else float(out)

    def f0_cdf(self, s):
        """Running integral of F0 from the left support edge, closed form."""
        s = np.asarray(s, dtype=float)
        if self.shape == "boxcar":
            out = math.pi * np.clip(s + 0.5, 0.0, 1.0)
        elif self.shape == "raised_cosine":
            sc = np.clip(s, -0.5, 0.5)
            out = math.pi * (sc + 0.5 + np.sin(2 * math.pi * sc) / (2 * math.pi))
        else:
            mass = math.sqrt(math.pi / 8.0) * erf(math.sqrt(8.0))
            sc = np.clip(s, -1.0, 1.0)
            root8 = math.sqrt(8.0)
            out = (math.pi / mass) * math.sqrt(math.pi / 32.0) * (erf(root8 * sc) + erf(root8))
        return out if out.ndim else float(out)

    def band_mass(self, w_lo, w_hi):
        """Integral of the spectrum over [w_lo, w_hi] in the positive band."""
        s_lo = (np.asarray(w_lo, dtype=float) - self.omega0) / self.B
        s_hi = (np.asarray(w_hi, dtype=float) - self.omega0) / self.B
        out = self.f0_cdf(s_hi) - self.f0_cdf(s_lo)
        return out if np.ndim(out) else float(out)

    def band_nodes(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes/weights in band units s over the F0 support."""
        x, w = np.polynomial.legendre.leggauss(n)
        return self.s_max * x, self.s_max * w


_WINDOW_SHAPES = ("triangle", "gaussian")


def _window_funcs(shape: str):
    if shape == "triangle":
        f = lambda t: np.maximum(0.0, 1.0 - np.abs(t))
        # transform of (1-|t|)+ is sinc(w/2)^2 with sinc(x) = sin(x)/x
        fhat = lambda w: np.sinc(np.asarray(w, dtype=float) / (2.0 * math.pi)) ** 2
        l2 = 2.0 / 3.0
    elif shape == "gaussian":
        f = lambda t: np.exp(-np.asarray(t, dtype=float) ** 2) / math.sqrt(math.pi)
        fhat = lambda w: np.exp(-np.asarray(w, dtype=float) ** 2 / 4.0)
        l2 = 1.0 / math.sqrt(2.0 * math.pi)
    else:
        raise ValueError("window shape must be one of %s (was %r)" % (_WINDOW_SHAPES, shape))
    return f, fhat, l2


@dataclass(frozen=True)
class WindowSpec:
    """Averaging windows of the ECSD: slow window phi_T, lag window psi_T'.

    Both unit-integral; both default transforms are real and nonnegative.
    """

    T: float
    Tprime: float
    phi_shape: str = "triangle"
    psi_shape: str = "gaussian"

    def __post_init__(self):
        if not self.T > 0 or not self.Tprime > 0:
            raise ValueError("window scales must be positive")
        _window_funcs(self.phi_shape)
        _window_funcs(self.psi_shape)

    def phi(self, t):
        return _window_funcs(self.phi_shape)[0](t)

    def psi(self, t):
        return _window_funcs(self.psi_shape)[0](t)

    def phi_hat(self, w):
        return _window_funcs(self.phi_shape)[1](w)

    def psi_hat(self, w):
        return _window_funcs(self.psi_shape)[1](w)

    @property
    def phi_l2(self) -> float:
        return _window_funcs(self.phi_shape)[2]

    @property
    def psi_l2(self) -> float:
        return _window_funcs(self.psi_shape)[2]


# ---------------------------------------------------------------------------
# the kernel Q: quadrature and expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QTerms:
    """Five summands of the kernel expansion, in order.

    term1: (c0/w) Im G0(xr, xrp)                        background
    term2: (c0/w) sum_j Im(rho G0(xr,z_j) G0(xrp,z_j))  scattered, reciprocal
    term3: -(c0/w) sum_j Im(rho) conj(G0(xr,z_j)) G0(xrp,z_j)   dissipative
    term4: dipole analogue of term2 with M
    term5: dipole analogue of term3 with Im M
    """

    term1: complex
    term2: complex = 0.0 + 0.0j
    term3: complex = 0.0 + 0.0j
    term4: complex = 0.0 + 0.0j
    term5: complex = 0.0 + 0.0j

    def total(self) -> complex:
        return self.term1 + self.term2 + self.term3 + self.term4 + self.term5


def _g0_or_coincident(omega, a, b, bg) -> complex:
    if np.array_equal(np.asarray(a, dtype=float), np.asarray(b, dtype=float)):
        return 1j * green0_im_coincident(omega, bg)  # real part dropped with r -> 0
    return complex(green0(omega, a, b, bg))


def q_expansion(omega: float, xr, xrp, inclusions: Sequence[Inclusion], bg: Background) -> QTerms:
    """Five-term expansion of the kernel Q, first order in rho and M.

    Coincident receivers are allowed; the background term then takes the
    coincident imaginary part omega/(4 pi c0).
    """
    c_over_w = bg.c0 / omega
    xr = np.asarray(xr, dtype=float)
    xrp = np.asarray(xrp, dtype=float)
    if np.array_equal(xr, xrp):
        term1 = complex(c_over_w * green0_im_coincident(omega, bg))
    else:
        term1 = complex(c_over_w * green0(omega, xr, xrp, bg).imag)
    t2 = t3 = t4 = t5 = 0.0 + 0.0j
    for inc in inclusions:
        z = inc.position
        rho = rho_of(inc.reflectivity, omega)
        gx = complex(green0(omega, xr, z, bg))
        gy = complex(green0(omega, xrp, z, bg))
        t2 += c_over_w * (rho * gx * gy).imag
        t3 += -c_over_w * rho.imag * np.conj(gx) * gy
        M = inc.polarization_at(omega)
        if M is not None:
            dgx = grad_green0(omega, xr, z, bg)
            dgy = grad_green0(omega, xrp, z, bg)
            t4 += c_over_w * complex(dgx @ M @ dgy).imag
            t5 += -c_over_w * complex(np.conj(dgx) @ M.imag @ dgy)
    return QTerms(term1=term1, term2=t2, term3=t3, term4=t4, term5=t5)


@functools.lru_cache(maxsize=8)
def _cached_shell(L_src: float, n_nodes: int):
    return make_shell(L_src, n_nodes)


def nyquist_node_count(omega: float, L_src: float, bg: Background) -> int:
    """Quadrature node count giving 4 nodes per squared wavelength of shell area."""
    lam = 2.0 * math.pi * bg.c0 / omega
    return int(math.ceil(4.0 * 4.0 * math.pi * L_src**2 / lam**2))


def _field_at_nodes(omega, x, nodes, inclusions, bg) -> np.ndarray:
    """green_full(omega, x, y_n) for all shell nodes y_n, vectorized over n."""
    vals = green0(omega, x, nodes, bg).astype(complex)
    for inc in inclusions:
        z = inc.position
        rho = rho_of(inc.reflectivity, omega)
        gxz = complex(green0(omega, x, z, bg))
        vals += rho * gxz * green0(omega, z, nodes, bg)
        M = inc.polarization_at(omega)
        if M is not None:
            a = grad_green0(omega, x, z, bg) @ M  # (3,)
            vals += grad_green0(omega, nodes, z, bg) @ a
    return vals


def q_quadrature(omega: float, xr, xrp, scene: Scene, n_nodes: int) -> complex:
    """Surface-quadrature evaluation of the kernel Q over the scene's shell radius.

    Refuses below the Nyquist node density of 4 nodes per squared wavelength
    of shell surface; the shell must enclose the scene with slack.
    """
    L_src = scene.shell.L_src
    required = nyquist_node_count(omega, L_src, scene.bg)
    if n_nodes < required:
        raise RegimeError(
            "n_nodes = %d is below the Nyquist density for L_src = %g "
            "(need >= %d)" % (n_nodes, L_src, required)
        )
    diam = scene.scene_diameter()
    if diam > 0 and L_src < 5.0 * diam:
        raise RegimeError(
            "shell radius %g must exceed 5x the scene diameter %g" % (L_src, diam)
        )
    shell = _cached_shell(L_src, n_nodes)
    incs = scene.inclusions()
    fr = _field_at_nodes(omega, np.asarray(xr, dtype=float), shell.nodes, incs, scene.bg)
    if np.array_equal(np.asarray(xr, dtype=float), np.asarray(xrp, dtype=float)):
        fp = fr
    else:
        fp = _field_at_nodes(omega, np.asarray(xrp, dtype=float), shell.nodes, incs, scene.bg)
    return complex(np.sum(shell.weights * np.conj(fr) * fp))


def hk_residual_standard(omega, x, y, L_src, n_nodes, bg: Background) -> float:
    """Residual of the standard surface-integral identity for the free kernel.

    |(omega/c0) * shell integral of conj(G0(x,.)) G0(y,.) - Im G0(x, y)|,
    which vanishes as the shell radius grows.
    """
    required = nyquist_node_count(omega, L_src, bg)
    if n_nodes < required:
        raise RegimeError(
            "n_nodes = %d is below the Nyquist density for L_src = %g "
            "(need >= %d)" % (n_nodes, L_src, required)
        )
    shell = _cached_shell(L_src, n_nodes)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gx = green0(omega, x, shell.nodes, bg)
    gy = gx if np.array_equal(x, y) else green0(omega, y, shell.nodes, bg)
    val = (omega / bg.c0) * np.sum(shell.weights * np.conj(gx) * gy)
    target = _g0_or_coincident(omega, x, y, bg).imag
    return float(abs(val - target))


def hk_residual_generalized(omega, xr, xrp, scene: Scene, n_nodes: int) -> float:
    """Residual of the generalized identity: quadrature kernel vs expansion.

    Carries an O(rho^2) floor because the expansion drops quadratic
    scattering terms that the quadrature retains.
    """
    q_num = q_quadrature(omega, xr, xrp, scene, n_nodes)
    q_exp = q_expansion(omega, xr, xrp, scene.inclusions(), scene.bg).total()
    return float(abs(q_num - q_exp))


# ---------------------------------------------------------------------------
# ECSD mean
# ---------------------------------------------------------------------------


def _q_on_band(omega_grid, xr, xrp, inclusions, bg) -> np.ndarray:
    return np.array(
        [q_expansion(w, xr, xrp, inclusions, bg).total() for w in omega_grid],
        dtype=complex,
    )


def mean_general(
    omega: float,
    xr,
    xrp,
    scene: Scene,
    spectrum: NoiseSpectrum,
    windows: WindowSpec,
    n_quad: int = 129,
) -> complex:
    """Mean ECSD by direct band quadrature of Q F psi_hat; independent of T.

    Both frequency bands are included; the mirrored band only matters when
    the lag window is wide enough to reach across 2*omega0.
    """
    if n_quad < 64:
        raise RegimeError("need at least 64 quadrature nodes across the band")
    s, w = spectrum.band_nodes(n_quad)
    f0 = spectrum.f0(s)
    incs = scene.inclusions()
    w1 = spectrum.omega0 + spectrum.B * s
    q = _q_on_band(w1, xr, xrp, incs, scene.bg)
    pos = np.sum(w * f0 * q * windows.psi_hat(windows.Tprime * (omega - w1)))
    neg = np.sum(w * f0 * np.conj(q) * windows.psi_hat(windows.Tprime * (omega + w1)))
    return complex((pos + neg) / (2.0 * math.pi))


def rho_B(model: ReflectivityModel, spectrum: NoiseSpectrum, windows: WindowSpec, n_quad: int = 257) -> complex:
    """Band-averaged reflectivity: integral of rho(omega0 + B s) F0(s) psi_hat ds.

    The lag-window argument is Tprime * B * s, which is just s in the matched
    regime Tprime = 1/B where this average appears.
    """
    s, w = spectrum.band_nodes(n_quad)
    vals = np.array([rho_of(model, spectrum.omega0 + spectrum.B * float(si)) for si in s])
    psi = windows.psi_hat(windows.Tprime * spectrum.B * s)
    return complex(np.sum(w * spectrum.f0(s) * psi * vals))


def r_B1(surface: Metasurface, xr, omega0: float, bg: Background) -> complex:
    """Normalized array phase sum (1/J) sum_j exp(2 i (omega0/c0) |xr - z_j|)."""
    d = np.linalg.norm(surface.positions - np.asarray(xr, dtype=float), axis=1)
    return complex(np.mean(np.exp(2j * (omega0 / bg.c0) * d)))


def r_B2(
    model: ReflectivityModel,
    spectrum: NoiseSpectrum,
    windows: WindowSpec,
    L: float,
    c0: float = 1.0,
    n_quad: int = 257,
) -> complex:
    """Range-phased band average: integral of rho e^{2iBLs/c0} F0 psi_hat ds."""
    s, w = spectrum.band_nodes(n_quad)
    vals = np.array([rho_of(model, spectrum.omega0 + spectrum.B * float(si)) for si in s])
    phase = np.exp(2j * spectrum.B * L * s / c0)
    psi = windows.psi_hat(windows.Tprime * spectrum.B * s)
    return complex(np.sum(w * spectrum.f0(s) * psi * vals * phase))


def _closed_form_preconditions(scene: Scene, spectrum: NoiseSpectrum, windows: WindowSpec):
    """Raise listing hard asymptotic violations; warn on strained ones."""
    problems = []
    lam0 = 2.0 * math.pi * scene.bg.c0 / spectrum.omega0
    sep = scene.receivers.separation
    if abs(sep - lam0 / 2.0) > 1e-6 * (lam0 / 2.0):
        problems.append(
            "receiver spacing %g is not the half wavelength %g" % (sep, lam0 / 2.0)
        )
    if abs(windows.Tprime - 1.0 / spectrum.B) > 1e-9 / spectrum.B:
        problems.append(
            "lag window Tprime = %g must equal 1/B = %g" % (windows.Tprime, 1.0 / spectrum.B)
        )
    if scene.surface is not None:
        D = scene.surface.D
        L = scene.pta_distance()
        if D < 2.0 * lam0:
            problems.append("array side D = %g is below 2 wavelengths" % D)
        elif D < 5.0 * lam0:
            warnings.warn(
                "array side D = %g is only %.1f wavelengths across" % (D, D / lam0),
                RegimeWarning,
                stacklevel=3,
            )
        if L < 2.0 * D:
            problems.append("range L = %g is below 2 array sides" % L)
        elif L < 5.0 * D:
            warnings.warn(
                "range L = %g is only %.1f array sides away" % (L, L / D),
                RegimeWarning,
                stacklevel=3,
            )
    if problems:
        raise RegimeError("closed form out of regime: " + "; ".join(problems))


def mean_closed_form(
    scene: Scene, spectrum: NoiseSpectrum, windows: WindowSpec
) -> Tuple[complex, complex, complex]:
    """Paraxial closed-form mean ECSD at the carrier, as three terms.

    mean_I:   background band term, (1/(8 pi^2)) [int F0 s^2 psi_hat ds] (B/omega0)^2
    mean_II:  array phase-sum bias, (J lam0 / (64 pi^4 L^2)) Im(R_B1 R_B2 e^{-i pi cos a})
    mean_III: dissipative signal,  -(J lam0 / (64 pi^4 L^2)) Im(rho_B) e^{-i pi cos a}

    Uses the scene's current reflectivity level.  Preconditions: half-wavelength
    spacing, Tprime = 1/B, paraxial geometry.
    """
    _closed_form_preconditions(scene, spectrum, windows)
    s, w = spectrum.band_nodes(257)
    moment2 = float(np.sum(w * spectrum.f0(s) * s**2 * windows.psi_hat(s)))
    b_ratio = spectrum.B / spectrum.omega0
    mean_i = complex(moment2 * b_ratio**2 / (8.0 * math.pi**2))
    if scene.surface is None:
        return mean_i, 0.0 + 0.0j, 0.0 + 0.0j
    lam0 = 2.0 * math.pi * scene.bg.c0 / spectrum.omega0
    L = scene.pta_distance()
    J = scene.surface.J
    geom = J * lam0 / (64.0 * math.pi**4 * L**2)
    phase = np.exp(-1j * math.pi * math.cos(scene.alpha()))
    model = scene.surface.tunable
    rb = rho_B(model, spectrum, windows)
    rb1 = r_B1(scene.surface, scene.receivers.xr, spectrum.omega0, scene.bg)
    rb2 = r_B2(model, spectrum, windows, L, scene.bg.c0)
    mean_ii = complex(geom * (rb1 * rb2 * phase).imag)
    mean_iii = complex(-geom * rb.imag * phase)
    return mean_i, mean_ii, mean_iii


# ---------------------------------------------------------------------------
# Fresnel integrals and the array phase-sum bound
# ---------------------------------------------------------------------------


def fresnel_cs(d):
    """Fresnel integrals C(d) = int_0^d cos(t^2) dt and S(d) = int_0^d sin(t^2) dt.

    Evaluated through the scaled error-function route; absolute accuracy
    far better than 1e-10 over the real line.  Both are odd; both approach
    sqrt(pi/8) as d grows.
    """
    d = np.asarray(d, dtype=float)
    scale = math.sqrt(2.0 / math.pi)
    s_norm, c_norm = _scipy_fresnel(d * scale)
    factor = 1.0 / scale
    C = factor * c_norm
    S = factor * s_norm
    if C.ndim == 0:
        return float(C), float(S)
    return C, S


def fresnel_bound_check(
    surface: Metasurface, xr, omega0: float, bg: Background
) -> Tuple[float, float]:
    """|R_B1| by direct summation against the dense-array bound 4 lam0 L/(pi D^2).

    Regime gates L^2 >= 10 D^2, D^2 >= 10 L lam0, and near-normal incidence
    are advisory: violations warn but both numbers are still returned.
    """
    lam0 = 2.0 * math.pi * bg.c0 / omega0
    xr = np.asarray(xr, dtype=float)
    L = float(np.linalg.norm(surface.center - xr))
    D = surface.D
    if L**2 < 10.0 * D**2:
        warnings.warn(
            "bound regime strained: L^2 = %g < 10 D^2 = %g" % (L**2, 10 * D**2),
            RegimeWarning,
            stacklevel=2,
        )
    if D**2 < 10.0 * L * lam0:
        warnings.warn(
            "bound regime strained: D^2 = %g < 10 L lam0 = %g" % (D**2, 10 * L * lam0),
            RegimeWarning,
            stacklevel=2,
        )
    los = (surface.center - xr) / L
    if abs(float(los @ surface.normal)) < 0.95:
        warnings.warn("incidence is far from array-normal", RegimeWarning, stacklevel=2)
    bound = 4.0 * lam0 * L / (math.pi * D**2)
    return float(abs(r_B1(surface, xr, omega0, bg))), float(bound)


# ---------------------------------------------------------------------------
# ECSD variance
# ---------------------------------------------------------------------------


def var_closed_form(spectrum: NoiseSpectrum, windows: WindowSpec, n_quad: int = 257) -> float:
    """Large-BT variance of the ECSD at the carrier.

    (||phi||^2 / (32 pi^3 B T)) int F0(s)^2 |psi_hat(s)|^2 ds, with
    Tprime = 1/B implied by the regime this limit describes.
    """
    bt = spectrum.B * windows.T
    if bt < 10.0:
        raise RegimeError("BT = %g is too small for the large-BT variance" % bt)
    if bt < 100.0:
        warnings.warn("BT = %g below 100; variance limit degrades" % bt, RegimeWarning, stacklevel=2)
    s, w = spectrum.band_nodes(n_quad)
    mass = float(np.sum(w * spectrum.f0(s) ** 2 * np.abs(windows.psi_hat(s)) ** 2))
    return windows.phi_l2 * mass / (32.0 * math.pi**3 * bt)


class _QInterp:
    """Linear interpolant of Q(omega) for one receiver pair over the band."""

    def __init__(self, omega_grid, xr, xrp, inclusions, bg):
        self.grid = np.asarray(omega_grid, dtype=float)
        self.vals = _q_on_band(self.grid, xr, xrp, inclusions, bg)

    def __call__(self, omega):
        """Evaluate at |omega|, conjugating for negative frequencies."""
        omega = np.asarray(omega, dtype=float)
        re = np.interp(np.abs(omega), self.grid, self.vals.real)
        im = np.interp(np.abs(omega), self.grid, self.vals.imag)
        return re + 1j * np.sign(omega) * im


def var_general(
    omega: float,
    xr,
    xrp,
    scene: Scene,
    spectrum: NoiseSpectrum,
    windows: WindowSpec,
    n_v: int = 96,
    n_u: int = 513,
    include_cross: bool = True,
) -> float:
    """Variance of the ECSD by direct double-band quadrature.

    The integrand rides a ridge of width 1/T along omega1 = omega2, so the
    integration runs in rotated coordinates u = omega1 - omega2 (fine grid)
    and v = (omega1 + omega2)/2 (band grid).  Both summands are kept: the
    |psi_hat|^2 diagonal term and the psi_hat conj(psi_hat) cross term, the
    latter negligible at the carrier for narrowband spectra.
    """
    if n_v < 64 or n_u < 64:
        raise RegimeError("variance quadrature needs at least a 64 x 64 band grid")
    T, Tp = windows.T, windows.Tprime
    # |phi_hat(Tu)|^2 decays by u^-4 for the triangle, so 60/T captures its
    # mass; beyond the band width 2 B s_max the spectral product vanishes.
    u_max = min(60.0 / T, 2.0 * spectrum.B * spectrum.s_max)
    u = np.linspace(-u_max, u_max, n_u)
    du = u[1] - u[0]
    wu = np.full(n_u, du)
    wu[[0, -1]] = du / 2.0
    phi2 = np.abs(windows.phi_hat(T * u)) ** 2

    half = spectrum.B * spectrum.s_max + u_max
    incs = scene.inclusions()
    grid = np.linspace(spectrum.omega0 - half, spectrum.omega0 + half, 1201)
    q_rr = _QInterp(grid, xr, xr, incs, scene.bg)
    q_pp = _QInterp(grid, xrp, xrp, incs, scene.bg)
    q_rp = _QInterp(grid, xr, xrp, incs, scene.bg)

    sv, wv = np.polynomial.legendre.leggauss(n_v)
    total = 0.0
    for band_sign in (1.0, -1.0):
        center = band_sign * spectrum.omega0
        v = center + spectrum.B * spectrum.s_max * sv
        wv_scaled = spectrum.B * spectrum.s_max * wv
        w1 = v[:, None] + u[None, :] / 2.0
        w2 = v[:, None] - u[None, :] / 2.0
        ff = spectrum.f_hat(w1) * spectrum.f_hat(w2)
        psi_minus = windows.psi_hat(Tp * (omega - v))
        diag = q_rr(w1) * q_pp(w2) * (np.abs(psi_minus) ** 2)[:, None]
        kern = diag
        if include_cross:
            psi_plus = windows.psi_hat(Tp * (omega + v))
            cross = q_rp(w1) * np.conj(q_rp(w2)) * (psi_minus * np.conj(psi_plus))[:, None]
            kern = kern + cross
        total += float(
            np.real(np.sum((wv_scaled[:, None] * wu[None, :]) * ff * phi2[None, :] * kern))
        )
    return total / (4.0 * math.pi**2)


# ---------------------------------------------------------------------------
# link budget and measurement noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkBudget:
    """Closed-form link predictions for one scene and modulation depth."""

    mean_I: complex
    mean_II: complex
    mean_III: complex
    variance: float
    snr_ratio: float
    rho_B: complex
    R_B1: complex
    R_B2: complex
    fresnel_bound: float
    implied_rate: float   # bits/s at the nominal operating point rho_B ~ lam0
    scheme_rate: float    # bits/s of the configured schedule, 1/(4T)

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")
        if not self.fresnel_bound > 0:
            raise ValueError("fresnel_bound must be positive")


def snr_budget(
    scene: Scene, spectrum: NoiseSpectrum, windows: WindowSpec, rho1: float
) -> LinkBudget:
    """Assemble the closed-form link budget at modulation depth rho1.

    snr_ratio compares the switched-on signal mean against the ECSD noise,
    |mean_III| / sqrt(variance); the implied rate is the throughput at SNR^2 = 10
    for a nominal band-averaged reflectivity of one wavelength.
    """
    if scene.surface is None:
        raise ValueError("snr_budget needs a scene with a metasurface")
    surface_on = replace(
        scene.surface, tunable=replace(scene.surface.tunable, rho1=rho1, level=1)
    )
    scene_on = replace(scene, surface=surface_on)
    mean_i, mean_ii, mean_iii = mean_closed_form(scene_on, spectrum, windows)
    variance = var_closed_form(spectrum, windows)
    snr = abs(mean_iii) / math.sqrt(variance) if variance > 0 else math.inf
    model = surface_on.tunable
    lam0 = 2.0 * math.pi * scene.bg.c0 / spectrum.omega0
    L = scene.pta_distance()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        rb1_abs, bound = fresnel_bound_check(
            scene.surface, scene.receivers.xr, spectrum.omega0, scene.bg
        )
    rate = spectrum.B * scene.surface.J**2 * lam0**4 / (10.0 * L**4)
    return LinkBudget(
        mean_I=mean_i,
        mean_II=mean_ii,
        mean_III=mean_iii,
        variance=variance,
        snr_ratio=snr,
        rho_B=rho_B(model, spectrum, windows),
        R_B1=r_B1(scene.surface, scene.receivers.xr, spectrum.omega0, scene.bg),
        R_B2=r_B2(model, spectrum, windows, L, scene.bg.c0),
        fresnel_bound=bound,
        implied_rate=rate,
        scheme_rate=1.0 / (4.0 * windows.T),
    )


def measurement_noise_var(sigma_meas: float, t_meas: float, windows: WindowSpec) -> float:
    """Additive ECSD variance from short-coherence measurement noise.

    ||phi||^2 ||psi||^2 sigma^4 t_meas^2 / (T Tprime), valid for
    t_meas << Tprime (enforced at a factor of 10).
    """
    if sigma_meas == 0.0:
        return 0.0
    if not t_meas > 0:
        raise ValueError("t_meas must be positive")
    if t_meas > windows.Tprime / 10.0:
        raise RegimeError(
            "t_meas = %g too close to Tprime = %g for the short-coherence formula"
            % (t_meas, windows.Tprime)
        )
    return (
        windows.phi_l2
        * windows.psi_l2
        * sigma_meas**4
        * t_meas**2
        / (windows.T * windows.Tprime)
    )
