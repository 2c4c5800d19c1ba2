"""Helmholtz Green's functions and resonant point-scatterer reflectivity models.

The background medium is homogeneous with wave speed ``c0``.  Small resonant
inclusions enter the field expansion through a complex, frequency dependent
reflectivity ``rho(omega)`` with units of length, plus an optional symmetric
3x3 polarization tensor ``M(omega)`` that weights a dipole (gradient times
gradient) correction.  Only single scattering is kept: no ``rho**2`` or
inter-inclusion coupling terms anywhere in this package.

Positions are plain arrays of shape ``(3,)``; the point-wise operations
broadcast over trailing stacks of points, e.g. ``y`` of shape ``(n, 3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "Background",
    "Bubble",
    "Drude",
    "Tunable",
    "Inclusion",
    "Metasurface",
    "green0",
    "green0_im_coincident",
    "grad_green0",
    "rho_of",
    "minnaert_frequency",
    "drude_epsilon",
    "drude_mu",
    "green_full",
]

Vec3 = np.ndarray

_FOUR_PI = 4.0 * math.pi


def _as_points(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 3:
        raise ValueError("positions must have 3 components (was shape %s)" % (a.shape,))
    if not np.all(np.isfinite(a)):
        raise ValueError("positions must be finite")
    return a


@dataclass(frozen=True)
class Background:
    """Homogeneous background medium."""

    c0: float = 1.0

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("c0 must be positive (was %g)" % self.c0)

    def wavelength(self, omega: float) -> float:
        return 2.0 * math.pi * self.c0 / omega


@dataclass(frozen=True)
class Bubble:
    """Gas bubble in a liquid: monopole resonance reflectivity.

    Parameters
    ----------
    R : float
        Bubble radius (m).
    c1 : float
        Interior (gas) sound speed.
    delta : float
        Density ratio interior/exterior, dimensionless, 0 < delta << 1.
    c0 : float
        Exterior sound speed.
    """

    R: float
    c1: float
    delta: float
    c0: float

    def __post_init__(self):
        if not (self.R > 0 and self.c1 > 0 and self.c0 > 0):
            raise ValueError("R, c1, c0 must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1) (was %g)" % self.delta)


@dataclass(frozen=True)
class Drude:
    """Nanoparticle with Drude permittivity/permeability dispersion.

    ``rho_of`` uses only the permittivity branch; the permeability branch is
    exposed through :func:`drude_mu` for callers assembling their own
    polarization tensors.
    """

    omega_p: float
    tau: float
    volume: float
    c0: float
    eps0: float = 1.0
    mu0: float = 1.0
    omega_r: float = 0.0
    F_f: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.volume > 0:
            raise ValueError("volume must be positive")


@dataclass(frozen=True)
class Tunable:
    """Two-level tunable reflectivity: fixed real part, switchable Im part.

    ``level`` selects the current imaginary part from {0, rho1}.
    """

    rho1: float
    re_rho: float = 0.0
    level: int = 0

    def __post_init__(self):
        if not self.rho1 >= 0:
            raise ValueError("rho1 must be nonnegative (was %g)" % self.rho1)
        if self.level not in (0, 1):
            raise ValueError("level must be 0 or 1")

    def at_level(self, level: int) -> "Tunable":
        return replace(self, level=int(bool(level)))


ReflectivityModel = Union[Bubble, Drude, Tunable]

PolarizationTensor = Union[np.ndarray, Callable[[float], np.ndarray], None]


def _polarization_matrix(polarization: PolarizationTensor, omega: float) -> Optional[np.ndarray]:
    if polarization is None:
        return None
    M = polarization(omega) if callable(polarization) else polarization
    M = np.asarray(M, dtype=complex)
    if M.shape != (3, 3):
        raise ValueError("polarization tensor must be 3x3 (was shape %s)" % (M.shape,))
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(M).max()))):
        raise ValueError("polarization tensor must be symmetric")
    return M


@dataclass(frozen=True)
class Inclusion:
    """Point inclusion at ``position`` with reflectivity and optional dipole tensor."""

    position: np.ndarray
    reflectivity: ReflectivityModel
    polarization: PolarizationTensor = None

    def __post_init__(self):
        object.__setattr__(self, "position", _as_points(self.position).reshape(3))
        if self.polarization is not None and not callable(self.polarization):
            object.__setattr__(
                self, "polarization", _polarization_matrix(self.polarization, 0.0)
            )

    def polarization_at(self, omega: float) -> Optional[np.ndarray]:
        return _polarization_matrix(self.polarization, omega)


@dataclass(frozen=True)
class Metasurface:
    """Square-grid array of identical tunable point elements.

    All elements share one :class:`Tunable` reflectivity, so switching the
    array switches every element at once.  ``D`` is the side length of the
    grid and ``center`` its midpoint; the grid lies in the plane orthogonal
    to ``normal``.
    """

    positions: np.ndarray
    tunable: Tunable
    D: float
    center: np.ndarray
    normal: np.ndarray
    polarization: PolarizationTensor = None

    def __post_init__(self):
        object.__setattr__(self, "positions", _as_points(self.positions).reshape(-1, 3))
        object.__setattr__(self, "center", _as_points(self.center).reshape(3))
        n = _as_points(self.normal).reshape(3)
        nn = np.linalg.norm(n)
        if nn == 0:
            raise ValueError("normal must be nonzero")
        object.__setattr__(self, "normal", n / nn)
        if self.J < 1:
            raise ValueError("metasurface needs at least one element")
        if not self.D > 0:
            raise ValueError("D must be positive")
        # coplanarity with the stated plane
        dev = (self.positions - self.center) @ self.normal
        if np.abs(dev).max() > 1e-9 * max(1.0, self.D):
            raise ValueError("elements must be coplanar with the stated plane")

    @property
    def J(self) -> int:
        return self.positions.shape[0]

    @property
    def spacing(self) -> float:
        n_side = int(round(math.sqrt(self.J)))
        if n_side > 1:
            return self.D / (n_side - 1)
        return self.D

    def at_level(self, level: int) -> "Metasurface":
        return replace(self, tunable=self.tunable.at_level(level))

    def inclusions(self, level: Optional[int] = None) -> list:
        tun = self.tunable if level is None else self.tunable.at_level(level)
        return [
            Inclusion(position=p, reflectivity=tun, polarization=self.polarization)
            for p in self.positions
        ]

    @staticmethod
    def square_grid(
        n_side: int,
        D: float,
        center,
        normal,
        tunable: Tunable,
        polarization: PolarizationTensor = None,
    ) -> "Metasurface":
        """Build an ``n_side x n_side`` grid of side ``D`` centered at ``center``."""
        if n_side < 1:
            raise ValueError("n_side must be >= 1")
        center = _as_points(center).reshape(3)
        normal = _as_points(normal).reshape(3)
        normal = normal / np.linalg.norm(normal)
        # in-plane orthonormal basis
        helper = np.array([1.0, 0.0, 0.0])
        if abs(normal @ helper) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        e1 = np.cross(normal, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(normal, e1)
        if n_side == 1:
            offsets = np.array([0.0])
        else:
            offsets = np.linspace(-D / 2.0, D / 2.0, n_side)
        pts = [center + a * e1 + b * e2 for a in offsets for b in offsets]
        return Metasurface(
            positions=np.array(pts),
            tunable=tunable,
            D=D,
            center=center,
            normal=normal,
            polarization=polarization,
        )


def green0(omega: float, x, y, bg: Background):
    """Outgoing free-space Green's function exp(ik|x-y|)/(4 pi |x-y|).

    Broadcasts over stacked points; raises on coincident point pairs, whose
    imaginary part is supplied by :func:`green0_im_coincident`.
    """
    if not omega > 0:
        raise ValueError("omega must be positive (was %g)" % omega)
    x = _as_points(x)
    y = _as_points(y)
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("coincident points: use green0_im_coincident for the r -> 0 imaginary part")
    k = omega / bg.c0
    return np.exp(1j * k * r) / (_FOUR_PI * r)


def green0_im_coincident(omega: float, bg: Background) -> float:
    """Imaginary part of the Green's function at coincident points, omega/(4 pi c0)."""
    if not omega > 0:
        raise ValueError("omega must be positive (was %g)" % omega)
    return omega / (_FOUR_PI * bg.c0)


def grad_green0(omega: float, x, z, bg: Background):
    """Gradient of ``green0(omega, x, z)`` with respect to the second argument z.

    Returns a complex array with trailing axis 3.  Equals minus the gradient
    in the first argument, since the kernel depends on x - z only.
    """
    if not omega > 0:
        raise ValueError("omega must be positive (was %g)" % omega)
    x = _as_points(x)
    z = _as_points(z)
    d = z - x
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("coincident points have no defined gradient")
    k = omega / bg.c0
    g = np.exp(1j * k * r) / (_FOUR_PI * r)
    radial = g * (1j * k - 1.0 / r)
    return radial[..., np.newaxis] * (d / r[..., np.newaxis])


def drude_epsilon(model: Drude, omega: float) -> complex:
    """Relative-to-eps0 Drude permittivity eps(omega)."""
    return model.eps0 * (1.0 - model.omega_p**2 / (omega**2 + 1j * omega / model.tau))


def drude_mu(model: Drude, omega: float) -> complex:
    """Resonant Drude permeability mu(omega); available for user-built dipole tensors."""
    return model.mu0 * (
        1.0 - model.F_f * omega**2 / (omega**2 - model.omega_r**2 + 1j * omega / model.tau)
    )


# Below this alpha1 the direct formula for 1 - a*cot(a) loses ~8 digits to
# cancellation; switch to its Taylor expansion through 4th order.
_BUBBLE_SERIES_CUT = 1e-3


def _one_minus_alpha_cot(alpha: float) -> float:
    if abs(alpha) < _BUBBLE_SERIES_CUT:
        a2 = alpha * alpha
        return a2 / 3.0 + a2 * a2 / 45.0
    return 1.0 - alpha / math.tan(alpha)


def rho_of(model: ReflectivityModel, omega: float) -> complex:
    """Complex reflectivity rho(omega) of a point scatterer, in units of length."""
    if not omega > 0:
        raise ValueError("omega must be positive (was %g)" % omega)
    if isinstance(model, Tunable):
        return complex(model.re_rho, model.rho1 if model.level else 0.0)
    if isinstance(model, Drude):
        eps_rel = drude_epsilon(model, omega) / model.eps0
        return (omega**2 / model.c0**2) * (eps_rel - 1.0) * model.volume
    if isinstance(model, Bubble):
        alpha1 = omega * model.R / model.c1
        if abs(math.sin(alpha1)) < 1e-12 and abs(alpha1) >= _BUBBLE_SERIES_CUT:
            raise ValueError("alpha1 = %g sits on a pole of cot" % alpha1)
        numerator = _one_minus_alpha_cot(alpha1)
        denom = complex(
            model.delta - numerator, -model.delta * (model.c1 / model.c0) * alpha1
        )
        if denom == 0:
            raise ValueError("reflectivity pole at alpha1 = %g" % alpha1)
        return _FOUR_PI * model.R * numerator / denom
    raise TypeError("unsupported reflectivity model %r" % (type(model).__name__,))


def minnaert_frequency(model: Bubble) -> float:
    """Resonance frequency c1*alpha_M/R with tan(alpha_M) = alpha_M/(1-delta).

    The root on (0, pi/2) is bracketed and bisected to 1e-12 relative; for
    small delta it approaches sqrt(3*delta).
    """
    delta = model.delta

    def f(alpha: float) -> float:
        return math.tan(alpha) * (1.0 - delta) - alpha

    lo = 1e-12
    hi = math.pi / 2.0 - 1e-12
    if not (f(lo) < 0.0 < f(hi)):
        raise ValueError("failed to bracket the resonance for delta = %g" % delta)
    while (hi - lo) > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    alpha_m = 0.5 * (lo + hi)
    return model.c1 * alpha_m / model.R


def green_full(omega: float, x, y, inclusions: Sequence[Inclusion], bg: Background) -> complex:
    """Green's function with single-scattering inclusion corrections.

    G0(x,y) + sum_j rho_j G0(x,z_j) G0(y,z_j)
            + sum_j grad G0(x,z_j)^T M_j grad G0(y,z_j)

    The dipole term is omitted for inclusions without a polarization tensor.
    Symmetric in x and y (reciprocity), given symmetric M_j.
    """
    x = _as_points(x).reshape(3)
    y = _as_points(y).reshape(3)
    if np.array_equal(x, y):
        raise ValueError("coincident receivers are not in the domain of green_full")
    total = complex(green0(omega, x, y, bg))
    for inc in inclusions:
        z = inc.position
        if np.array_equal(x, z) or np.array_equal(y, z):
            raise ValueError("evaluation point coincides with an inclusion")
        rho = rho_of(inc.reflectivity, omega)
        gx = complex(green0(omega, x, z, bg))
        gy = complex(green0(omega, y, z, bg))
        total += rho * gx * gy
        M = inc.polarization_at(omega)
        if M is not None:
            dgx = grad_green0(omega, x, z, bg)
            dgy = grad_green0(omega, y, z, bg)
            total += complex(dgx @ M @ dgy)
    return total
