"""Scene geometry: spherical source shell, receiver pair, and the full scene.

Noise sources live on a sphere of radius ``L_src`` centered at the origin,
discretized by a Fibonacci lattice with equal surface weights.  The scene
bundles the shell, an optional metasurface, the receiver pair, and the
background medium; every forward-model operation takes it whole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from .media import Background, Inclusion, Metasurface, _as_points

__all__ = ["SourceShell", "ReceiverPair", "Scene", "make_shell"]


@dataclass(frozen=True)
class SourceShell:
    """Quadrature discretization of the source sphere of radius ``L_src``."""

    L_src: float
    nodes: np.ndarray    # (n, 3)
    weights: np.ndarray  # (n,), surface measure, sum = 4 pi L_src^2

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError("nodes and weights must pair up")
        radii = np.linalg.norm(nodes, axis=1)
        if np.abs(radii - self.L_src).max() > 1e-12 * self.L_src:
            raise ValueError("all nodes must lie on the sphere of radius L_src")
        area = 4.0 * math.pi * self.L_src**2
        if abs(weights.sum() - area) > 1e-9 * area:
            raise ValueError("weights must sum to the sphere area")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]


def make_shell(L_src: float, n_nodes: int) -> SourceShell:
    """Fibonacci-lattice shell with equal weights 4 pi L_src^2 / n_nodes."""
    if not L_src > 0:
        raise ValueError("L_src must be positive (was %g)" % L_src)
    if n_nodes < 100:
        raise ValueError("n_nodes must be >= 100 (was %d)" % n_nodes)
    indices = np.arange(n_nodes, dtype=float) + 0.5
    phi = np.arccos(1.0 - 2.0 * indices / n_nodes)   # polar angle
    golden_ratio = (1.0 + math.sqrt(5.0)) / 2.0
    theta = 2.0 * math.pi * indices / golden_ratio    # azimuth
    nodes = L_src * np.column_stack(
        (np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi))
    )
    weights = np.full(n_nodes, 4.0 * math.pi * L_src**2 / n_nodes)
    return SourceShell(L_src=L_src, nodes=nodes, weights=weights)


@dataclass(frozen=True)
class ReceiverPair:
    """Two receivers; the scheme places them half a carrier wavelength apart."""

    xr: np.ndarray
    xrp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xr", _as_points(self.xr).reshape(3))
        object.__setattr__(self, "xrp", _as_points(self.xrp).reshape(3))
        if np.array_equal(self.xr, self.xrp):
            raise ValueError("receivers must be distinct")

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.xr - self.xrp))

    @property
    def axis(self) -> np.ndarray:
        return (self.xrp - self.xr) / self.separation


@dataclass(frozen=True)
class Scene:
    """Geometry plus medium: shell sources, metasurface, receivers, background."""

    bg: Background
    shell: SourceShell
    receivers: ReceiverPair
    surface: Optional[Metasurface] = None

    def __post_init__(self):
        # shell must comfortably enclose everything it illuminates
        pts = [self.receivers.xr, self.receivers.xrp]
        if self.surface is not None:
            pts.extend(self.surface.positions)
        radius = max(float(np.linalg.norm(p)) for p in pts)
        if radius >= self.shell.L_src:
            raise ValueError(
                "receivers/inclusions must lie inside the source shell "
                "(max radius %g vs L_src %g)" % (radius, self.shell.L_src)
            )

    def scene_diameter(self) -> float:
        """Diameter of the region holding receivers and inclusions."""
        pts = [self.receivers.xr, self.receivers.xrp]
        if self.surface is not None:
            pts.extend(self.surface.positions)
        pts = np.asarray(pts)
        dmax = 0.0
        for p in pts:
            dmax = max(dmax, float(np.linalg.norm(pts - p, axis=1).max()))
        return dmax

    def inclusions(self, level: Optional[int] = None) -> List[Inclusion]:
        if self.surface is None:
            return []
        return self.surface.inclusions(level)

    def at_level(self, level: int) -> "Scene":
        if self.surface is None:
            return self
        return replace(self, surface=self.surface.at_level(level))

    def pta_distance(self) -> float:
        """Distance from the first receiver to the metasurface center."""
        if self.surface is None:
            raise ValueError("scene has no metasurface")
        return float(np.linalg.norm(self.surface.center - self.receivers.xr))

    def alpha(self) -> float:
        """Angle between the receiver axis xrp - xr and the sight line from xr
        to the array center, in [0, pi].

        Measuring from xr rather than the pair midpoint shifts the angle by
        O(separation / range); the closed-form phase inherits that error.
        """
        if self.surface is None:
            raise ValueError("scene has no metasurface")
        u = self.receivers.xrp - self.receivers.xr
        v = self.surface.center - self.receivers.xr
        c = float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
        return math.acos(min(1.0, max(-1.0, c)))
