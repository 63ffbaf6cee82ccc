"""Uniform meshes for intervals and radially symmetric balls.

Both kinds are finite-volume meshes: node i owns the dual cell
[x_{i-1/2}, x_{i+1/2}] clipped to the domain. Quadrature weights are the
exact measures of those cells, so they sum to |Omega| up to roundoff.
"""
from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np

INTERVAL = "Interval"
RADIAL = "RadialBall"


def unit_sphere_area(N):
    """Surface area of the unit sphere in R^N."""
    return 2.0 * pi ** (N / 2.0) / gamma(N / 2.0)


def ball_volume(R, N):
    return unit_sphere_area(N) * R**N / N


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable uniform mesh.

    ``cell_measure`` is the dual-cell measure divided by the sphere area
    (plain cell length on an interval); ``half_metric`` is r^{N-1} at the
    half-nodes. ``dirichlet`` marks nodes carrying the boundary condition.
    """

    kind: str
    dimension: int
    nodes: np.ndarray
    h: float
    quad_weights: np.ndarray
    boundary_distance: np.ndarray
    cell_measure: np.ndarray
    half_metric: np.ndarray
    dirichlet: np.ndarray
    lo: float
    hi: float
    _interior: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        for name in ("nodes", "quad_weights", "boundary_distance", "cell_measure",
                     "half_metric", "dirichlet"):
            getattr(self, name).setflags(write=False)
        object.__setattr__(self, "_interior", ~self.dirichlet)

    @property
    def M(self):
        return self.nodes.size - 1

    @property
    def size(self):
        return self.nodes.size

    @property
    def interior(self):
        """Boolean mask of the unknown (non-Dirichlet) nodes."""
        return self._interior

    @property
    def measure(self):
        if self.kind == INTERVAL:
            return self.hi - self.lo
        return ball_volume(self.hi, self.dimension)

    def distance(self, x):
        """Distance to the boundary of the original domain, at arbitrary points."""
        x = np.asarray(x, dtype=float)
        if self.kind == INTERVAL:
            return np.minimum(x - self.lo, self.hi - x)
        return self.hi - x

    def describe(self):
        if self.kind == INTERVAL:
            return {"kind": "interval", "a": self.lo, "b": self.hi, "M": self.M}
        return {"kind": "radial", "R": self.hi, "N": self.dimension, "M": self.M}


def build_interval(a, b, M):
    """Uniform mesh of (a, b) with M cells and trapezoid weights."""
    if not a < b:
        raise ValueError(f"interval needs a < b, got a={a}, b={b}")
    if M < 8:
        raise ValueError(f"mesh needs M >= 8 cells, got {M}")
    x = np.linspace(a, b, M + 1)
    h = (b - a) / M
    cell = np.full(M + 1, h)
    cell[0] = cell[-1] = h / 2
    d = np.minimum(x - a, b - x)
    d[0] = d[-1] = 0.0
    dirichlet = np.zeros(M + 1, dtype=bool)
    dirichlet[[0, -1]] = True
    return Mesh(INTERVAL, 1, x, h, cell.copy(), d, cell, np.ones(M), dirichlet, float(a), float(b))


def build_radial(R, N, M):
    """Radial mesh 0 = r_0 < ... < r_M = R of the ball B_R in R^N.

    Weights are |S^{N-1}| (r_{i+1/2}^N - r_{i-1/2}^N)/N, which approximate
    |S^{N-1}| r_i^{N-1} h and sum exactly to the ball volume.
    """
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    if N < 2:
        raise ValueError(f"radial meshes need dimension N >= 2, got {N}")
    if M < 8:
        raise ValueError(f"mesh needs M >= 8 cells, got {M}")
    r = np.linspace(0.0, R, M + 1)
    h = R / M
    edges = np.concatenate(([0.0], 0.5 * (r[:-1] + r[1:]), [R]))
    cell = (edges[1:] ** N - edges[:-1] ** N) / N
    half = (0.5 * (r[:-1] + r[1:])) ** (N - 1)
    dirichlet = np.zeros(M + 1, dtype=bool)
    dirichlet[-1] = True
    d = R - r
    d[-1] = 0.0
    return Mesh(RADIAL, int(N), r, h, unit_sphere_area(N) * cell, d, cell, half, dirichlet,
                0.0, float(R))
