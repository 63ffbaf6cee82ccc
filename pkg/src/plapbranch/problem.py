"""Problem data: exponents, potentials a, b and the nonlocal kernel g.

Potentials are callables ``f(x, d)`` of position and boundary distance;
kernels are callables ``g(x, t)``. The catalogue classes below are frozen
dataclasses so specs stay hashable (they key the solution cache) and can be
written back to config files.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import RADIAL


class ProblemError(ValueError):
    """Problem data violating a structural hypothesis."""


# --- potentials -----------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __call__(self, x, d):
        return np.full(np.shape(x), float(self.value))

    def to_config(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class DistancePower:
    """coef * d(x)^(-s); blows up at the boundary for s > 0."""

    s: float
    coef: float = 1.0

    def __call__(self, x, d):
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore"):
            return self.coef * np.where(d > 0, d, 0.0) ** (-self.s)

    @property
    def bounded(self):
        return self.s <= 0

    def to_config(self):
        return {"kind": "distance_power", "s": self.s, "coef": self.coef}


@dataclass(frozen=True, eq=False)
class TabulatedPotential:
    """Piecewise-linear interpolation of (position, value) samples."""

    x: tuple
    values: tuple
    source: str = ""

    def __call__(self, x, d):
        return np.interp(x, self.x, self.values)

    def to_config(self):
        return {"kind": "tabulated", "file": self.source}


ZERO = Constant(0.0)


# --- kernels --------------------------------------------------------------

@dataclass(frozen=True)
class ConstantKernel:
    value: float = 1.0
    theta_inf = 0.0
    theta_zero = 0.0

    def __call__(self, x, t):
        return np.full(np.broadcast(x, t).shape, float(self.value))

    def to_config(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class PowerKernel:
    """coef * t^(-theta); same exponent at 0 and at infinity."""

    theta: float
    coef: float = 1.0

    @property
    def theta_inf(self):
        return self.theta

    @property
    def theta_zero(self):
        return self.theta

    def __call__(self, x, t):
        with np.errstate(divide="ignore"):
            return self.coef * np.broadcast_to(np.asarray(t, dtype=float), np.broadcast(x, t).shape) ** (-self.theta)

    def to_config(self):
        return {"kind": "power", "theta": self.theta, "coef": self.coef}


@dataclass(frozen=True)
class ShiftedPowerKernel:
    """(1 + t)^(-theta): continuous on [0, inf), decays like t^(-theta)."""

    theta: float

    @property
    def theta_inf(self):
        return self.theta

    theta_zero = 0.0

    def __call__(self, x, t):
        return np.broadcast_to(1.0 + np.asarray(t, dtype=float), np.broadcast(x, t).shape) ** (-self.theta)

    def to_config(self):
        return {"kind": "shifted_power", "theta": self.theta}


@dataclass(frozen=True)
class CrossoverKernel:
    """t^(-theta_zero) (1 + t)^(theta_zero - theta_inf).

    Behaves like t^(-theta_zero) as t -> 0+ and like t^(-theta_inf) as t -> inf.
    """

    theta_zero: float
    theta_inf: float

    def __call__(self, x, t):
        t = np.broadcast_to(np.asarray(t, dtype=float), np.broadcast(x, t).shape)
        with np.errstate(divide="ignore"):
            return t ** (-self.theta_zero) * (1.0 + t) ** (self.theta_zero - self.theta_inf)

    def to_config(self):
        return {"kind": "crossover", "theta_zero": self.theta_zero, "theta_inf": self.theta_inf}


@dataclass(frozen=True, eq=False)
class TabulatedKernel:
    """x-independent kernel from (t, g) samples, log-log interpolated.

    Outside the table the end segments are extended as power laws. No
    asymptotic exponents are declared for tabulated data.
    """

    t: tuple
    g: tuple
    source: str = ""
    theta_inf = None
    theta_zero = None

    def __call__(self, x, t):
        lt = np.log(np.asarray(self.t, dtype=float))
        lg = np.log(np.asarray(self.g, dtype=float))
        tq = np.broadcast_to(np.asarray(t, dtype=float), np.broadcast(x, t).shape)
        with np.errstate(divide="ignore"):
            q = np.log(tq)
        out = np.interp(q, lt, lg)
        lo_slope = (lg[1] - lg[0]) / (lt[1] - lt[0])
        hi_slope = (lg[-1] - lg[-2]) / (lt[-1] - lt[-2])
        out = np.where(q < lt[0], lg[0] + lo_slope * (q - lt[0]), out)
        out = np.where(q > lt[-1], lg[-1] + hi_slope * (q - lt[-1]), out)
        return np.exp(out)

    def to_config(self):
        return {"kind": "tabulated", "file": self.source}


# --- problem --------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Data of the nonlocal problem and of its local family.

    ``theta1``/``theta2`` are the declared decay exponents of g at infinity
    and at zero; when left as None they are taken from the kernel, if it
    knows them.
    """

    p: float
    delta: float
    beta: float
    r: float = 0.0
    a: object = field(default=Constant(1.0))
    b: object = field(default=Constant(1.0))
    g: object = field(default=ConstantKernel(1.0))
    theta1: float = None
    theta2: float = None
    f1: object = None
    f2: object = None

    def __post_init__(self):
        if self.theta1 is None and getattr(self.g, "theta_inf", None) is not None:
            object.__setattr__(self, "theta1", float(self.g.theta_inf))
        if self.theta2 is None and getattr(self.g, "theta_zero", None) is not None:
            object.__setattr__(self, "theta2", float(self.g.theta_zero))
        if not self.p > 1:
            raise ProblemError(f"p must satisfy p > 1, got p={self.p}")
        if not self.delta > 0:
            raise ProblemError(f"delta must satisfy delta > 0, got delta={self.delta}")
        if not 0 < self.beta < self.p - 1:
            raise ProblemError(
                f"beta must satisfy 0 < beta < p-1 = {self.p - 1:g}, got beta={self.beta}")

    def with_(self, **changes):
        """Copy with fields replaced; a new kernel re-derives undeclared thetas."""
        if "g" in changes:
            changes.setdefault("theta1", None)
            changes.setdefault("theta2", None)
        return replace(self, **changes)

    @property
    def singular_kernel(self):
        """True when g is declared to blow up at t -> 0+."""
        return self.theta2 is not None and self.theta2 > 0

    def potentials(self, mesh, x=None):
        """(a, b) at the mesh nodes (or at points ``x``)."""
        if x is None:
            x, d = mesh.nodes, mesh.boundary_distance
        else:
            d = mesh.distance(x)
        a = np.asarray(self.a(x, d), dtype=float)
        b = np.asarray(self.b(x, d), dtype=float)
        return a, b

    def h1(self, mesh):
        a, b = self.potentials(mesh)
        return np.minimum(a, b)

    def h2(self, mesh):
        a, b = self.potentials(mesh)
        return np.maximum(a, b)

    def validate(self, mesh, rtol=1e-2):
        """Check the hypotheses that depend on the mesh and on g.

        Raises ProblemError with the violated condition.
        """
        if mesh.kind == RADIAL and not self.p < mesh.dimension:
            raise ProblemError(
                f"p must satisfy 1 < p < N on a ball, got p={self.p}, N={mesh.dimension}")
        a, b = self.potentials(mesh)
        inner = mesh.interior.copy()
        if mesh.kind == RADIAL:
            inner[0] = True
        ai, bi = a[inner], b[inner]
        if np.any(ai < 0) or np.any(bi < 0):
            raise ProblemError("potentials a and b must be non-negative")
        if not (np.all(np.isfinite(ai)) and np.all(np.isfinite(bi))):
            raise ProblemError("potentials a and b must be finite at interior nodes")
        if not np.all(ai + bi > 0):
            raise ProblemError("a + b > 0 must hold at every interior node")
        xs = mesh.nodes[inner]
        if self.theta1 is not None:
            self._check_limit(xs, np.array([1e6, 1e7, 1e8]), self.theta1, self.f1,
                              "theta1", rtol)
        if self.theta2 is not None:
            self._check_limit(xs, np.array([1e-6, 1e-7, 1e-8]), self.theta2, self.f2,
                              "theta2", rtol)
        return self

    def _check_limit(self, xs, ts, theta, coef, name, rtol):
        X, Tt = np.meshgrid(xs, ts, indexing="ij")
        vals = np.asarray(self.g(X, Tt), dtype=float) * Tt**theta
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ProblemError(f"g(x,t) t^{name} must tend to a positive finite limit")
        ref = vals[:, -1]
        if coef is not None:
            ref = np.asarray(coef(xs), dtype=float) * np.ones_like(ref)
        if np.max(np.abs(vals / ref[:, None] - 1.0)) > rtol:
            raise ProblemError(
                f"g(x,t) t^{name} does not settle to its limit (declared {name}={theta})")
