"""Certified scalar/vector arithmetic, continuity moduli, finite meshes
and located-set distances.

Everything downstream consumes these primitives: a real number is a float
together with an explicit error radius, a continuous function carries a
modulus certificate, and a totally bounded set is an algorithm producing a
finite mesh at every resolution.  All types are immutable after
construction and all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ArgumentError",
    "ResourceBudgetError",
    "ContractError",
    "InternalConsistencyError",
    "DomainExitError",
    "CertifiedReal",
    "Modulus",
    "Hypercube",
    "FiniteMesh",
    "LocatedSet",
    "Certificate",
    "build_mesh",
    "modulus_step",
    "located_distance",
    "snap_dyadic",
    "snap_dyadic_fraction",
    "parallel_map",
    "DEFAULT_MESH_BUDGET",
    "SNAP_BITS",
]


class ArgumentError(ValueError):
    """Raised when an argument violates a precondition."""


class ResourceBudgetError(RuntimeError):
    """Raised when an operation would exceed a configured resource budget.

    The message always names the required count so callers can decide
    whether to raise the budget or coarsen the tolerance.
    """


class ContractError(RuntimeError):
    """Raised when supplied data fails a stated contract (missing modulus,
    inconsistent generator, evaluator too imprecise)."""


class InternalConsistencyError(RuntimeError):
    """Raised when an internal invariant that should hold by construction
    fails; indicates unsound input certificates rather than bad arguments."""


class DomainExitError(RuntimeError):
    """Raised when a trajectory leaves its stated state domain."""

    def __init__(self, msg, exit_time=None, state=None):
        super().__init__(msg)
        self.exit_time = exit_time
        self.state = state


# Radius arithmetic is itself done in floats; the safety factor covers the
# handful of roundings incurred while computing a radius.
_RADIUS_SAFETY = 1.0 + 1e-12

SNAP_BITS = 44
_SNAP_SCALE = float(1 << SNAP_BITS)

DEFAULT_MESH_BUDGET = 4_000_000


def _inflate(value: float, raw_radius: float) -> float:
    """One-ulp rounding inflation on top of the propagated radius."""
    return raw_radius * _RADIUS_SAFETY + math.ulp(abs(value))


def snap_dyadic(x: float) -> float:
    """Round to the dyadic lattice 2^-SNAP_BITS (exact in binary64 at desk
    scale), so node equality is exactly decidable."""
    return round(x * _SNAP_SCALE) / _SNAP_SCALE


def snap_dyadic_fraction(x: float) -> Fraction:
    return Fraction(round(x * _SNAP_SCALE), 1 << SNAP_BITS)


@dataclass(frozen=True)
class CertifiedReal:
    """A real number as an approximation plus a sound error radius.

    The invariant is |true - value| <= radius.  Every arithmetic operation
    propagates input radii soundly and inflates by one ulp of the result to
    absorb its own rounding.
    """

    value: float
    radius: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ArgumentError("CertifiedReal value must be finite")
        if not (self.radius >= 0.0 and math.isfinite(self.radius)):
            raise ArgumentError("CertifiedReal radius must be finite and >= 0")

    # -- interval endpoints ------------------------------------------------
    @property
    def lower(self) -> float:
        return self.value - self.radius

    @property
    def upper(self) -> float:
        return self.value + self.radius

    def contains(self, exact) -> bool:
        """Exact containment test; `exact` may be a Fraction for an
        authoritative rational check."""
        if isinstance(exact, Fraction):
            return abs(exact - Fraction(self.value)) <= Fraction(self.radius)
        return abs(exact - self.value) <= self.radius

    # -- arithmetic --------------------------------------------------------
    @staticmethod
    def _coerce(other) -> "CertifiedReal":
        if isinstance(other, CertifiedReal):
            return other
        return CertifiedReal(float(other), 0.0)

    def __add__(self, other):
        o = self._coerce(other)
        v = self.value + o.value
        return CertifiedReal(v, _inflate(v, self.radius + o.radius))

    __radd__ = __add__

    def __neg__(self):
        return CertifiedReal(-self.value, self.radius)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        v = self.value * o.value
        raw = (
            abs(self.value) * o.radius
            + abs(o.value) * self.radius
            + self.radius * o.radius
        )
        return CertifiedReal(v, _inflate(v, raw))

    __rmul__ = __mul__

    def __abs__(self):
        v = abs(self.value)
        return CertifiedReal(v, _inflate(v, self.radius))

    def max_with(self, other) -> "CertifiedReal":
        # enclosure of max(x, y): the computed max is within max(rx, ry)
        # of every point of [max(lo), max(hi)]
        o = self._coerce(other)
        v = max(self.value, o.value)
        return CertifiedReal(v, _inflate(v, max(self.radius, o.radius)))

    def min_with(self, other) -> "CertifiedReal":
        o = self._coerce(other)
        v = min(self.value, o.value)
        return CertifiedReal(v, _inflate(v, max(self.radius, o.radius)))

    # -- certified comparisons (constructive: may be undecided) ------------
    def definitely_lt(self, bound: float) -> bool:
        return self.upper < bound

    def definitely_gt(self, bound: float) -> bool:
        return self.lower > bound

    def __repr__(self):
        return f"CertifiedReal({self.value!r} ± {self.radius!r})"


class Modulus:
    """A continuity certificate in omega- or mu-format.

    omega-format: delta = fn(eps, center, ball_radius), the input distance
    guaranteeing output distance <= eps on the ball.
    mu-format: a positive-definite monotone map bounding the output
    distance, |f(x) - f(y)| <= mu(|x - y|); stepping it inverts mu by
    monotone bisection (64 iterations), a conservative under-approximation.
    """

    __slots__ = ("format", "_fn", "lipschitz_constant")

    def __init__(self, format: str, fn: Callable, lipschitz_constant: Optional[float] = None):
        if format not in ("omega", "mu"):
            raise ArgumentError("modulus format must be 'omega' or 'mu'")
        self.format = format
        self._fn = fn
        self.lipschitz_constant = lipschitz_constant

    @classmethod
    def lipschitz(cls, L: float) -> "Modulus":
        if L < 0:
            raise ArgumentError("Lipschitz constant must be >= 0")
        return cls("mu", lambda t, L=L: L * t, lipschitz_constant=L)

    @classmethod
    def mu(cls, fn: Callable[[float], float]) -> "Modulus":
        return cls("mu", fn)

    @classmethod
    def omega(cls, fn: Callable[[float, object, float], float]) -> "Modulus":
        return cls("omega", fn)

    @classmethod
    def constant(cls, delta: float) -> "Modulus":
        return cls("omega", lambda eps, c, r, d=delta: d)

    def bound(self, t: float) -> float:
        """mu-format forward bound on the output distance at input gap t."""
        if self.format != "mu":
            raise ContractError("forward bound only available for mu-format moduli")
        return self._fn(t)

    def forward_bound(self, t: float, center=None, ball_radius: float = 1.0) -> float:
        """Output distance guaranteed at input gap t.

        Direct for mu-format; for omega-format the smallest eps with
        step(eps) >= t, found by doubling plus bisection (omega is
        monotone non-decreasing in eps).
        """
        if t <= 0:
            return 0.0
        if self.format == "mu":
            return self._fn(t)
        if self.lipschitz_constant is not None:
            return self.lipschitz_constant * t
        eps = 1e-12
        grow = 0
        while self.step(eps, center, ball_radius) < t and grow < 120:
            eps *= 2.0
            grow += 1
        if grow == 0:
            return eps
        lo, hi = eps / 2.0, eps
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            if self.step(mid, center, ball_radius) >= t:
                hi = mid
            else:
                lo = mid
        return hi

    def step(self, eps: float, center=None, ball_radius: float = 1.0) -> float:
        """Largest certified input distance for output precision eps."""
        if eps <= 0:
            raise ArgumentError("modulus step requires eps > 0")
        if self.format == "omega":
            delta = self._fn(eps, center, ball_radius)
            if delta <= 0:
                raise ContractError("omega modulus returned non-positive delta")
            return delta
        if self.lipschitz_constant is not None:
            if self.lipschitz_constant == 0.0:
                return math.inf
            return eps / self.lipschitz_constant
        # monotone bisection for the largest t with mu(t) <= eps
        lo = 0.0
        hi = 1.0
        grow = 0
        while self._fn(hi) <= eps and grow < 80:
            lo = hi
            hi *= 2.0
            grow += 1
        if grow >= 80:
            return lo
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            if self._fn(mid) <= eps:
                lo = mid
            else:
                hi = mid
        if lo <= 0.0:
            # mu is positive away from 0, so a tiny positive step always exists
            lo = hi * 0.5 ** 64
        return lo


def modulus_step(m: Modulus, eps: float, center=None, ball_radius: float = 1.0) -> float:
    """Functional form of Modulus.step."""
    return m.step(eps, center=center, ball_radius=ball_radius)


@dataclass(frozen=True)
class Hypercube:
    """Closed axis-aligned hypercube: center plus total side length."""

    center: np.ndarray
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if self.side <= 0:
            raise ArgumentError("hypercube side must be positive")
        if self.center.ndim != 1 or self.center.size < 1:
            raise ArgumentError("hypercube center must be a 1-D point")

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def lo(self) -> np.ndarray:
        return self.center - 0.5 * self.side

    @property
    def hi(self) -> np.ndarray:
        return self.center + 0.5 * self.side

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.dim)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(size, self.dim))


@dataclass(frozen=True)
class FiniteMesh:
    """A finite epsilon-net: the output of a total-boundedness algorithm.

    points: (N, n) array of pairwise distinct nodes lying in the parent set.
    resolution: every parent point is within `resolution` of a node.
    """

    points: np.ndarray
    resolution: float
    parent: object = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def nearest(self, x) -> tuple[int, float]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = np.linalg.norm(self.points - x[None, :], axis=1)
        i = int(np.argmin(d))
        return i, float(d[i])

    def min_distance(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized distance from each row of xs to the mesh."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        # chunk to bound memory on large meshes
        out = np.empty(xs.shape[0])
        step = max(1, int(4e6 // max(len(self), 1)))
        for s in range(0, xs.shape[0], step):
            blk = xs[s : s + step]
            d = np.linalg.norm(blk[:, None, :] - self.points[None, :, :], axis=2)
            out[s : s + step] = d.min(axis=1)
        return out

    def covering_check(self, rng: np.random.Generator, n_samples: int = 10_000) -> float:
        """Sample the parent set and return the worst min-distance found.

        Only valid when the parent is a Hypercube (or exposes .sample).
        """
        if self.parent is None or not hasattr(self.parent, "sample"):
            raise ContractError("covering check needs a sampleable parent set")
        xs = self.parent.sample(rng, n_samples)
        return float(self.min_distance(xs).max())


def build_mesh(box: Hypercube, eps: float, budget: int = DEFAULT_MESH_BUDGET) -> FiniteMesh:
    """Uniform dyadic grid covering `box` at resolution eps.

    Grid spacing h <= 2 eps / sqrt(n) guarantees the covering property;
    node coordinates are snapped to the dyadic lattice so node equality is
    exactly decidable.  A single node (the center) suffices once eps
    reaches half the box diameter.
    """
    if eps <= 0:
        raise ArgumentError("mesh resolution must be positive")
    n = box.dim
    if 0.5 * box.diameter <= eps:
        pts = np.array([[snap_dyadic(c) for c in box.center]])
        return FiniteMesh(pts, eps, box)
    # shave a hair off eps so dyadic snapping cannot break the cover
    h_max = 2.0 * eps * (1.0 - 2.0 ** -20) / math.sqrt(n)
    k = max(1, math.ceil(box.side / h_max))
    count = (k + 1) ** n
    if count > budget:
        raise ResourceBudgetError(
            f"mesh at resolution {eps} needs {count} nodes "
            f"((k+1)^n with k={k}, n={n}) but the budget is {budget}"
        )
    axes = []
    lo = box.lo
    for d in range(n):
        coords = lo[d] + box.side * np.arange(k + 1) / k
        axes.append(np.array([snap_dyadic(c) for c in coords]))
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return FiniteMesh(pts, eps, box)


@dataclass(frozen=True)
class LocatedSet:
    """A set whose distance function is computable to any precision,
    realized by a mesh generator eps -> FiniteMesh."""

    mesh_generator: Callable[[float], FiniteMesh]
    description: str = ""

    @classmethod
    def from_box(cls, box: Hypercube, budget: int = DEFAULT_MESH_BUDGET) -> "LocatedSet":
        return cls(lambda eps: build_mesh(box, eps, budget), f"box(side={box.side})")

    @classmethod
    def from_ball(cls, center, radius: float, budget: int = DEFAULT_MESH_BUDGET) -> "LocatedSet":
        """Ball as a circumscribed hypercube mesh filtered by the norm
        predicate.  Meshing the cube at eps/2 keeps the filtered net a
        sound eps-cover of the ball."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        box = Hypercube(center, 2.0 * radius)

        def gen(eps: float) -> FiniteMesh:
            cube = build_mesh(box, eps / 2.0, budget)
            keep = np.linalg.norm(cube.points - center[None, :], axis=1) <= radius
            pts = cube.points[keep]
            if pts.shape[0] == 0:
                pts = np.array([[snap_dyadic(c) for c in center]])
            return FiniteMesh(pts, eps, None)

        return cls(gen, f"ball(r={radius})")

    def mesh(self, eps: float) -> FiniteMesh:
        return self.mesh_generator(eps)


def located_distance(A: LocatedSet, x, eps: float) -> CertifiedReal:
    """Distance from x to the located set A, certified to radius eps."""
    if eps <= 0:
        raise ArgumentError("located_distance requires eps > 0")
    mesh = A.mesh(eps)
    _, d = mesh.nearest(x)
    return CertifiedReal(d, _inflate(d, eps))


@dataclass(frozen=True)
class Certificate:
    """Uniform output wrapper shared by the checking operations."""

    verdict: str  # "certified" | "counterexample" | "undecided"
    tolerances: dict = field(default_factory=dict)
    mesh_resolution: Optional[float] = None
    witness: object = None
    counterexample: object = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("certified", "counterexample", "undecided"):
            raise ArgumentError(f"unknown verdict {self.verdict!r}")


def parallel_map(fn, items, workers: int = 1):
    """Order-preserving map; mesh scans are pure so a thread pool is safe."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
