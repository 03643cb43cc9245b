"""Epsilon-optimal policies over equi-Lipschitz, equi-bounded function
classes.

The class is made totally bounded by sampling the domain on a finite node
mesh and the value ball on a finite value mesh, enumerating the
Lipschitz-compatible assignments, and extending each assignment to the
whole domain by a per-coordinate lower McShane extension.  Minimizing a
uniformly continuous functional over that finite net yields a certified
epsilon-optimizer.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .core import (
    ArgumentError,
    CertifiedReal,
    ContractError,
    FiniteMesh,
    Hypercube,
    LocatedSet,
    Modulus,
    ResourceBudgetError,
    build_mesh,
    snap_dyadic,
)

__all__ = [
    "PolicyClass",
    "PiecewisePolicy",
    "Functional",
    "lipschitz_extend",
    "enumerate_policy_net",
    "epsilon_minimize",
    "mollify",
    "MollifiedPolicy",
    "policy_to_text",
    "policy_from_text",
    "DEFAULT_NET_BUDGET",
]

DEFAULT_NET_BUDGET = 2_000_000


@dataclass(frozen=True)
class PolicyClass:
    """Functions domain -> R^m with a common Lipschitz constant and a
    common sup-norm bound; smooth_order > 0 asks for mollified members.

    With per_coordinate_budget the net is built with per-coordinate
    constant L/sqrt(m), so extended members certify vector Lipschitz
    constant <= L (exact class membership) at the cost of a finer net.
    """

    domain: Hypercube
    output_dim: int
    lipschitz: float
    bound: float
    smooth_order: int = 0
    per_coordinate_budget: bool = False

    def __post_init__(self):
        if self.lipschitz < 0 or self.bound < 0:
            raise ArgumentError("L and K must be non-negative")
        if self.output_dim < 1:
            raise ArgumentError("output_dim must be >= 1")

    @property
    def coordinate_lipschitz(self) -> float:
        if self.per_coordinate_budget:
            return self.lipschitz / math.sqrt(self.output_dim)
        return self.lipschitz

    @property
    def extension_vector_lipschitz(self) -> float:
        return self.coordinate_lipschitz * math.sqrt(self.output_dim)


def lipschitz_extend(nodes, values, L: float) -> Callable[[np.ndarray], np.ndarray]:
    """Lower McShane extension, per output coordinate:

        f_j(x) = max_i (v_{i,j} - L * |x - x_i|)

    Agrees with the data at the nodes whenever the data is
    Lipschitz-compatible with constant L per coordinate; the extension has
    per-coordinate Lipschitz constant L (vector constant <= L sqrt(m)).
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes.reshape(-1, 1)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if values.shape[0] != nodes.shape[0]:
        raise ArgumentError("nodes and values disagree in length")
    if L < 0:
        raise ArgumentError("Lipschitz constant must be >= 0")
    slack = 1e-9 * (1.0 + np.abs(values).max(initial=0.0))
    for i in range(nodes.shape[0]):
        for j in range(i + 1, nodes.shape[0]):
            d = float(np.linalg.norm(nodes[i] - nodes[j]))
            gap = float(np.abs(values[i] - values[j]).max())
            if gap > L * d + slack:
                raise ArgumentError(
                    f"node data not Lipschitz-compatible: nodes {i} and {j} "
                    f"differ by {gap} over distance {d} (limit {L * d})"
                )

    def extension(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        xs = np.atleast_2d(x)
        if xs.shape[1] != nodes.shape[1]:
            xs = xs.reshape(-1, nodes.shape[1])
        dist = np.linalg.norm(xs[:, None, :] - nodes[None, :, :], axis=2)
        out = np.max(values[None, :, :] - L * dist[:, :, None], axis=1)
        return out[0] if single else out

    return extension


@dataclass(frozen=True)
class PiecewisePolicy:
    """A net member: values on dyadic value-mesh nodes over a domain node
    mesh, extended by the clamped lower McShane rule."""

    nodes: FiniteMesh
    values: np.ndarray  # (N, m)
    coordinate_lipschitz: float
    bound: float
    extension_rule: str = "lower_mcshane_clamped"
    index: int = -1

    def __post_init__(self):
        object.__setattr__(self, "values", np.atleast_2d(np.asarray(self.values, dtype=float)))

    @property
    def output_dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.atleast_2d(x)
        if xs.shape[1] != self.nodes.dim:
            xs = xs.reshape(-1, self.nodes.dim)
        dist = np.linalg.norm(xs[:, None, :] - self.nodes.points[None, :, :], axis=2)
        out = np.max(self.values[None, :, :] - self.coordinate_lipschitz * dist[:, :, None], axis=1)
        np.clip(out, -self.bound, self.bound, out=out)
        if x.ndim <= 1 and xs.shape[0] == 1:
            return out[0]
        return out

    def sup_distance(self, other: "PiecewisePolicy", grid: np.ndarray) -> float:
        a = self(grid)
        b = other(grid)
        return float(np.linalg.norm(a - b, axis=-1).max())


@dataclass(frozen=True)
class Functional:
    """Uniformly continuous cost functional on a policy class.

    evaluator returns a CertifiedReal; modulus bounds |J[k] - J[k']| in
    terms of the sup-norm distance of the policies.  batch_evaluator, when
    given, maps a stacked array of policy values on a shared grid to
    (values, radius) and is only a fast path - it must agree with
    evaluator.
    """

    evaluator: Callable[[PiecewisePolicy], CertifiedReal]
    modulus: Modulus
    name: str = ""
    batch_evaluator: Optional[Callable] = None


def _value_mesh(pclass: PolicyClass, spacing: float, budget: int) -> np.ndarray:
    """Mesh of the value ball B_K with per-axis spacing <= `spacing`."""
    K = pclass.bound
    m = pclass.output_dim
    if K == 0.0:
        return np.zeros((1, m))
    # covering the circumscribed cube with spacing h corresponds to
    # resolution h sqrt(m) / 2; from_ball meshes the cube at eps/2
    eps = spacing * math.sqrt(m)
    ball = LocatedSet.from_ball(np.zeros(m), K, budget)
    return ball.mesh(eps).points


def enumerate_policy_net(
    pclass: PolicyClass,
    eps: float,
    budget: int = DEFAULT_NET_BUDGET,
) -> list[PiecewisePolicy]:
    """Finite eps-net of the policy class in sup-norm.

    The budget is split three ways: node gaps, extension variation and
    value snapping each consume about a third of eps.  Raises
    ResourceBudgetError with the count formula when the assignment count
    |K0|^N would exceed the budget.
    """
    if eps <= 0:
        raise ArgumentError("net resolution must be positive")
    L = pclass.lipschitz
    K = pclass.bound
    m = pclass.output_dim
    Lc = pclass.coordinate_lipschitz

    def member(nodes_mesh, vals, idx):
        return PiecewisePolicy(nodes_mesh, vals, Lc, K, index=idx)

    center_mesh = FiniteMesh(
        pclass.domain.center.reshape(1, -1), pclass.domain.diameter / 2.0, pclass.domain
    )

    def constant(vals, idx):
        # single-node members are constants, so Lipschitz constant 0
        return PiecewisePolicy(center_mesh, vals, 0.0, K, index=idx)

    if K == 0.0 or eps >= 2.0 * K:
        # any member is eps-optimal for any functional; the zero policy
        # suffices (certificate radius K)
        return [constant(np.zeros((1, m)), 0)]

    value_spacing = eps / 3.0
    values = _value_mesh(pclass, value_spacing, budget)

    if L == 0.0:
        return [constant(values[i : i + 1], i) for i in range(values.shape[0])]

    L_eff = L + pclass.extension_vector_lipschitz
    # 3.05 instead of 3: keeps the adjacent-node value window strictly
    # under two value-mesh steps, which trims the assignment branching
    # factor while leaving the eps/3 budget split sound
    delta_x = eps / (3.05 * L_eff)
    nodes = build_mesh(pclass.domain, delta_x, budget)
    N = len(nodes)
    n_vals = values.shape[0]
    theoretical = n_vals ** N
    if theoretical > budget * 10_000:
        # hopeless even with aggressive Lipschitz filtering
        raise ResourceBudgetError(
            f"policy net needs up to |K0|^N = {n_vals}^{N} = {theoretical} "
            f"assignments (Lipschitz-filtered) against a budget of {budget}. "
            "Coarsen eps or raise the budget."
        )

    # pairwise distances once; compatibility slack absorbs two value snaps
    D = np.linalg.norm(nodes.points[:, None, :] - nodes.points[None, :, :], axis=2)
    slack = eps / 3.0 + 1e-12

    out: list[PiecewisePolicy] = []
    assignment = np.empty((N, m))

    def feasible(i, vi):
        if i == 0:
            return True
        gaps = np.abs(vi[None, :] - assignment[:i]).max(axis=1)
        return bool(np.all(gaps <= Lc * D[i, :i] + slack))

    def rec(i):
        if i == N:
            if len(out) >= budget:
                raise ResourceBudgetError(
                    f"policy net exceeds the member budget {budget} "
                    f"(|K0|^N = {n_vals}^{N} before filtering). "
                    "Coarsen eps or raise the budget."
                )
            out.append(member(nodes, assignment.copy(), len(out)))
            return
        for v in values:
            if feasible(i, v):
                assignment[i] = v
                rec(i + 1)

    rec(0)
    if not out:
        raise ContractError("net enumeration produced no members; inconsistent meshes")
    return out


def epsilon_minimize(
    J: Functional,
    pclass: PolicyClass,
    eps: float,
    budget: int = DEFAULT_NET_BUDGET,
    net: Optional[list] = None,
) -> tuple[PiecewisePolicy, CertifiedReal]:
    """Certified eps-minimization: J[k*] - eps <= inf over the class.

    Enumerates a delta-net with delta = modulus_step(mu_J, eps/2) and picks
    a member of minimal certified value (ties by lowest enumeration
    index).  The returned certificate radius covers both the evaluator
    radius and the eps/2 net slack, so `value - radius <= inf` holds.

    A caller may pass a prebuilt `net` (from enumerate_policy_net at the
    same delta) to amortize enumeration across functionals.
    """
    if eps <= 0:
        raise ArgumentError("eps must be positive")
    delta = J.modulus.step(eps / 2.0)
    if net is None:
        net = enumerate_policy_net(pclass, delta, budget)
    values = _evaluate_net(J, net)
    best = 0
    for i in range(1, len(values)):
        if values[i].value < values[best].value:
            best = i
    v = values[best]
    if v.radius > eps / 4.0:
        raise ContractError(
            f"functional evaluator radius {v.radius} exceeds eps/4 = {eps / 4.0}; "
            "tighten the evaluator to keep the certificate sound"
        )
    cert = CertifiedReal(v.value, v.radius + eps / 2.0)
    return net[best], cert


def _evaluate_net(J: Functional, net: list[PiecewisePolicy]) -> list[CertifiedReal]:
    if J.batch_evaluator is None:
        return [J.evaluator(p) for p in net]
    return J.batch_evaluator(net)


def net_values_on_grid(net: list[PiecewisePolicy], grid: np.ndarray, chunk: int = 2000) -> np.ndarray:
    """(members, grid, m) array of extended values; members must share a
    node mesh (as enumerate_policy_net guarantees)."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    ref = net[0]
    if any(p.nodes is not ref.nodes for p in net):
        return np.stack([np.atleast_2d(p(grid)) for p in net])
    D = np.linalg.norm(grid[:, None, :] - ref.nodes.points[None, :, :], axis=2)  # (G, N)
    vals = np.stack([p.values for p in net])  # (M, N, m)
    M = vals.shape[0]
    out = np.empty((M, grid.shape[0], vals.shape[2]))
    for s in range(0, M, chunk):
        v = vals[s : s + chunk]
        # (Mc, G, N, m) reduced over N
        t = v[:, None, :, :] - ref.coordinate_lipschitz * D[None, :, :, None]
        out[s : s + chunk] = t.max(axis=2)
    np.clip(out, -ref.bound, ref.bound, out=out)
    return out


# ---------------------------------------------------------------------------
# Mollification
# ---------------------------------------------------------------------------

def _bump_quadrature(n_points: int = 129):
    """Nodes and weights of the normalized compact bump on [-1, 1]."""
    u = np.linspace(-1.0, 1.0, n_points)
    inner = u[1:-1]
    w = np.zeros_like(u)
    w[1:-1] = np.exp(-1.0 / (1.0 - inner * inner))
    w /= w.sum()
    return u, w


@dataclass(frozen=True)
class MollifiedPolicy:
    """Convolution of a policy with a compact bump kernel of the stated
    width; smooth to every order, Lipschitz constant preserved."""

    base: PiecewisePolicy
    width: float
    order: int
    _nodes: np.ndarray = field(repr=False, default=None)
    _weights: np.ndarray = field(repr=False, default=None)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.atleast_2d(x)
        n = self.base.nodes.dim
        if xs.shape[1] != n:
            xs = xs.reshape(-1, n)
        if n != 1:
            raise ArgumentError("mollify currently supports 1-D domains")
        shifted = xs[:, None, 0] - self.width * self._nodes[None, :]
        vals = self.base(shifted.reshape(-1, 1))
        vals = vals.reshape(xs.shape[0], self._nodes.size, -1)
        out = np.tensordot(self._weights, vals, axes=(0, 1))
        if x.ndim <= 1 and xs.shape[0] == 1:
            return out[0]
        return out


def mollify(policy: PiecewisePolicy, d: int, width: float) -> MollifiedPolicy:
    """Smooth eps-optimizer: convolve with a bump kernel of given width.

    Sup-distance to the input is at most (vector Lipschitz) * width and
    the Lipschitz constant is preserved.
    """
    if d < 1:
        raise ArgumentError("smoothing order must be >= 1")
    if width <= 0:
        raise ArgumentError("mollifier width must be positive")
    u, w = _bump_quadrature()
    return MollifiedPolicy(policy, width, d, u, w)


# ---------------------------------------------------------------------------
# Serialization: flat text table, bit-exact round trip
# ---------------------------------------------------------------------------

def policy_to_text(policy: PiecewisePolicy, L: float = None, K: float = None) -> str:
    buf = io.StringIO()
    n = policy.nodes.dim
    m = policy.output_dim
    N = len(policy.nodes)
    Lc = policy.coordinate_lipschitz
    K = policy.bound if K is None else K
    buf.write(f"policy n={n} m={m} N={N} Lc={Lc!r} K={K!r} rule={policy.extension_rule}\n")
    for i in range(N):
        coords = " ".join(repr(float(c)) for c in policy.nodes.points[i])
        vals = " ".join(repr(float(v)) for v in policy.values[i])
        buf.write(f"{coords} | {vals}\n")
    return buf.getvalue()


def policy_from_text(text: str) -> PiecewisePolicy:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split()
    if header[0] != "policy":
        raise ArgumentError("not a policy table")
    meta = dict(kv.split("=", 1) for kv in header[1:])
    n, m, N = int(meta["n"]), int(meta["m"]), int(meta["N"])
    Lc, K = float(meta["Lc"]), float(meta["K"])
    rule = meta.get("rule", "lower_mcshane_clamped")
    pts = np.empty((N, n))
    vals = np.empty((N, m))
    for i, ln in enumerate(lines[1 : N + 1]):
        left, right = ln.split("|")
        pts[i] = [float(t) for t in left.split()]
        vals[i] = [float(t) for t in right.split()]
    mesh = FiniteMesh(pts, math.nan, None)
    return PiecewisePolicy(mesh, vals, Lc, K, extension_rule=rule)
