"""Certified directional derivatives of pointwise maxima.

For psi(x) = max over theta of phi(x, theta), the directional derivative
is approached through the sets of near-optimizers rather than exact
argmaxes: the returned value is the maximum of <grad_x phi, v> over a
sound outer approximation of the delta-optimizer set, with an explicit
slack certificate derived from the gradient modulus over the optimizer
set's diameter.  A finite-difference audit brackets the certified value
between modulus-derived envelopes.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    ArgumentError,
    CertifiedReal,
    ContractError,
    FiniteMesh,
    Hypercube,
    Modulus,
    build_mesh,
)

__all__ = [
    "ParametricObjective",
    "ThetaDomain",
    "DeltaOptimizerSet",
    "psi",
    "delta_optimizers",
    "directional_derivative",
    "psi_modulus",
    "finite_difference_audit",
    "AuditReport",
]


@dataclass(frozen=True)
class ParametricObjective:
    """A continuously differentiable phi(x, theta) with certificate data.

    value(x, thetas) -> (B,) array over a theta batch;
    grad_x(x, thetas) -> (B, n) array of x-gradients.
    modulus_x bounds phi in x uniformly over theta; modulus_theta bounds
    phi in theta; grad_modulus bounds grad_x phi in (x, theta) jointly.
    eval_radius / grad_radius are sound rounding bounds for the two
    evaluators.
    """

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    modulus_x: Modulus
    modulus_theta: Modulus
    grad_modulus: Modulus
    eval_radius: float = 1e-12
    grad_radius: float = 1e-12
    name: str = ""

    def _thetas(self, thetas) -> np.ndarray:
        t = np.asarray(thetas, dtype=float)
        if t.ndim == 1:
            t = t.reshape(-1, 1)
        return t


@dataclass(frozen=True)
class ThetaDomain:
    """Compact parameter domain, realized by its mesh generator."""

    box: Hypercube
    budget: int = 4_000_000

    def mesh(self, eps: float) -> FiniteMesh:
        return build_mesh(self.box, eps, self.budget)


@dataclass(frozen=True)
class DeltaOptimizerSet:
    """Sound outer approximation of the delta-optimizers at x, restricted
    to a finite mesh: contains every mesh node that truly is a
    delta-optimizer."""

    x: np.ndarray
    delta: float
    mesh_eps: float
    points: np.ndarray  # (k, p)
    psi_hat: CertifiedReal

    def __len__(self):
        return self.points.shape[0]

    @property
    def diameter(self) -> float:
        if len(self) <= 1:
            return 0.0
        d = np.linalg.norm(self.points[:, None, :] - self.points[None, :, :], axis=2)
        return float(d.max())


def _as_point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def psi(obj: ParametricObjective, theta_dom: ThetaDomain, x, eps: float) -> CertifiedReal:
    """Certified pointwise maximum over theta."""
    if eps <= 0:
        raise ArgumentError("psi requires eps > 0")
    x = _as_point(x)
    d_theta = min(obj.modulus_theta.step(eps / 2.0), theta_dom.box.diameter)
    mesh = theta_dom.mesh(d_theta)
    vals = np.asarray(obj.value(x, mesh.points), dtype=float)
    v = float(vals.max())
    return CertifiedReal(v, eps / 2.0 + obj.eval_radius)


def delta_optimizers(
    obj: ParametricObjective,
    theta_dom: ThetaDomain,
    x,
    delta: float,
    eps: float,
) -> DeltaOptimizerSet:
    """All mesh nodes certifiably possibly within delta of the maximum.

    Include-on-doubt: a node is kept when its certified value interval
    reaches psi_hat.lower - delta, so the true delta-optimizer mesh nodes
    are always a subset of the returned set.
    """
    if delta <= 0:
        raise ArgumentError("delta must be positive")
    if eps <= 0:
        raise ArgumentError("mesh eps must be positive")
    x = _as_point(x)
    mesh = theta_dom.mesh(min(eps, theta_dom.box.diameter))
    vals = np.asarray(obj.value(x, mesh.points), dtype=float)
    v = float(vals.max())
    psi_hat = CertifiedReal(v, obj.modulus_theta.forward_bound(eps) + obj.eval_radius)
    cut = psi_hat.value - psi_hat.radius - delta
    keep = vals + obj.eval_radius >= cut
    return DeltaOptimizerSet(x, delta, eps, mesh.points[keep], psi_hat)


def _member_gradients(obj, dset: DeltaOptimizerSet, v: np.ndarray) -> np.ndarray:
    g = np.asarray(obj.grad_x(dset.x, dset.points), dtype=float)
    if g.ndim == 1:
        g = g.reshape(-1, 1)
    return g @ v


def directional_derivative(
    obj: ParametricObjective,
    theta_dom: ThetaDomain,
    x,
    v,
    delta: float,
    mesh_eps: Optional[float] = None,
) -> CertifiedReal:
    """max over the delta-optimizer set of <grad_x phi(x, theta), v>.

    The radius combines the gradient modulus over the optimizer set's
    diameter (which covers the spread of member derivatives, the honest
    delta-dependent part) with the mesh gap and evaluator rounding.  The
    certified claim is |D_v psi(x) - value| <= delta + radius.
    """
    if delta <= 0:
        raise ArgumentError("delta must be positive")
    x = _as_point(x)
    v = _as_point(v)
    vnorm = float(np.linalg.norm(v))
    if vnorm == 0.0:
        return CertifiedReal(0.0, 0.0)
    if mesh_eps is None:
        mesh_eps = min(
            obj.grad_modulus.step(delta / 4.0),
            obj.modulus_theta.step(delta / 4.0),
            theta_dom.box.diameter / 8.0,
        )
    dset = delta_optimizers(obj, theta_dom, x, delta, mesh_eps)
    dirs = _member_gradients(obj, dset, v)
    val = float(dirs.max())
    slack = vnorm * (
        obj.grad_modulus.forward_bound(dset.diameter + mesh_eps)
        + obj.grad_modulus.forward_bound(mesh_eps)
    ) + vnorm * obj.grad_radius
    return CertifiedReal(val, slack)


def member_spread(obj: ParametricObjective, dset: DeltaOptimizerSet, v) -> tuple[float, float]:
    """Observed spread of member directional derivatives and the certified
    slack that must dominate it (gradient modulus over the set diameter)."""
    v = _as_point(v)
    vnorm = float(np.linalg.norm(v))
    if vnorm == 0.0 or len(dset) == 0:
        return 0.0, 0.0
    dirs = _member_gradients(obj, dset, v)
    spread = float(dirs.max() - dirs.min())
    slack = vnorm * obj.grad_modulus.forward_bound(dset.diameter) + 2.0 * vnorm * obj.grad_radius
    return spread, slack


def psi_modulus(obj: ParametricObjective) -> Modulus:
    """psi inherits phi's modulus in x unchanged."""
    if obj.modulus_x is None:
        raise ContractError("objective carries no x-modulus")
    return obj.modulus_x


@dataclass(frozen=True)
class AuditReport:
    x: np.ndarray
    v: np.ndarray
    delta: float
    derivative: CertifiedReal
    rows: list  # (h, quotient, lower, upper)

    @property
    def all_bracketed(self) -> bool:
        return all(lo <= q <= hi for _, q, lo, hi in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("h,quotient,lower,upper\n")
        for h, q, lo, hi in self.rows:
            buf.write(f"{h!r},{q!r},{lo!r},{hi!r}\n")
        return buf.getvalue()


def finite_difference_audit(
    obj: ParametricObjective,
    theta_dom: ThetaDomain,
    x,
    v,
    delta: float,
    h_sequence,
) -> AuditReport:
    """Numerical check of the quotient sandwich around the certified
    directional derivative.

    For each step h (clamped to (0, 1]) the quotient
    (psi(x + h v) - psi(x)) / h must lie within
    [D - delta - slack(h), D + slack(h)] where slack(h) combines the
    derivative certificate radius, the segment variation of the gradient
    and the psi evaluation noise at step h.
    """
    hs = sorted({float(h) for h in h_sequence}, reverse=True)
    if not hs or hs[-1] <= 0:
        raise ArgumentError("h-sequence must be positive and decreasing")
    hs = [min(h, 1.0) for h in hs]
    x = _as_point(x)
    v = _as_point(v)
    vnorm = float(np.linalg.norm(v))
    D = directional_derivative(obj, theta_dom, x, v, delta)
    # floor on the psi precision so the theta mesh stays within budget;
    # the looser precision is reported through the noise envelope
    box = theta_dom.box
    d_min = box.diameter * math.sqrt(box.dim) / 2.0 * (theta_dom.budget / 4.0) ** (-1.0 / box.dim)
    eps_floor = 2.0 * obj.modulus_theta.forward_bound(d_min)
    rows = []
    for h in hs:
        eps_psi = max(h * delta / 8.0, eps_floor, 1e-12)
        p1 = psi(obj, theta_dom, x + h * v, eps_psi)
        p0 = psi(obj, theta_dom, x, eps_psi)
        q = (p1.value - p0.value) / h
        noise = (p1.radius + p0.radius) / h
        segment = vnorm * obj.grad_modulus.forward_bound(h * vnorm)
        upper = D.value + D.radius + segment + noise
        lower = D.value - delta - D.radius - segment - noise
        rows.append((h, q, lower, upper))
    return AuditReport(x, v, delta, D, rows)
