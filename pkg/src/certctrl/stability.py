"""Lyapunov certificate checking, CLF optimization feedback and certified
sample-and-hold sampling-time search.

Margin semantics: positive-definite data vanishes at the origin, so the
sandwich and decay inequalities cannot carry a uniform margin there; the
exact origin node is excluded (its equality is structural) and the
certificate reports the annulus radius from which node margins dominate
the inter-node modulus slack.  Equality within the evaluation radius at
any other node yields `undecided`, never `certified`.

The sampling-time search is an empirical-certified bisection: a candidate
eta is certified when every annulus mesh state, under the sample-and-hold
closed loop, decreases the Lyapunov function each interval by more than
the solver slack plus a reserve of eta * eps (the optimizer tolerance per
unit time) until it enters the target ball with the same reserve.  The
reserve is what makes certified sampling times shrink as the optimizer
tolerance grows, and fail once the tolerance eats the decay margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    ArgumentError,
    Certificate,
    CertifiedReal,
    ContractError,
    Hypercube,
    Modulus,
    build_mesh,
)
from .trajectories import ControlledDynamics, RegularRHS, picard_solve

__all__ = [
    "Comparator",
    "LyapunovData",
    "CheckResult",
    "StabilityCertificate",
    "SublevelSet",
    "CLFProblem",
    "SamplingTimeResult",
    "check_sandwich",
    "check_decay",
    "check_linear_growth",
    "certify",
    "clf_feedback",
    "find_sampling_time",
]


@dataclass(frozen=True)
class Comparator:
    """Positive-definite comparison function with certificate data: a
    modulus for inter-node slack and a strict-increase witness nu with
    w(y) - w(x) > nu(x, y) > 0 whenever |x| < |y| (rational points)."""

    fn: Callable[[np.ndarray], np.ndarray]  # (B, n) -> (B,)
    modulus: Modulus
    nu: Optional[Callable] = None
    eval_radius: float = 1e-12
    name: str = ""

    def __call__(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(xs)), dtype=float)

    def validate_witness(self, rng: np.random.Generator, box: Hypercube, n_pairs: int = 64):
        if self.nu is None:
            raise ContractError(f"comparator {self.name or ''} lacks a strict-increase witness")
        pts = box.sample(rng, 2 * n_pairs)
        pts = np.round(pts * 1024) / 1024  # rational sample points
        for i in range(n_pairs):
            x, y = pts[2 * i], pts[2 * i + 1]
            if np.linalg.norm(x) >= np.linalg.norm(y):
                x, y = y, x
            if np.linalg.norm(x) == np.linalg.norm(y):
                continue
            gap = float(self.nu(x, y))
            if gap <= 0:
                raise ContractError("witness returned a non-positive gap")
            wx = float(self(x[None, :])[0])
            wy = float(self(y[None, :])[0])
            if not wy - wx > gap - 2 * self.eval_radius:
                raise ContractError(
                    f"witness gap {gap} not honored at |x|={np.linalg.norm(x)}, "
                    f"|y|={np.linalg.norm(y)}"
                )


@dataclass(frozen=True)
class LyapunovData:
    """Candidate V with comparators and the along-system derivative.

    Vdot is user-supplied (analytic <grad V, f> plus any explicit time
    term); a finite-difference audit in the tests cross-checks it.
    """

    V: Callable[[np.ndarray, float], np.ndarray]  # (B, n), t -> (B,)
    Vdot: Callable[[np.ndarray, float], np.ndarray]
    w1: Comparator
    w2: Comparator
    w3: Comparator
    xi: float
    v_modulus_x: Modulus
    v_modulus_t: Modulus
    vdot_modulus_x: Modulus
    v_radius: float = 1e-12

    def __post_init__(self):
        if self.xi <= 0:
            raise ArgumentError("xi must be positive")


@dataclass(frozen=True)
class CheckResult:
    verdict: str  # "certified" | "counterexample" | "undecided"
    margin: float  # worst node margin (normalized for the growth check)
    counterexample: object = None
    covered_radius: Optional[float] = None  # annulus from which moduli cover gaps
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "certified"


def _origin_excluded_nodes(box: Hypercube, mesh_eps: float):
    mesh = build_mesh(box, mesh_eps)
    pts = mesh.points
    norms = np.linalg.norm(pts, axis=1)
    keep = norms > 0.0  # the origin node is structural equality, not data
    return pts[keep], norms[keep]


def _covered_radius(norms: np.ndarray, margins: np.ndarray, slack: float, box: Hypercube):
    """Smallest annulus radius from which every node margin dominates the
    inter-node slack; None when even the outermost nodes fail."""
    order = np.argsort(norms)[::-1]
    rho = None
    for i in order:
        if margins[i] >= slack:
            rho = float(norms[i])
        else:
            break
    return rho


def _two_sided_verdict(
    pts, norms, margins, eval_radius, slack, box, inner_fraction=0.5, t_of=None
):
    bad = int(np.argmin(margins))
    if margins[bad] < -eval_radius:
        point = pts[bad]
        ce = {"point": point, "margin": float(margins[bad])}
        if t_of is not None:
            ce["t"] = t_of[bad]
        return CheckResult("counterexample", float(margins[bad]), ce)
    if margins[bad] <= eval_radius:
        # equality within the certificate radius: constructively undecided
        return CheckResult(
            "undecided",
            float(margins[bad]),
            details={"hint": "margin within evaluation radius; refine the mesh"},
        )
    rho = _covered_radius(norms, margins, slack, box)
    inscribed = box.side / 2.0
    if rho is None or rho > inner_fraction * inscribed:
        return CheckResult(
            "undecided",
            float(margins[bad]),
            covered_radius=rho,
            details={"hint": f"mesh too coarse for margins; slack {slack}"},
        )
    return CheckResult("certified", float(margins[bad]), covered_radius=rho)


def check_sandwich(data: LyapunovData, box: Hypercube, mesh_eps: float, t_samples) -> CheckResult:
    """w1(x) <= V(x, t) <= w2(x) at mesh nodes and t-samples, with moduli
    covering the gaps on the reported annulus."""
    t_samples = list(t_samples)
    if not t_samples:
        raise ArgumentError("need at least one t sample")
    if data.v_modulus_x is None or data.v_modulus_t is None:
        raise ContractError("sandwich check needs V's x- and t-moduli")
    if data.w1.modulus is None or data.w2.modulus is None:
        raise ContractError("comparators need moduli for inter-node slack")
    pts, norms = _origin_excluded_nodes(box, mesh_eps)
    w1 = data.w1(pts)
    w2 = data.w2(pts)
    margins = np.full(pts.shape[0], np.inf)
    worst_t = np.zeros(pts.shape[0])
    for t in t_samples:
        v = np.asarray(data.V(pts, t), dtype=float)
        m = np.minimum(v - w1, w2 - v)
        upd = m < margins
        worst_t[upd] = t
        margins = np.minimum(margins, m)
    eval_r = data.v_radius + data.w1.eval_radius + data.w2.eval_radius
    t_gap = max(
        (b - a) for a, b in zip(sorted(t_samples), sorted(t_samples)[1:])
    ) if len(t_samples) > 1 else 0.0
    slack = (
        data.v_modulus_x.forward_bound(mesh_eps)
        + max(data.w1.modulus.forward_bound(mesh_eps), data.w2.modulus.forward_bound(mesh_eps))
        + data.v_modulus_t.forward_bound(t_gap / 2.0)
        + eval_r
    )
    return _two_sided_verdict(pts, norms, margins, eval_r, slack, box, t_of=worst_t)


def check_decay(data: LyapunovData, box: Hypercube, mesh_eps: float, t_samples) -> CheckResult:
    """Vdot(x, t) <= -w3(x) with the same margin semantics."""
    t_samples = list(t_samples)
    if not t_samples:
        raise ArgumentError("need at least one t sample")
    if data.vdot_modulus_x is None or data.w3.modulus is None:
        raise ContractError("decay check needs Vdot's x-modulus and w3's modulus")
    pts, norms = _origin_excluded_nodes(box, mesh_eps)
    w3 = data.w3(pts)
    margins = np.full(pts.shape[0], np.inf)
    worst_t = np.zeros(pts.shape[0])
    for t in t_samples:
        vd = np.asarray(data.Vdot(pts, t), dtype=float)
        m = -vd - w3
        upd = m < margins
        worst_t[upd] = t
        margins = np.minimum(margins, m)
    eval_r = data.v_radius + data.w3.eval_radius
    slack = (
        data.vdot_modulus_x.forward_bound(mesh_eps)
        + data.w3.modulus.forward_bound(mesh_eps)
        + eval_r
    )
    return _two_sided_verdict(pts, norms, margins, eval_r, slack, box, t_of=worst_t)


def check_linear_growth(
    w2: Comparator, xi: float, box: Hypercube, mesh_eps: float, min_gap: Optional[float] = None
) -> CheckResult:
    """w2(x) - w2(y) >= xi (|x| - |y|) over ordered mesh pairs.

    The margin is the normalized slope surplus
    (w2(x) - w2(y) - xi (|x| - |y|)) / (|x| - |y|), evaluated over pairs
    with a norm gap of at least min_gap (equal-norm pairs are structural
    equalities).  Certified requires a strictly positive worst slope;
    zero surplus (w2 = xi |x|) is the boundary case and stays undecided.
    """
    if xi <= 0:
        raise ArgumentError("xi must be positive")
    pts, norms = _origin_excluded_nodes(box, mesh_eps)
    if min_gap is None:
        min_gap = mesh_eps / 2.0
    w = w2(pts)
    worst = math.inf
    worst_pair = None
    for i in range(pts.shape[0]):
        gaps = norms[i] - norms
        ok = gaps >= min_gap
        if not np.any(ok):
            continue
        slopes = (w[i] - w[ok] - xi * gaps[ok]) / gaps[ok]
        j = int(np.argmin(slopes))
        if slopes[j] < worst:
            worst = float(slopes[j])
            worst_pair = (pts[i], pts[ok][j])
    if worst_pair is None:
        raise ArgumentError("mesh has no ordered pairs at this resolution")
    eval_r = 2.0 * w2.eval_radius / min_gap
    if worst < -eval_r:
        return CheckResult(
            "counterexample", worst, {"pair": worst_pair, "slope_margin": worst}
        )
    if worst <= eval_r:
        return CheckResult("undecided", worst, details={"hint": "zero slope margin"})
    return CheckResult("certified", worst, covered_radius=None)


@dataclass(frozen=True)
class SublevelSet:
    """X0 = {x : w2(x) <= level}: forward-invariant by the comparison
    argument (w2 <= min of w1 on the inscribed sphere)."""

    w2: Comparator
    level: float

    def contains(self, x) -> bool:
        val = float(self.w2(np.atleast_2d(np.asarray(x, dtype=float)))[0])
        return val + self.w2.eval_radius <= self.level

    def sample(self, rng: np.random.Generator, box: Hypercube, n: int) -> np.ndarray:
        out = []
        guard = 0
        while len(out) < n and guard < 2000 * n:
            guard += 1
            x = box.sample(rng, 1)[0]
            if self.contains(x):
                out.append(x)
        if len(out) < n:
            raise ContractError("sublevel set too small to sample; raise the level")
        return np.array(out)


@dataclass(frozen=True)
class StabilityCertificate:
    verdict: str
    x0_set: Optional[SublevelSet]
    mesh_eps: float
    tolerances: dict
    checks: dict
    witness: object = None
    counterexample: object = None

    def as_certificate(self) -> Certificate:
        return Certificate(
            verdict=self.verdict,
            tolerances=self.tolerances,
            mesh_resolution=self.mesh_eps,
            witness=self.witness,
            counterexample=self.counterexample,
            details={k: v.verdict for k, v in self.checks.items()},
        )


def certify(
    data: LyapunovData,
    box: Hypercube,
    mesh_eps: float,
    t_samples,
    rng: Optional[np.random.Generator] = None,
) -> StabilityCertificate:
    """Combine the three condition checks; on success construct
    X0 = {w2 <= min of w1 on the inscribed sphere} (one valid choice, not
    claimed maximal)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    for w in (data.w1, data.w2, data.w3):
        w.validate_witness(rng, box)
    checks = {
        "sandwich": check_sandwich(data, box, mesh_eps, t_samples),
        "decay": check_decay(data, box, mesh_eps, t_samples),
        "linear_growth": check_linear_growth(data.w2, data.xi, box, mesh_eps),
    }
    tolerances = {"mesh_eps": mesh_eps, "xi": data.xi}
    for name, res in checks.items():
        if res.verdict == "counterexample":
            return StabilityCertificate(
                "counterexample", None, mesh_eps, tolerances, checks,
                counterexample={"check": name, **(res.counterexample or {})},
            )
    if any(res.verdict == "undecided" for res in checks.values()):
        return StabilityCertificate("undecided", None, mesh_eps, tolerances, checks)

    # sublevel construction on the inscribed sphere
    rho = box.side / 2.0
    pts, norms = _origin_excluded_nodes(box, mesh_eps)
    near = np.abs(norms - rho) <= mesh_eps
    if not np.any(near):
        return StabilityCertificate("undecided", None, mesh_eps, tolerances, checks)
    w1_near = data.w1(pts[near])
    level = float(w1_near.min()) - data.w1.modulus.forward_bound(mesh_eps) - data.w1.eval_radius
    if level <= 0:
        return StabilityCertificate("undecided", None, mesh_eps, tolerances, checks)
    x0 = SublevelSet(data.w2, level)
    witness = {
        "level": level,
        "sphere_radius": rho,
        "annulus_radius": max(
            r for r in (checks["sandwich"].covered_radius, checks["decay"].covered_radius) if r
        ),
    }
    return StabilityCertificate("certified", x0, mesh_eps, tolerances, checks, witness=witness)


# ---------------------------------------------------------------------------
# CLF feedback and sampling time
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CLFProblem:
    dynamics: ControlledDynamics
    control_box: Hypercube
    V: Callable[[np.ndarray], np.ndarray]  # (B, n) -> (B,)
    grad_V: Callable[[np.ndarray], np.ndarray]  # (n,) -> (n,)
    v_lipschitz: float
    target_radius: float  # r
    overshoot_radius: float  # R
    w3: Optional[Comparator] = None
    v_radius: float = 1e-12

    def __post_init__(self):
        if not (0 < self.target_radius < self.overshoot_radius):
            raise ArgumentError("need 0 < r < R")
        if self.overshoot_radius > self.dynamics.state_box.side / 2.0 + 1e-12:
            raise ArgumentError("R must fit inside the state box")


def clf_feedback(problem: CLFProblem, x, eps: float) -> tuple[np.ndarray, CertifiedReal]:
    """eps-minimize u -> <grad V(x), f(x, u)> over the control box mesh.

    Returns the lowest-index mesh node whose certified value reaches the
    certified minimum within eps (any such node is a legitimate
    eps-optimizer; the deterministic tie-break makes runs reproducible and
    realizes the worst-case freedom an approximate optimizer has).
    """
    if eps <= 0:
        raise ArgumentError("eps must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.asarray(problem.grad_V(x), dtype=float)
    lip_g = float(np.linalg.norm(g)) * problem.dynamics.lip_u
    if lip_g == 0.0:
        mesh = build_mesh(problem.control_box, problem.control_box.diameter)
    else:
        mesh = build_mesh(problem.control_box, (eps / 2.0) / lip_g)
    vals = np.empty(len(mesh))
    for j in range(len(mesh)):
        f = problem.dynamics.f(x[None, :], mesh.points[j])
        vals[j] = float(g @ f[0])
    r_g = 1e-12 * (1.0 + float(np.abs(vals).max()))
    cut = vals.min() + eps / 2.0 - 2.0 * r_g
    idx = int(np.argmax(vals <= cut))
    return mesh.points[idx], CertifiedReal(float(vals[idx]), eps / 2.0 + 2.0 * r_g)


@dataclass(frozen=True)
class SamplingTimeResult:
    verdict: str  # "certified" | "failure"
    eta: Optional[float]
    margin: Optional[float]
    diagnosis: str = ""
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict == "certified"


def _annulus_nodes(problem: CLFProblem, mesh_eps: float) -> np.ndarray:
    box = Hypercube(problem.dynamics.state_box.center, 2.0 * problem.overshoot_radius)
    mesh = build_mesh(box, mesh_eps)
    norms = np.linalg.norm(mesh.points, axis=1)
    keep = (norms >= problem.target_radius) & (norms <= problem.overshoot_radius + 1e-12)
    return mesh.points[keep]


def _simulate_closed_loop(
    problem: CLFProblem,
    kappa,
    x0: np.ndarray,
    eta: float,
    eps: float,
    eps_loc: float,
    max_steps: int,
):
    """Run the SH loop from x0; certified success means entering the
    target ball with reserve while V decreases each interval by more than
    the reserve plus solver slack.  Returns (ok, min margin, samples)."""
    dyn = problem.dynamics
    r = problem.target_radius
    reserve = eta * eps
    entry_cut = r - reserve - 2.0 * eps_loc
    if entry_cut <= 0:
        return False, -math.inf, [x0]
    x = np.asarray(x0, dtype=float).copy()
    samples = [x.copy()]
    margin = math.inf
    for _ in range(max_steps):
        if np.linalg.norm(x) <= entry_cut:
            return True, margin, samples
        u = np.atleast_1d(np.asarray(kappa(x), dtype=float))
        rhs = RegularRHS.single(
            lambda xs, ts, u=u: dyn.f(xs, u), eta, dyn.state_box, dyn.lip_x, dyn.sup_bound
        )
        try:
            sol = picard_solve(rhs, x, eta, eps_loc)
        except Exception:
            return False, -math.inf, samples
        x_new = sol.endpoint
        v0 = float(problem.V(x[None, :])[0])
        v1 = float(problem.V(x_new[None, :])[0])
        slack = problem.v_lipschitz * sol.error_bound.value + 2.0 * problem.v_radius
        entered = np.linalg.norm(x_new) <= entry_cut
        dec = v0 - v1
        if not entered:
            need = reserve + slack
            if dec < need:
                return False, dec - need, samples + [x_new.copy()]
            margin = min(margin, dec - need)
        x = x_new
        samples.append(x.copy())
    return False, -math.inf, samples


def find_sampling_time(
    problem: CLFProblem,
    kappa,
    eta_max: float,
    eps: float,
    mesh_eps: float = 0.1,
    resolution: Optional[float] = None,
    eps_loc: Optional[float] = None,
) -> SamplingTimeResult:
    """Largest mesh-certified sampling time by empirical bisection.

    kappa is the (eps-tolerance) feedback, typically built from
    clf_feedback; eps enters the certificates as the per-unit-time reserve
    the observed decrease must dominate.  On failure the diagnosis
    distinguishes an inadequate CLF (no certified decay direction at some
    node even with a fine optimizer) from a too-large optimizer tolerance.
    """
    if eta_max <= 0:
        raise ArgumentError("eta_max must be positive")
    if resolution is None:
        resolution = eta_max / 256.0
    nodes = _annulus_nodes(problem, mesh_eps)
    if nodes.shape[0] == 0:
        raise ArgumentError("annulus mesh empty; refine mesh_eps")

    def certified(eta: float):
        worst = math.inf
        max_steps = max(20, math.ceil(6.0 * problem.overshoot_radius / eta))
        # solver tolerance well under the eta*eps reserve it must not mask
        el = eps_loc if eps_loc is not None else max(1e-12, eta * eps / 100.0)
        for x0 in nodes:
            ok, margin, _ = _simulate_closed_loop(
                problem, kappa, x0, eta, eps, el, max_steps
            )
            if not ok:
                return False, margin
            worst = min(worst, margin)
        return True, worst

    # geometric probe downward for a certifiable eta
    eta_lo, margin_lo = None, None
    probe = eta_max
    while probe >= resolution:
        ok, margin = certified(probe)
        if ok:
            eta_lo, margin_lo = probe, margin
            break
        probe /= 2.0
    if eta_lo is None:
        return SamplingTimeResult(
            "failure", None, None, diagnosis=_diagnose(problem, nodes, eps),
            details={"resolution": resolution},
        )
    if eta_lo == eta_max:
        return SamplingTimeResult("certified", eta_max, margin_lo)
    lo, hi = eta_lo, min(2.0 * eta_lo, eta_max)
    best_margin = margin_lo
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        ok, margin = certified(mid)
        if ok:
            lo, best_margin = mid, margin
        else:
            hi = mid
    return SamplingTimeResult("certified", lo, best_margin)


def _diagnose(problem: CLFProblem, nodes: np.ndarray, eps: float) -> str:
    """Separate CLF inadequacy from optimizer-tolerance starvation.

    The probe only needs the sign of the best certified decay rate, so a
    moderate optimizer tolerance suffices.
    """
    fine = min(eps, 1e-3)
    worst_rate = -math.inf
    for x0 in nodes:
        _, val = clf_feedback(problem, x0, fine)
        worst_rate = max(worst_rate, val.value + val.radius)
    if worst_rate >= 0:
        return (
            f"clf_inadequate: no certified decay direction at some annulus node "
            f"(best certified rate {worst_rate:+.3g})"
        )
    return (
        f"optimizer_tolerance: decay exists (worst certified rate {worst_rate:+.3g}) "
        f"but the optimizer tolerance eps={eps} consumes the decrease reserve"
    )
