"""Command-line harness: every module as a subcommand, config-driven,
with uniform JSON certificates and CSV data files.

Exit codes: 0 certified/success, 1 counterexample/failure, 2 undecided,
64 config error.  Certificates are reproducible: the numeric fields are
bit-identical across runs with the same config and seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ArgumentError,
    CertifiedReal,
    ContractError,
    Hypercube,
    Modulus,
    ResourceBudgetError,
    build_mesh,
    parallel_map,
)
from . import danskin as dk
from . import eigen as eig
from . import evt
from . import selector as sel
from . import stability as stab
from . import trajectories as traj
from .forms import build_comparator, build_scalar_form, parse_complex_matrix, poly_multiply

EXIT_OK = 0
EXIT_COUNTEREXAMPLE = 1
EXIT_UNDECIDED = 2
EXIT_CONFIG = 64

_VERDICT_EXIT = {
    "certified": EXIT_OK,
    "success": EXIT_OK,
    "stable": EXIT_OK,
    "counterexample": EXIT_COUNTEREXAMPLE,
    "failure": EXIT_COUNTEREXAMPLE,
    "unstable": EXIT_COUNTEREXAMPLE,
    "undecided": EXIT_UNDECIDED,
}

TASKS = ("evt-min", "danskin", "selector", "eig", "ode", "shh", "certify", "audit")


def _digest(config: dict, seed: int) -> str:
    blob = json.dumps({"config": config, "seed": seed}, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _interval(pair) -> Hypercube:
    lo, hi = float(pair[0]), float(pair[1])
    if not lo < hi:
        raise ArgumentError(f"degenerate interval {pair}")
    return Hypercube(np.array([(lo + hi) / 2.0]), hi - lo)


def _write_csv(path: Path, header: str, rows) -> None:
    with path.open("w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# task handlers: each returns (verdict, numeric fields, witness payload)
# ---------------------------------------------------------------------------

def _task_evt_min(config, seed, workers, out):
    pc = config["policy_class"]
    pclass = evt.PolicyClass(
        _interval(pc["domain"]), 1, float(pc["lipschitz"]), float(pc["bound"])
    )
    spec = config["functional"]
    grid = np.linspace(*[float(v) for v in pc["domain"]], 401).reshape(-1, 1)
    if spec["kind"] == "sup_distance":
        target = build_scalar_form(spec["target"])
        tvals = target(grid[:, 0])
        gap = float(grid[1, 0] - grid[0, 0])
        rad = (pclass.lipschitz + target.lipschitz_on(1.0)) * gap / 2.0 + 1e-12

        def ev(policy):
            return CertifiedReal(float(np.abs(policy(grid)[:, 0] - tvals).max()), rad)

        J = evt.Functional(ev, Modulus.lipschitz(1.0), name="sup_distance")
    elif spec["kind"] == "mean":
        def ev(policy):
            return CertifiedReal(float(policy(grid)[:, 0].mean()), 1e-9)

        J = evt.Functional(ev, Modulus.lipschitz(1.0), name="mean")
    else:
        raise ArgumentError(f"unknown functional kind {spec['kind']!r}: sup_distance, mean")
    eps = float(config["eps"])
    policy, cert = evt.epsilon_minimize(J, pclass, eps)
    (out / "policy.txt").write_text(evt.policy_to_text(policy))
    numeric = {
        "value": cert.value,
        "radius": cert.radius,
        "eps": eps,
        "member_index": policy.index,
    }
    return "certified", numeric, {"policy_file": "policy.txt"}


_DANSKIN_OBJECTIVES = {
    "bilinear": lambda: (
        dk.ParametricObjective(
            value=lambda x, th: th[:, 0] * x[0],
            grad_x=lambda x, th: th[:, :1].copy(),
            modulus_x=Modulus.lipschitz(1.0),
            modulus_theta=Modulus.lipschitz(2.0),
            grad_modulus=Modulus.lipschitz(1.0),
            name="bilinear",
        )
    ),
    "neg_quadratic": lambda: (
        dk.ParametricObjective(
            value=lambda x, th: -((th[:, 0] - x[0]) ** 2),
            grad_x=lambda x, th: (2.0 * (th[:, 0] - x[0]))[:, None],
            modulus_x=Modulus.lipschitz(4.0),
            modulus_theta=Modulus.lipschitz(4.0),
            grad_modulus=Modulus.lipschitz(4.0),
            name="neg_quadratic",
        )
    ),
    "concave_linear": lambda: (
        dk.ParametricObjective(
            value=lambda x, th: th[:, 0] * x[0] - th[:, 0] ** 2,
            grad_x=lambda x, th: th[:, :1].copy(),
            modulus_x=Modulus.lipschitz(1.0),
            modulus_theta=Modulus.lipschitz(4.0),
            grad_modulus=Modulus.lipschitz(1.0),
            name="concave_linear",
        )
    ),
}


def _task_danskin(config, seed, workers, out):
    name = config["objective"]
    if name not in _DANSKIN_OBJECTIVES:
        raise ArgumentError(
            f"unknown objective {name!r}; registry: {sorted(_DANSKIN_OBJECTIVES)}"
        )
    obj = _DANSKIN_OBJECTIVES[name]()
    dom = dk.ThetaDomain(_interval(config.get("theta_box", [-1, 1])), budget=400_000)
    x = np.array([float(config["x"])])
    v = np.array([float(config["v"])])
    delta = float(config["delta"])
    hs = [float(h) for h in config.get("h_sequence", [1e-1, 1e-2, 1e-3, 1e-4])]
    report = dk.finite_difference_audit(obj, dom, x, v, delta, hs)
    (out / "audit.csv").write_text(report.to_csv())
    dset = dk.delta_optimizers(obj, dom, x, delta, min(0.01, delta / 4.0))
    spread, slack = dk.member_spread(obj, dset, v)
    numeric = {
        "derivative": report.derivative.value,
        "radius": report.derivative.radius,
        "delta": delta,
        "member_spread": spread,
        "spread_slack": slack,
        "n_members": len(dset),
    }
    verdict = "certified" if (report.all_bracketed and spread <= delta + slack) else "counterexample"
    return verdict, numeric, {"audit_file": "audit.csv"}


def _task_selector(config, seed, workers, out):
    blocks = tuple(sel.Block.interval(Fraction(str(a)), Fraction(str(b)))
                   for a, b in config["domain_blocks"])
    chunks = []
    for chunk_list in config["chunks"]:
        here = []
        for ch in chunk_list:
            alpha = build_scalar_form(ch["alpha"])
            beta = build_scalar_form(ch["beta"])
            R = max(abs(float(b.intervals[0][0])) + float(b.intervals[0][1] - b.intervals[0][0])
                    for b in blocks)
            L = max(alpha.lipschitz_on(R), beta.lipschitz_on(R))
            here.append(sel.Chunk(
                alpha=lambda x, f=alpha: float(f(np.atleast_1d(x)[0])),
                beta=lambda x, f=beta: float(f(np.atleast_1d(x)[0])),
                modulus=Modulus.lipschitz(L),
                eval_radius=1e-9,
            ))
        chunks.append(tuple(here))
    lo, hi = config.get("value_range", [0, 1])
    F = sel.RegularSVF(blocks, tuple(chunks), (Fraction(str(lo)), Fraction(str(hi))))
    eps = float(config["eps"])
    budget = Fraction(str(config.get("exception_budget", "1/100")))
    selector = sel.extract_selector(F, eps)
    rng = np.random.default_rng(seed)
    pts = selector.domain.sample_off_exception(rng, int(config.get("samples", 1000)), budget)
    dists = [F.located_distance_to(x, selector(x)) for x in pts]
    _write_csv(
        out / "selector.csv",
        "lo,hi,value",
        [(float(b.intervals[0][0]), float(b.intervals[0][1]), float(v))
         for b, v in selector.pieces],
    )
    numeric = {
        "eps": eps,
        "n_pieces": len(selector.pieces),
        "max_distance": max(dists),
        "exception_volume": float(selector.domain.exception(budget).volume_exact()),
        "proper": 1 if selector.proper() else 0,
    }
    ok = numeric["proper"] == 1 and numeric["max_distance"] <= eps + 1e-12
    return ("certified" if ok else "counterexample"), numeric, {"selector_file": "selector.csv"}


def _task_eig(config, seed, workers, out):
    if "matrix_file" in config:
        A = parse_complex_matrix(Path(config["matrix_file"]).read_text())
    else:
        A = np.array(config["matrix"], dtype=complex)
    eps = float(config.get("eps", 1e-8))
    verdict = eig.hurwitz_verdict(A, eps)
    pairs, achieved = eig.approx_eigenpairs(A, eps, seed=seed)
    _write_csv(
        out / "roots.csv",
        "re,im,radius,multiplicity",
        [(c.center.real, c.center.imag, c.radius, c.multiplicity) for c in verdict.clusters],
    )
    numeric = {
        "eps": eps,
        "max_real_part": verdict.margin.value,
        "margin_radius": verdict.margin.radius,
        "n_pairs": len(pairs),
        "max_residual": max((p.residual.value + p.residual.radius for p in pairs), default=0.0),
        "achieved": 1 if achieved else 0,
    }
    return verdict.verdict, numeric, {"roots_file": "roots.csv"}


def _ode_rhs_from_config(config) -> traj.RegularRHS:
    box = _interval(config["state_box"])
    R = float(np.abs(box.center).max() + box.side / 2.0)
    blocks = []
    for b in config["blocks"]:
        form = build_scalar_form(b["f"])
        lip = form.lipschitz_on(R)
        # sup of |f| over the box from the form on [-R, R]
        probe = np.linspace(-R, R, 2001)
        sup = float(np.abs(form(probe)).max()) * 1.05 + 1e-9
        blocks.append(traj.TimeBlockRHS(
            Fraction(str(b["t_lo"])), Fraction(str(b["t_hi"])),
            lambda xs, ts, f=form: f(xs),
            lip, Modulus.lipschitz(0.0), sup,
        ))
    return traj.RegularRHS(tuple(blocks), box)


def _task_ode(config, seed, workers, out):
    rhs = _ode_rhs_from_config(config)
    x0 = np.atleast_1d(np.asarray(config["x0"], dtype=float))
    T = float(config["T"])
    eps = float(config["eps"])
    sol = traj.picard_solve(rhs, x0, T, eps)
    (out / "trajectory.csv").write_text(
        traj.solution_to_csv(sol, int(config.get("csv_points", 2000)))
    )
    numeric = {
        "T": T,
        "eps": eps,
        "endpoint": float(sol.endpoint[0]),
        "error_bound": sol.error_bound.value,
        "grid_nodes": int(sol.grid.size),
    }
    return "certified", numeric, {"trajectory_file": "trajectory.csv"}


def _shh_problem(config) -> stab.CLFProblem:
    if config.get("dynamics", "integrator") != "integrator":
        raise ArgumentError("shh dynamics registry: integrator")
    state_box = _interval(config.get("state_box", [-2, 2]))
    dyn = traj.ControlledDynamics(
        f=lambda xs, u: np.broadcast_to(u, xs.shape).copy(),
        state_box=state_box,
        lip_x=0.0,
        lip_u=1.0,
        sup_bound=float(_interval(config["control_box"]).side / 2.0
                        + abs(_interval(config["control_box"]).center[0])),
    )
    vform = build_scalar_form(config.get("V", {"form": "polynomial", "coeffs": [0, 0, 1]}))
    R = state_box.side / 2.0
    return stab.CLFProblem(
        dynamics=dyn,
        control_box=_interval(config["control_box"]),
        V=lambda xs, f=vform: f(xs[:, 0]),
        grad_V=lambda x, f=vform: np.atleast_1d(f.derivative(x[0])),
        v_lipschitz=vform.lipschitz_on(R),
        target_radius=float(config["target_radius"]),
        overshoot_radius=float(config["overshoot_radius"]),
    )


def _task_shh(config, seed, workers, out):
    problem = _shh_problem(config)
    eta_max = float(config.get("eta_max", 1.0))
    mesh_eps = float(config.get("mesh_eps", 0.1))
    sweep = [float(e) for e in config.get("sweep", [])]
    eps = float(config["optimizer_eps"])
    rows = []

    def run_one(e):
        kappa = lambda x: stab.clf_feedback(problem, x, e)[0]
        return stab.find_sampling_time(
            problem, kappa, eta_max, e, mesh_eps=mesh_eps,
            resolution=float(config.get("resolution", eta_max / 512.0)),
        )

    for e in sweep:
        r = run_one(e)
        rows.append((e, r.eta if r.eta is not None else math.nan,
                     r.margin if r.margin is not None else math.nan))
    if rows:
        _write_csv(out / "sweep.csv", "optimizer_eps,eta,margin", rows)
    res = run_one(eps)
    numeric = {
        "optimizer_eps": eps,
        "eta": res.eta if res.eta is not None else -1.0,
        "margin": res.margin if res.margin is not None else -1.0,
    }
    payload = {"diagnosis": res.diagnosis} if res.diagnosis else {}
    if rows:
        payload["sweep_file"] = "sweep.csv"
    if res.ok:
        # demo closed loop from the outer annulus edge at the certified eta
        kappa = lambda x: stab.clf_feedback(problem, x, eps)[0]
        sh = traj.SampleHoldPolicy(kappa, res.eta)
        x0 = np.array([problem.overshoot_radius])
        horizon = math.ceil(4.0 * problem.overshoot_radius / res.eta) * res.eta
        loop = traj.sample_hold_trajectory(
            problem.dynamics, sh, x0, horizon, max(1e-9, eps * res.eta / 100.0)
        )
        (out / "closed_loop.csv").write_text(traj.solution_to_csv(loop))
        payload["closed_loop_file"] = "closed_loop.csv"
    return ("certified" if res.ok else "failure"), numeric, payload


def _task_certify(config, seed, workers, out):
    box = _interval(config["state_box"])
    R = box.side / 2.0
    f = build_scalar_form(config["dynamics"])
    V = build_scalar_form(config["V"])
    if V.derivative is None:
        raise ContractError("V needs an analytic derivative (polynomial/trig forms)")
    # along-system derivative: V'(x) f(x), composed analytically
    if f.spec["form"] == "polynomial" and V.spec["form"] == "polynomial":
        vdot_coeffs = poly_multiply(V.derivative.spec["coeffs"], f.spec["coeffs"])
        vdot = build_scalar_form({"form": "polynomial", "coeffs": vdot_coeffs})
    else:
        raise ArgumentError("certify currently composes polynomial dynamics and V")
    data = stab.LyapunovData(
        V=lambda xs, t, g=V: g(xs[:, 0]),
        Vdot=lambda xs, t, g=vdot: g(xs[:, 0]),
        w1=build_comparator(config["w1"], box, "w1"),
        w2=build_comparator(config["w2"], box, "w2"),
        w3=build_comparator(config["w3"], box, "w3"),
        xi=float(config.get("xi", 1.0)),
        v_modulus_x=Modulus.lipschitz(V.lipschitz_on(R)),
        v_modulus_t=Modulus.lipschitz(0.0),
        vdot_modulus_x=Modulus.lipschitz(vdot.lipschitz_on(R)),
    )
    mesh_eps = float(config.get("mesh_eps", 0.002))
    t_samples = [float(t) for t in config.get("t_samples", [0.0])]
    cert = stab.certify(data, box, mesh_eps, t_samples, rng=np.random.default_rng(seed))
    numeric = {
        "mesh_eps": mesh_eps,
        "sandwich_margin": cert.checks["sandwich"].margin,
        "decay_margin": cert.checks["decay"].margin,
        "growth_margin": cert.checks["linear_growth"].margin,
        "x0_level": cert.x0_set.level if cert.x0_set else -1.0,
    }
    payload = {}
    if cert.witness:
        payload["witness"] = {k: float(v) for k, v in cert.witness.items()}
    if cert.counterexample:
        ce = dict(cert.counterexample)
        if "point" in ce:
            ce["point"] = [float(v) for v in np.atleast_1d(ce["point"])]
        payload["counterexample"] = ce
    return cert.verdict, numeric, payload


def _task_audit(config, seed, workers, out):
    """Seeded property battery across every module; the determinism
    acceptance criterion compares this record's numeric fields."""
    rng = np.random.default_rng(seed)
    numeric = {}

    # core: interval soundness on random products
    worst_gap = -math.inf
    for _ in range(2000):
        a = CertifiedReal(float(rng.uniform(-3, 3)), 0.0)
        b = CertifiedReal(float(rng.uniform(-3, 3)), 0.0)
        c = (a * b + a) * b - a
        exact = (Fraction(a.value) * Fraction(b.value) + Fraction(a.value)) * Fraction(
            b.value
        ) - Fraction(a.value)
        gap = float(abs(exact - Fraction(c.value)) - Fraction(c.radius))
        worst_gap = max(worst_gap, gap)
    numeric["core_worst_soundness_gap"] = worst_gap

    # core: mesh covering
    mesh = build_mesh(Hypercube(np.zeros(2), 2.0), 0.25)
    numeric["mesh_cover_worst"] = mesh.covering_check(rng, 4000)

    # evt: sup-norm minimization
    pclass = evt.PolicyClass(Hypercube(np.array([0.5]), 1.0), 1, 1.0, 1.0)
    grid = np.linspace(0, 1, 201).reshape(-1, 1)
    J = evt.Functional(
        lambda p: CertifiedReal(float(np.abs(p(grid)).max()), 2.5e-3),
        Modulus.lipschitz(1.0),
        name="sup",
    )
    _, cert = evt.epsilon_minimize(J, pclass, 1.3)
    numeric["evt_value"] = cert.value
    numeric["evt_radius"] = cert.radius

    # danskin: tent derivative and spread
    obj = _DANSKIN_OBJECTIVES["bilinear"]()
    dom = dk.ThetaDomain(_interval([-1, 1]), budget=200_000)
    d = dk.directional_derivative(obj, dom, np.array([0.0]), np.array([1.0]), 0.3)
    ds = dk.delta_optimizers(obj, dom, np.array([0.0]), 0.3, 0.01)
    spread, slack = dk.member_spread(obj, ds, np.array([1.0]))
    numeric["danskin_derivative"] = d.value
    numeric["danskin_spread"] = spread
    numeric["danskin_slack"] = slack

    # selector: two-chunk extraction
    F = sel.RegularSVF(
        (sel.Block.interval(-1, 0), sel.Block.interval(0, 1)),
        (
            (sel.Chunk(lambda x: 0.0, lambda x: 0.25, Modulus.lipschitz(0.0), 0.0),),
            (sel.Chunk(lambda x: 0.75, lambda x: 1.0, Modulus.lipschitz(0.0), 0.0),),
        ),
    )
    s = sel.extract_selector(F, 0.125)
    pts = s.domain.sample_off_exception(rng, 400, Fraction(1, 100))
    numeric["selector_max_distance"] = max(
        F.located_distance_to(x, s(x)) for x in pts
    )
    numeric["selector_pieces"] = float(len(s.pieces))

    # eigen: residuals over random matrices (parallelizable mesh scan)
    def one_matrix(k):
        r = np.random.default_rng(seed + 1000 + k)
        n = int(r.integers(2, 7))
        A = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
        pairs, achieved = eig.approx_eigenpairs(A, 1e-8, seed=seed + k)
        worst = max((p.residual.value + p.residual.radius for p in pairs), default=0.0)
        return worst, achieved

    results = parallel_map(one_matrix, range(40), workers)
    numeric["eigen_worst_residual"] = max(w for w, _ in results)
    numeric["eigen_all_achieved"] = float(all(a for _, a in results))

    # trajectories: exponential decay
    rhs = traj.RegularRHS.single(lambda xs, ts: -xs, 1.0, Hypercube(np.array([0.0]), 4.0), 1.0, 2.0)
    solped = traj.picard_solve(rhs, np.array([1.0]), 1.0, 1e-5)
    numeric["ode_endpoint_error"] = abs(float(solped.endpoint[0]) - math.exp(-1.0))
    numeric["ode_error_bound"] = solped.error_bound.value

    # stability: certify the decay instance and search a sampling time
    cfg = {
        "dynamics": {"form": "polynomial", "coeffs": [0.0, -1.0]},
        "V": {"form": "polynomial", "coeffs": [0.0, 0.0, 1.0]},
        "w1": {"form": "radial_poly", "coeffs": [0.0, 0.5]},
        "w2": {"form": "radial_poly", "coeffs": [2.0]},
        "w3": {"form": "radial_poly", "coeffs": [0.0, 1.0]},
        "xi": 1.0,
        "state_box": [-1, 1],
        "mesh_eps": 0.002,
    }
    verdict, cnum, _ = _task_certify(cfg, seed, workers, out)
    numeric["certify_decay_margin"] = cnum["decay_margin"]
    numeric["certify_x0_level"] = cnum["x0_level"]
    shh_cfg = {
        "control_box": [-1, 1],
        "target_radius": 0.1,
        "overshoot_radius": 1.0,
        "state_box": [-2, 2],
        "optimizer_eps": 0.05,
        "eta_max": 1.0,
    }
    sv, snum, _ = _task_shh(shh_cfg, seed, workers, out)
    numeric["shh_eta"] = snum["eta"]

    ok = (
        verdict == "certified"
        and sv == "certified"
        and numeric["core_worst_soundness_gap"] <= 0.0
        and numeric["mesh_cover_worst"] <= 0.25
        and numeric["eigen_worst_residual"] <= 1e-8
        and numeric["eigen_all_achieved"] == 1.0
        and numeric["selector_max_distance"] <= 0.125
        and numeric["ode_endpoint_error"] <= 1e-5
        and numeric["danskin_spread"] <= 0.3 + numeric["danskin_slack"]
    )
    return ("certified" if ok else "counterexample"), numeric, {}


_HANDLERS = {
    "evt-min": _task_evt_min,
    "danskin": _task_danskin,
    "selector": _task_selector,
    "eig": _task_eig,
    "ode": _task_ode,
    "shh": _task_shh,
    "certify": _task_certify,
    "audit": _task_audit,
}


def _precision_audit(record: dict, config: dict, seed: int) -> dict:
    """Re-run numeric kernels at doubled precision and compare."""
    rng = np.random.default_rng(seed)
    out = {}
    # eigen residuals against mpmath
    worst_ratio = 0.0
    for k in range(10):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        pairs, _ = eig.approx_eigenpairs(A, 1e-8, seed=seed + k)
        for p in pairs:
            hi = eig.residual_recheck_mp(A, p)
            bound = p.residual.value + p.residual.radius
            worst_ratio = max(worst_ratio, hi / bound if bound > 0 else 0.0)
    out["eigen_mp_residual_ratio"] = worst_ratio
    out["eigen_mp_sound"] = float(worst_ratio <= 1.0)
    # core arithmetic against exact rationals
    worst = -math.inf
    for _ in range(500):
        a = CertifiedReal(float(rng.uniform(-2, 2)), 1e-6)
        b = CertifiedReal(float(rng.uniform(-2, 2)), 1e-6)
        c = a * b + a - b
        # exact center evaluation must land inside the certified interval
        exact = Fraction(a.value) * Fraction(b.value) + Fraction(a.value) - Fraction(b.value)
        worst = max(worst, float(abs(exact - Fraction(c.value)) - Fraction(c.radius)))
    out["core_exact_gap"] = worst
    out["core_exact_sound"] = float(worst <= 0.0)
    return out


def run(task: str, config: dict, seed: int, workers: int, out_dir, precision_audit=False):
    """Execute one subcommand; returns (exit_code, record)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    verdict, numeric, payload = _HANDLERS[task](config, seed, workers, out)
    record = {
        "tool": "certctrl",
        "version": __version__,
        "subcommand": task,
        "inputs_digest": _digest(config, seed),
        "seed": seed,
        "verdict": verdict,
        "numeric": numeric,
        "payload": payload,
        "wallclock_s": time.perf_counter() - t0,
    }
    if precision_audit:
        record["precision_audit"] = _precision_audit(record, config, seed)
    (out / "certificate.json").write_text(json.dumps(record, indent=2, sort_keys=True))
    return _VERDICT_EXIT.get(verdict, EXIT_COUNTEREXAMPLE), record


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="certctrl",
        description="certified approximate computation for control engineering",
    )
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", required=False, help="JSON problem definition")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="certctrl-out")
    parser.add_argument("--precision-audit", action="store_true")
    args = parser.parse_args(argv)

    if args.task == "audit":
        config = {}
        if args.config:
            try:
                config = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
    else:
        if not args.config:
            print("config error: --config is required", file=sys.stderr)
            return EXIT_CONFIG
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    try:
        code, record = run(
            args.task, config, args.seed, args.workers, args.out, args.precision_audit
        )
    except (ArgumentError, ContractError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceBudgetError as exc:
        print(f"resource budget: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{record['subcommand']}: {record['verdict']}")
    return code


if __name__ == "__main__":
    sys.exit(main())
