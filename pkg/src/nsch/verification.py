"""Verification harness: the model identities checked end to end.

Five checks, each with a quantitative threshold:

* ``mass``      -- the phase mean is constant along any run (scheme-exact);
* ``energy``    -- with zero force the discrete total energy decays
                   monotonically at small dt, and the integrated
                   energy-balance defect is first order in dt;
* ``frechet``   -- forward differencing of the state map against the
                   sensitivity solver: e(eps) = ||S(u+eps h)-S(u)-eps psi||/eps
                   shrinks linearly in eps down to the discretization floor;
* ``duality``   -- the adjoint/sensitivity pairing
                   int_Q h . va = alpha1 int_Q (phi-phi_Q) psi
                                + alpha2 int_Omega (phi(T)-phi_Omega) psi(T);
* ``gradient``  -- the reduced gradient against central finite differences
                   of the reduced cost along seeded random directions.

Random directions are smooth, low-mode cosine series with coefficients
drawn from a seeded generator and shaped to vanish on boundary normal
faces; because the continuum field is fixed by the seed, the same
direction can be re-sampled on a refined grid for convergence studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import solve_adjoint
from .control import ControlField, ControlProblem, evaluate_cost, reduced_gradient
from .grid import FaceField, GridSpec, ScalarField, face_inner, scalar_inner
from .linearized import solve_linearized
from .state import TimeSpec, Trajectory, energy_balance_residual, simulate

FRECHET_EPSILONS = (1e-1, 5e-2, 2.5e-2)
FRECHET_FLOOR_EPSILON = 1e-3


@dataclass
class VerifyReport:
    """Outcome of one identity check."""

    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    lines: list[str] = field(default_factory=list)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        head = f"[{status}] {self.name}"
        return "\n".join([head] + [f"    {ln}" for ln in self.lines])


# ---------------------------------------------------------------------------
# seeded smooth fields


def _cosine_series(rng: np.ndarray, x, y, lx, ly, n_modes: int):
    total = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))
    for j in range(n_modes):
        for k in range(n_modes):
            c = rng[j, k]
            total = total + c * np.cos(np.pi * j * x / lx) * np.cos(np.pi * k * y / ly)
    return total


def random_smooth_facefield(
    grid: GridSpec, seed: int, amplitude: float = 1.0, n_modes: int = 3
) -> FaceField:
    """Smooth seeded face field with vanishing boundary normal components.

    The underlying continuum field depends only on the seed, so sampling it
    on a refined grid gives the same function.
    """
    rng = np.random.default_rng(seed)
    cx = rng.standard_normal((n_modes, n_modes))
    cy = rng.standard_normal((n_modes, n_modes))

    xf_x = np.arange(grid.nx + 1) * grid.hx
    xf_y = (np.arange(grid.ny) + 0.5) * grid.hy
    fx = _cosine_series(cx, xf_x[:, None], xf_y[None, :], grid.lx, grid.ly, n_modes)
    fx *= np.sin(np.pi * xf_x / grid.lx)[:, None]

    yf_x = (np.arange(grid.nx) + 0.5) * grid.hx
    yf_y = np.arange(grid.ny + 1) * grid.hy
    fy = _cosine_series(cy, yf_x[:, None], yf_y[None, :], grid.lx, grid.ly, n_modes)
    fy *= np.sin(np.pi * yf_y / grid.ly)[None, :]

    scale = max(np.abs(fx).max(), np.abs(fy).max(), 1e-30)
    return FaceField(grid, amplitude * fx / scale, amplitude * fy / scale)


def smooth_control_series(
    grid: GridSpec, time: TimeSpec, seed: int, amplitude: float = 1.0
) -> ControlField:
    """Seeded smooth space profile modulated smoothly in time, one per step."""
    profile = random_smooth_facefield(grid, seed, amplitude)
    t_mid = (np.arange(time.n_steps) + 0.5) * time.dt
    mod = 1.0 + 0.5 * np.sin(2.0 * np.pi * t_mid / max(time.T, 1e-30))
    return ControlField(grid, [float(m) * profile for m in mod])


# ---------------------------------------------------------------------------
# space-time norms


def phi_l2q_norm(fields: list[ScalarField], dt: float) -> float:
    """Trapezoid-in-time L2(Q) norm of a node series of cell fields."""
    n = len(fields) - 1
    total = 0.0
    for k, f in enumerate(fields):
        w = 0.5 if k in (0, n) else 1.0
        total += w * dt * scalar_inner(f, f)
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# the identity checks


def verify_mass(problem: ControlProblem, u: ControlField | None = None) -> VerifyReport:
    traj = problem.simulate(u)
    means = np.array([s.phi.mean() for s in traj.states])
    dev = float(np.abs(means - means[0]).max())
    passed = dev <= 1e-12
    return VerifyReport(
        "mass conservation", passed, {"max_deviation": dev},
        [f"max |mean(phi(t)) - mean(phi_0)| = {dev:.3e} (threshold 1e-12)"],
    )


def verify_energy(problem: ControlProblem) -> VerifyReport:
    """Unforced decay of kinetic + free energy, and O(dt) balance defect."""
    def run(ts: TimeSpec) -> tuple[Trajectory, float, float]:
        traj = simulate(problem.v0, problem.phi0, None, ts, problem.params)
        total = traj.diagnostics["kinetic"] + traj.diagnostics["energy"]
        max_increase = float(np.diff(total).max(initial=-np.inf))
        return traj, max_increase, energy_balance_residual(traj)

    traj1, inc1, res1 = run(problem.time)
    _, inc2, res2 = run(problem.time.refine())
    scale = abs(traj1.diagnostics["energy"][0]) + abs(traj1.diagnostics["kinetic"][0])
    mono_tol = 1e-11 * max(scale, 1.0)
    ratio = abs(res1) / max(abs(res2), 1e-300)
    passed = inc1 <= mono_tol and inc2 <= mono_tol and 1.7 <= ratio <= 2.3
    return VerifyReport(
        "energy law", passed,
        {"max_increase": inc1, "residual": res1, "residual_half_dt": res2, "ratio": ratio},
        [
            f"max energy increase per step = {inc1:.3e} (tolerance {mono_tol:.1e})",
            f"balance residual: {res1:.6e} (dt) vs {res2:.6e} (dt/2), ratio {ratio:.3f} in [1.7, 2.3]",
        ],
    )


def verify_frechet(
    problem: ControlProblem, seed: int = 0, amplitude: float = 1.0
) -> VerifyReport:
    """Linear shrink of the first-order Taylor defect of the state map."""
    grid, time, params = problem.grid, problem.time, problem.params
    u0 = ControlField.zeros(grid, time.n_steps)
    base = problem.simulate(u0)
    h = smooth_control_series(grid, time, seed, amplitude)
    lin = solve_linearized(base, h.fields, params)

    def defect(eps: float) -> float:
        pert = problem.simulate(u0.axpy(eps, h))
        diffs = [
            ScalarField(grid, p.phi.values - b.phi.values - eps * l.psi.values)
            for p, b, l in zip(pert.states, base.states, lin)
        ]
        return phi_l2q_norm(diffs, time.dt) / eps

    eps_list = list(FRECHET_EPSILONS)
    errors = [defect(e) for e in eps_list]
    floor = defect(FRECHET_FLOOR_EPSILON)
    ratios = [errors[i] / max(errors[i + 1], 1e-300) for i in range(len(errors) - 1)]
    ok = all(
        r >= 1.8 or errors[i + 1] <= 5.0 * floor for i, r in enumerate(ratios)
    )
    return VerifyReport(
        "frechet differentiability", ok,
        {"epsilons": eps_list, "errors": errors, "ratios": ratios, "floor": floor},
        [
            "e(eps) = " + ", ".join(f"{e:.4e}" for e in errors),
            "ratios per halving = " + ", ".join(f"{r:.3f}" for r in ratios)
            + f" (need >= 1.8 until within 5x floor {floor:.3e})",
        ],
    )


def duality_gap(
    problem: ControlProblem, seed: int = 0, amplitude: float = 1.0
) -> dict:
    """Both sides of the adjoint/sensitivity pairing for a seeded direction."""
    grid, time, params, cost = problem.grid, problem.time, problem.params, problem.cost
    base = problem.simulate(None)
    adj = solve_adjoint(base, cost, params)
    h = smooth_control_series(grid, time, seed, amplitude)
    lin = solve_linearized(base, h.fields, params)
    dt = time.dt

    lhs = sum(
        dt * face_inner(h.fields[n], adj[n].va) for n in range(time.n_steps)
    )
    # trapezoid in time, matching the cost quadrature (psi(0) = 0)
    rhs = cost.alpha2 * scalar_inner(
        base.final.phi - cost.phi_omega, lin[-1].psi
    )
    for k in range(1, time.n_steps + 1):
        w = 0.5 if k == time.n_steps else 1.0
        diff = base.states[k].phi - cost.phi_q_at(k)
        rhs += cost.alpha1 * w * dt * scalar_inner(diff, lin[k].psi)
    mism = abs(lhs - rhs) / max(abs(lhs) + abs(rhs), 1e-300)
    return {"lhs": lhs, "rhs": rhs, "mismatch": mism}


def verify_duality(
    problem: ControlProblem,
    refined_problem: ControlProblem | None = None,
    seed: int = 0,
) -> VerifyReport:
    gap = duality_gap(problem, seed)
    values = dict(gap)
    lines = [
        f"lhs = {gap['lhs']:.8e}, rhs = {gap['rhs']:.8e}",
        f"relative mismatch = {gap['mismatch']:.3e} (threshold 1e-2)",
    ]
    passed = gap["mismatch"] <= 1e-2
    if refined_problem is not None:
        fine = duality_gap(refined_problem, seed)
        values["mismatch_refined"] = fine["mismatch"]
        lines.append(
            f"refined mismatch = {fine['mismatch']:.3e} (must shrink strictly)"
        )
        passed = passed and fine["mismatch"] < gap["mismatch"]
    return VerifyReport("adjoint duality", passed, values, lines)


def verify_gradient(
    problem: ControlProblem,
    seed: int = 0,
    n_directions: int = 3,
    eps: float = 1e-2,
    amplitude: float = 1.0,
) -> VerifyReport:
    """Adjoint gradient against central finite differences of the reduced cost."""
    grid, time, params, cost = problem.grid, problem.time, problem.params, problem.cost
    u0 = ControlField.zeros(grid, time.n_steps)
    base = problem.simulate(u0)
    adj = solve_adjoint(base, cost, params)
    g = reduced_gradient(u0, adj, cost)
    dt = time.dt

    adj_dirs, fd_dirs, rel_errors = [], [], []
    for i in range(n_directions):
        h = smooth_control_series(grid, time, seed + 1000 * i + 7, amplitude)
        jp, _ = evaluate_cost(problem.simulate(u0.axpy(eps, h)), u0.axpy(eps, h), cost)
        jm, _ = evaluate_cost(problem.simulate(u0.axpy(-eps, h)), u0.axpy(-eps, h), cost)
        fd = (jp - jm) / (2.0 * eps)
        ad = g.inner_q(h, dt)
        adj_dirs.append(ad)
        fd_dirs.append(fd)
        rel_errors.append(abs(ad - fd) / max(abs(fd), 1e-300))

    a = np.array(adj_dirs)
    f = np.array(fd_dirs)
    cosine = float(a @ f / max(np.linalg.norm(a) * np.linalg.norm(f), 1e-300))
    max_rel = float(max(rel_errors))
    passed = cosine >= 0.999 and max_rel <= 2e-2
    return VerifyReport(
        "reduced gradient", passed,
        {"cosine": cosine, "rel_errors": rel_errors, "adjoint": adj_dirs, "fd": fd_dirs},
        [
            f"cosine similarity over {n_directions} directions = {cosine:.6f} (need >= 0.999)",
            "per-direction relative magnitude errors = "
            + ", ".join(f"{e:.3e}" for e in rel_errors)
            + " (need <= 2e-2)",
        ],
    )


def verify(
    problem: ControlProblem,
    which: str,
    seed: int = 0,
    refined_problem: ControlProblem | None = None,
) -> VerifyReport:
    """Run one named identity check and report pass/fail with its numbers."""
    if which == "mass":
        return verify_mass(problem)
    if which == "energy":
        return verify_energy(problem)
    if which == "frechet":
        return verify_frechet(problem, seed)
    if which == "duality":
        return verify_duality(problem, refined_problem, seed)
    if which == "gradient":
        return verify_gradient(problem, seed)
    raise ValueError(f"unknown check '{which}'")
