"""Cost evaluation, reduced gradient, box projection and projected-gradient
descent for the tracking control problem.

The cost is

    J(u) = alpha1/2 int_Q |phi - phi_Q|^2 + alpha2/2 int_Omega |phi(T) - phi_Omega|^2
         + alpha3/2 int_Q |u|^2,

with trapezoid-in-time, cell-sum-in-space quadrature for the tracking term
and the exact integral of the piecewise-constant control for the control
term.  The reduced gradient is the face field alpha3*u_n + va(t_n): the
backward state at t_n already accounts for the transposed dynamics of the
step (t_n, t_{n+1}) on which u_n acts, so the left-endpoint value is the
consistent representative of int h . va over the step (checked against
per-face derivatives of the discrete cost in the test suite).

The admissible set is a componentwise box; its L2 projection is the
pointwise clamp (boundary normal faces are not control degrees of freedom
and stay pinned at zero).  First-order stationarity is monitored through
the fixed-point residual ||u - P(u - step*g)||_{L2(Q)}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adjoint import AdjointState, require_unit_mobility, solve_adjoint
from .constitutive import CostSpec, PhysParams
from .errors import ConfigError, LineSearchError
from .grid import FaceField, GridSpec, ScalarField, face_inner, scalar_inner
from .state import TimeSpec, Trajectory, simulate


@dataclass
class ControlBounds:
    """Componentwise box bounds for the control.

    Each bound is a scalar (same everywhere), a pair of scalars (one per
    component), a :class:`FaceField` (space-varying), or a sequence of
    FaceFields (one per step, space-time-varying).
    """

    u_min: object = -1.0
    u_max: object = 1.0

    def component(self, bound, comp: str, n: int):
        """Bound values for component 'x'/'y' at step n (scalar or array)."""
        if isinstance(bound, (int, float)):
            return float(bound)
        if isinstance(bound, tuple):
            return float(bound[0] if comp == "x" else bound[1])
        if isinstance(bound, FaceField):
            return bound.x if comp == "x" else bound.y
        # sequence of FaceField, one per step
        f = bound[n]
        return f.x if comp == "x" else f.y

    def limits(self, comp: str, n: int):
        return self.component(self.u_min, comp, n), self.component(self.u_max, comp, n)

    def validate(self) -> None:
        for comp in ("x", "y"):
            lo, hi = self.limits(comp, 0)
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ConfigError("admissible set is empty: u_min exceeds u_max")

    @property
    def radius(self) -> float:
        """Radius of the control ball: largest bound magnitude plus one."""
        sup = 0.0
        for bound in (self.u_min, self.u_max):
            if isinstance(bound, (int, float)):
                sup = max(sup, abs(float(bound)))
            elif isinstance(bound, tuple):
                sup = max(sup, abs(bound[0]), abs(bound[1]))
            elif isinstance(bound, FaceField):
                sup = max(sup, bound.max_abs())
            else:
                sup = max(sup, max(f.max_abs() for f in bound))
        return sup + 1.0


@dataclass
class ControlField:
    """Time series of face forces, one per step, with a bounds reference."""

    grid: GridSpec
    fields: list[FaceField]
    bounds: ControlBounds | None = None

    @classmethod
    def zeros(cls, grid: GridSpec, n_steps: int, bounds: ControlBounds | None = None):
        return cls(grid, [FaceField.zeros(grid) for _ in range(n_steps)], bounds)

    @property
    def n_steps(self) -> int:
        return len(self.fields)

    def copy(self) -> "ControlField":
        return ControlField(self.grid, [f.copy() for f in self.fields], self.bounds)

    def axpy(self, a: float, other: "ControlField") -> "ControlField":
        """Return self + a * other."""
        return ControlField(
            self.grid,
            [f + a * g for f, g in zip(self.fields, other.fields)],
            self.bounds,
        )

    def inner_q(self, other: "ControlField", dt: float) -> float:
        return dt * sum(face_inner(f, g) for f, g in zip(self.fields, other.fields))

    def norm_q(self, dt: float) -> float:
        return float(np.sqrt(self.inner_q(self, dt)))

    def max_abs(self) -> float:
        if not self.fields:
            return 0.0
        return max(f.max_abs() for f in self.fields)


@dataclass
class OptimizerOptions:
    """Knobs of the projected-gradient loop.

    ``tol`` is relative: the loop stops when the unit-step fixed-point
    residual drops below tol * ||g_0||_{L2(Q)}.
    """

    tol: float = 1e-3
    max_iter: int = 50
    armijo_c1: float = 1e-4
    backtrack_max: int = 30
    step0: float | None = None  # default 1/alpha3 if alpha3 > 0 else 1
    grow_step: bool = True


@dataclass
class OptimReport:
    """Per-trial optimizer history plus the termination reason."""

    rows: list[tuple] = field(default_factory=list)
    reason: str = ""
    n_simulations: int = 0
    initial_grad_norm: float = 0.0
    max_bound_violation: float = 0.0

    COLUMNS = (
        "iter", "J", "J_track", "J_terminal", "J_control",
        "grad_norm", "stationarity", "step", "accepted",
    )

    def add(self, **kw) -> None:
        self.rows.append(tuple(kw[c] for c in self.COLUMNS))

    def accepted_J(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows if r[8]])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")


@dataclass
class ControlProblem:
    """Everything a control run needs: dynamics, cost, and admissible set."""

    v0: FaceField
    phi0: ScalarField
    time: TimeSpec
    params: PhysParams
    cost: CostSpec
    bounds: ControlBounds

    @property
    def grid(self) -> GridSpec:
        return self.phi0.grid

    def simulate(self, u: ControlField | None) -> Trajectory:
        fields = u.fields if u is not None else None
        return simulate(self.v0, self.phi0, fields, self.time, self.params)


def evaluate_cost(
    traj: Trajectory, u: ControlField | None, cost: CostSpec
) -> tuple[float, dict]:
    """Evaluate J and its three components on a trajectory/control pair."""
    n = traj.time.n_steps
    if u is not None and u.n_steps != n:
        raise ConfigError(f"control series has {u.n_steps} entries, need {n}")
    if len(cost.phi_q) != n + 1:
        raise ConfigError(f"running target has {len(cost.phi_q)} nodes, need {n + 1}")
    dt = traj.time.dt

    j_track = 0.0
    if cost.alpha1 > 0:
        for k, state in enumerate(traj.states):
            w = 0.5 if k in (0, n) else 1.0
            diff = state.phi - cost.phi_q_at(k)
            j_track += 0.5 * cost.alpha1 * w * dt * scalar_inner(diff, diff)

    diff_t = traj.final.phi - cost.phi_omega
    j_term = 0.5 * cost.alpha2 * scalar_inner(diff_t, diff_t)

    j_ctrl = 0.0
    if u is not None and cost.alpha3 > 0:
        for f in u.fields:
            j_ctrl += 0.5 * cost.alpha3 * dt * face_inner(f, f)

    total = j_track + j_term + j_ctrl
    return total, {"track": j_track, "terminal": j_term, "control": j_ctrl}


def reduced_gradient(
    u: ControlField, adj: Sequence[AdjointState], cost: CostSpec
) -> ControlField:
    """Gradient field alpha3*u_n + va(t_n) of the reduced cost."""
    if len(adj) != u.n_steps + 1:
        raise ConfigError(
            f"adjoint trajectory has {len(adj)} nodes, control has {u.n_steps} steps"
        )
    fields = [
        cost.alpha3 * u.fields[n] + adj[n].va for n in range(u.n_steps)
    ]
    return ControlField(u.grid, fields, u.bounds)


def project_admissible(u: ControlField, bounds: ControlBounds) -> ControlField:
    """Componentwise clamp onto the box (the L2-orthogonal projection).

    Boundary normal faces are not control degrees of freedom and are kept
    at zero after clamping.
    """
    out_fields = []
    for n, f in enumerate(u.fields):
        lo_x, hi_x = bounds.limits("x", n)
        lo_y, hi_y = bounds.limits("y", n)
        g = FaceField(u.grid, np.clip(f.x, lo_x, hi_x), np.clip(f.y, lo_y, hi_y))
        out_fields.append(g.zero_boundary_normal())
    return ControlField(u.grid, out_fields, bounds)


def stationarity_residual(
    u: ControlField, g: ControlField, bounds: ControlBounds, step: float, dt: float
) -> float:
    """Fixed-point residual ||u - P(u - step*g)||_{L2(Q)}."""
    if step <= 0:
        raise ConfigError("stationarity step must be positive")
    trial = project_admissible(u.axpy(-step, g), bounds)
    return u.axpy(-1.0, trial).norm_q(dt)


def bound_violation(u: ControlField, bounds: ControlBounds) -> float:
    """Largest componentwise excursion of u outside the admissible box."""
    worst = 0.0
    for n, f in enumerate(u.fields):
        for comp, arr in (("x", f.x), ("y", f.y)):
            lo, hi = bounds.limits(comp, n)
            worst = max(
                worst,
                float(np.maximum(arr - hi, 0.0).max()),
                float(np.maximum(np.asarray(lo) - arr, 0.0).max()),
            )
    return worst


def optimize(
    problem: ControlProblem,
    u0: ControlField | None = None,
    options: OptimizerOptions | None = None,
) -> tuple[ControlField, OptimReport]:
    """Projected gradient descent with Armijo backtracking.

    Accepts a trial step s when J(P(u - s g)) <= J(u) - c1 s ||g||^2;
    stops when the unit-step fixed-point residual falls below
    tol * ||g_0||, after max_iter accepted iterations, or with a
    line-search diagnosis after backtrack_max halvings.
    """
    opts = options or OptimizerOptions()
    cost, bounds, dt = problem.cost, problem.bounds, problem.time.dt
    require_unit_mobility(problem.params, "the optimizer")
    bounds.validate()

    if u0 is None:
        u0 = ControlField.zeros(problem.grid, problem.time.n_steps, bounds)
    u = project_admissible(u0, bounds)

    report = OptimReport()
    report.max_bound_violation = bound_violation(u, bounds)
    traj = problem.simulate(u)
    report.n_simulations += 1
    j, comps = evaluate_cost(traj, u, cost)

    step0 = opts.step0
    if step0 is None:
        step0 = 1.0 / cost.alpha3 if cost.alpha3 > 0 else 1.0
    s = step0

    adj = solve_adjoint(traj, cost, problem.params)
    g = reduced_gradient(u, adj, cost)
    g_norm = g.norm_q(dt)
    report.initial_grad_norm = g_norm
    tol_abs = opts.tol * g_norm

    last_step = 0.0
    for it in range(opts.max_iter + 1):
        residual = stationarity_residual(u, g, bounds, 1.0, dt)
        report.add(
            iter=it, J=j, J_track=comps["track"], J_terminal=comps["terminal"],
            J_control=comps["control"], grad_norm=g_norm, stationarity=residual,
            step=last_step, accepted=1,
        )
        if residual <= tol_abs:
            report.reason = "converged"
            return u, report
        if it == opts.max_iter:
            report.reason = "max_iter"
            return u, report

        g_norm_sq = g_norm * g_norm
        accepted = False
        s_try = s
        for _ in range(opts.backtrack_max + 1):
            u_trial = project_admissible(u.axpy(-s_try, g), bounds)
            traj_trial = problem.simulate(u_trial)
            report.n_simulations += 1
            j_trial, comps_trial = evaluate_cost(traj_trial, u_trial, cost)
            if j_trial <= j - opts.armijo_c1 * s_try * g_norm_sq:
                accepted = True
                break
            report.add(
                iter=it + 1, J=j_trial, J_track=comps_trial["track"],
                J_terminal=comps_trial["terminal"], J_control=comps_trial["control"],
                grad_norm=g_norm, stationarity=residual, step=s_try, accepted=0,
            )
            s_try *= 0.5
        if not accepted:
            report.reason = (
                f"line search failed after {opts.backtrack_max} halvings at iterate "
                f"{it}: J={j:.6e}, |g|={g_norm:.3e}, last step={s_try * 2:.3e}"
            )
            return u, report

        u, traj, j, comps = u_trial, traj_trial, j_trial, comps_trial
        report.max_bound_violation = max(
            report.max_bound_violation, bound_violation(u, bounds)
        )
        adj = solve_adjoint(traj, cost, problem.params)
        g = reduced_gradient(u, adj, cost)
        g_norm = g.norm_q(dt)
        last_step = s_try
        s = min(2.0 * s_try, step0) if opts.grow_step else step0

    raise LineSearchError("unreachable")  # pragma: no cover
