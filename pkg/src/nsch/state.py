"""Forward solver: projection-method flow coupled to a sixth-order
convective Cahn-Hilliard equation.

One time step advances (v, p, phi) with a first-order IMEX splitting:

1. momentum step with the beginning-of-step phase field: explicit
   conservative advection, semi-implicit viscosity (constant part nu_bar
   implicit through per-component Helmholtz solves, variable remainder
   div(2(nu(phi) - nu_bar) D v) explicit), explicit capillary force
   (face-averaged mu times face gradient of phi), body force u, then
   pressure projection;
2. phase step transported by the *new* velocity, so the conservative
   advection sees a discretely divergence-free field and the phase mean is
   preserved to roundoff.

The phase step treats the leading sixth-order operator implicitly together
with a biharmonic stabilization S*Lap^2 (added on both sides, an O(dt)
perturbation):

    (I + dt*m*(-Lap)^3 + dt*S*Lap^2) phi_new
        = phi_old + dt*m*Lap(N(phi_old)) + dt*S*Lap^2(phi_old)
          - dt*div(v_new phi_old),

where N(phi) = -Lap(f(phi)) + (f'(phi) + eta) omega(phi) is the chemical
potential minus its leading biharmonic part, so that mu = Lap^2 phi + N.
All implicit solves are diagonal in cosine/sine bases and therefore exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import mac
from .constitutive import (
    PhysParams,
    constraint_integrals,
    free_energy,
    mu_of_phi,
    potential_f,
)
from .errors import BlowUpError, ConfigError
from .grid import (
    FaceField,
    GridSpec,
    ScalarField,
    advect_scalar,
    divergence_of_faces,
    face_inner,
    gradient_to_faces,
    helmholtz_poly_solve,
    laplacian,
    project_divergence_free,
)

PHI_BLOWUP_LIMIT = 1e6

DIAGNOSTIC_COLUMNS = (
    "step",
    "time",
    "mass",
    "energy",
    "willmore",
    "gl",
    "kinetic",
    "dissipation_v",
    "dissipation_mu",
    "divergence_max",
)


@dataclass(frozen=True)
class TimeSpec:
    """Uniform time grid on [0, T] with n_steps = T/dt steps."""

    T: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("time step must be positive")
        n = round(self.T / self.dt)
        if n < 1 or abs(n * self.dt - self.T) > 1e-12 * max(1.0, abs(self.T)):
            raise ConfigError(
                f"final time {self.T} is not an integer multiple of dt={self.dt}"
            )

    @property
    def n_steps(self) -> int:
        return round(self.T / self.dt)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def refine(self, factor: int = 2) -> "TimeSpec":
        return TimeSpec(self.T, self.dt / factor)


@dataclass
class State:
    """Flow/phase tuple at one time node; (mu, omega) are consistent with phi."""

    v: FaceField
    p: ScalarField
    phi: ScalarField
    mu: ScalarField
    omega: ScalarField
    time: float


@dataclass
class Trajectory:
    """Forward states at t_0..t_N plus per-node diagnostics."""

    grid: GridSpec
    time: TimeSpec
    params: PhysParams
    states: list[State]
    diagnostics: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final(self) -> State:
        return self.states[-1]

    def phi_series(self) -> list[ScalarField]:
        return [s.phi for s in self.states]


def _check_finite_step(step: int, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.isfinite(arr).all() or np.abs(arr).max() > PHI_BLOWUP_LIMIT:
            raise BlowUpError(f"blow-up detected at step {step}", step=step)


def ch_step(
    phi_n: ScalarField, v: FaceField, dt: float, params: PhysParams
) -> ScalarField:
    """One semi-implicit phase step transported by the face field ``v``.

    ``v`` must be discretely divergence-free (conservation of the phase
    mean relies on it).  Nonconstant mobility is handled by an explicit
    extra flux of the variable part against the mobility floor.
    """
    grid = phi_n.grid
    mu, _ = mu_of_phi(phi_n, params)
    m0 = params.mob_const
    s = params.stab

    lap_phi = laplacian(phi_n)
    lap2_phi = laplacian(lap_phi)
    # N(phi) = mu - Lap^2 phi, the non-leading part of the chemical potential
    n_part = ScalarField(grid, mu.values - lap2_phi.values)

    rhs = (
        phi_n.values
        + dt * m0 * laplacian(n_part).values
        + dt * s * lap2_phi.values
        - dt * advect_scalar(v, phi_n).values
    )
    if not params.constant_mobility:
        mval, _ = params.mobility(phi_n.values)
        extra = mac.gradient_force(mval - m0, mu)
        rhs += dt * divergence_of_faces(extra).values
    return helmholtz_poly_solve(1.0, 0.0, dt * s, dt * m0, ScalarField(grid, rhs))


def ns_step(
    v_n: FaceField,
    phi_n: ScalarField,
    mu_n: ScalarField,
    u_n: FaceField | None,
    dt: float,
    params: PhysParams,
) -> tuple[FaceField, ScalarField]:
    """One momentum step; returns the projected velocity and its pressure."""
    nu, _ = params.viscosity(phi_n.values)

    adv = mac.momentum_advection(v_n, v_n)
    visc = mac.viscous_stress_divergence(nu - params.nu_bar, v_n)
    force = mac.gradient_force(mu_n.values, phi_n)

    rhs = FaceField(
        v_n.grid,
        v_n.x + dt * (-adv.x + visc.x + force.x),
        v_n.y + dt * (-adv.y + visc.y + force.y),
    )
    if u_n is not None:
        rhs.x += dt * u_n.x
        rhs.y += dt * u_n.y
    v_star = mac.solve_face_helmholtz(rhs, dt * params.nu_bar)
    return project_divergence_free(v_star, dt)


def _node_state(v, p, phi, t, params) -> State:
    mu, omega = mu_of_phi(phi, params)
    return State(v=v, p=p, phi=phi, mu=mu, omega=omega, time=t)


def _node_diagnostics(state: State, params: PhysParams) -> tuple[float, ...]:
    phi, v = state.phi, state.v
    vol = phi.grid.cell_volume
    mass, _ = constraint_integrals(phi)
    energy, willmore, gl = free_energy(phi, params)
    kinetic = 0.5 * face_inner(v, v)
    nu, _ = params.viscosity(phi.values)
    diss_v = (2.0 * nu * mac.strain_contraction(v, v)).sum() * vol
    mval, _ = params.mobility(phi.values)
    gmu = gradient_to_faces(state.mu)
    gmu_sq = mac.face_dot_to_cells(gmu, gmu)
    diss_mu = (mval * gmu_sq.values).sum() * vol
    div_max = divergence_of_faces(v).max_abs()
    return mass, energy, willmore, gl, kinetic, diss_v, diss_mu, div_max


def simulate(
    v0: FaceField,
    phi0: ScalarField,
    u: Sequence[FaceField] | None,
    time: TimeSpec,
    params: PhysParams,
) -> Trajectory:
    """Run the forward solver and record states and diagnostics at every node.

    ``u`` is the body-force series, one face field per step (or None for an
    unforced run).  The initial velocity is projected once so the stored
    v(0) is discretely divergence-free.
    """
    grid = phi0.grid
    n_steps = time.n_steps
    if u is not None and len(u) != n_steps:
        raise ConfigError(f"control series has {len(u)} entries, need {n_steps}")

    v0p, _ = project_divergence_free(v0.zero_boundary_normal(), 1.0)
    states = [_node_state(v0p, ScalarField.zeros(grid), phi0.copy(), 0.0, params)]
    diag_rows = [(0, 0.0) + _node_diagnostics(states[0], params)]

    v, phi = v0p, phi0
    for n in range(n_steps):
        u_n = u[n] if u is not None else None
        v, p = ns_step(v, phi, states[-1].mu, u_n, time.dt, params)
        phi = ch_step(phi, v, time.dt, params)
        _check_finite_step(n + 1, phi.values, v.x, v.y)
        t = (n + 1) * time.dt
        states.append(_node_state(v, p, phi, t, params))
        diag_rows.append((n + 1, t) + _node_diagnostics(states[-1], params))

    diagnostics = {
        name: np.array([row[i] for row in diag_rows])
        for i, name in enumerate(DIAGNOSTIC_COLUMNS)
    }
    return Trajectory(grid=grid, time=time, params=params, states=states, diagnostics=diagnostics)


def energy_balance_residual(traj: Trajectory, u: Sequence[FaceField] | None = None) -> float:
    """Defect of the integrated energy identity at the final time.

    Continuous law: kinetic + free energy at time t plus the accumulated
    viscous and chemical dissipation equals the initial energy plus the
    work of the body force.  Dissipation and work are accumulated with the
    trapezoid rule from nodal rates, so the defect is O(dt) for smooth runs.
    """
    d = traj.diagnostics
    dt = traj.time.dt
    total = d["kinetic"] + d["energy"]
    rate = d["dissipation_v"] + d["dissipation_mu"]
    diss = np.concatenate([[0.0], np.cumsum(0.5 * dt * (rate[1:] + rate[:-1]))])
    work = 0.0
    if u is not None:
        for n, u_n in enumerate(u):
            w0 = face_inner(u_n, traj.states[n].v)
            w1 = face_inner(u_n, traj.states[n + 1].v)
            work += 0.5 * dt * (w0 + w1)
    return float(total[-1] + diss[-1] - total[0] - work)
