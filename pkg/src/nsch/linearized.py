"""Sensitivity solver: the linearization of the forward system around a
stored trajectory.

For a base trajectory (v, p, phi, mu, omega) and a force perturbation h,
the sensitivity (w, q, psi, theta, w_aux) solves the linear system obtained
by differentiating the state system: w is transported by and against the
base flow, sees the variable-viscosity couplings through nu and nu', and is
forced by theta*grad(phi) + mu*grad(psi) + h; psi is transported by the
base flow and by w against the base phase field, with the linearized
chemical chain

    w_aux = -Lap(psi) + f'(phi) psi,
    theta = -Lap(w_aux) + f''(phi) psi omega + (f'(phi) + eta) w_aux.

The discrete stepper below is the exact Jacobian of the forward stepper:
every explicit term is the directional derivative of its forward
counterpart with coefficients frozen at the beginning-of-step base state,
the implicit symbols are identical, and the phase transport uses the
end-of-step velocities exactly as the forward splitting does.  This makes
superposition exact to roundoff and pushes the defect of the sensitivity
against forward differencing down to the quadratic remainder.

Zero initial data and a divergence-free w imply that the mean of psi stays
exactly zero along the evolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import mac
from .constitutive import PhysParams, linearized_chemical_potentials
from .errors import BlowUpError, ConfigError
from .grid import (
    FaceField,
    ScalarField,
    advect_scalar,
    divergence_of_faces,
    helmholtz_poly_solve,
    laplacian,
    project_divergence_free,
)
from .state import PHI_BLOWUP_LIMIT, State, Trajectory


@dataclass
class LinearizedState:
    """Sensitivity tuple at one time node."""

    w: FaceField
    q: ScalarField
    psi: ScalarField
    theta: ScalarField
    w_aux: ScalarField
    time: float


def _lin_node(w, q, psi, base: State, params, t) -> LinearizedState:
    theta, w_aux = linearized_chemical_potentials(psi, base.phi, base.omega, params)
    return LinearizedState(w=w, q=q, psi=psi, theta=theta, w_aux=w_aux, time=t)


def linearized_step(
    base_n: State,
    base_np1: State,
    lin_n: LinearizedState,
    h_n: FaceField | None,
    dt: float,
    params: PhysParams,
) -> LinearizedState:
    """Advance the sensitivity one step along the stored base trajectory."""
    grid = base_n.phi.grid
    w_n, psi_n = lin_n.w, lin_n.psi
    phi_n, v_n, mu_n, omega_n = base_n.phi, base_n.v, base_n.mu, base_n.omega

    nu, nu_p = params.viscosity(phi_n.values)
    theta_n, _ = linearized_chemical_potentials(psi_n, phi_n, omega_n, params)

    adv = mac.momentum_advection(w_n, v_n) + mac.momentum_advection(v_n, w_n)
    visc = mac.viscous_stress_divergence(
        nu - params.nu_bar, w_n
    ) + mac.viscous_stress_divergence(nu_p * psi_n.values, v_n)
    force = mac.gradient_force(theta_n.values, phi_n) + mac.gradient_force(
        mu_n.values, psi_n
    )

    rhs = w_n + dt * (-adv + visc + force)
    if h_n is not None:
        rhs = rhs + dt * h_n
    w_star = mac.solve_face_helmholtz(rhs, dt * params.nu_bar)
    w_np1, q_np1 = project_divergence_free(w_star, dt)

    # phase part: transported by the end-of-step velocities, like the forward
    m0 = params.mob_const
    s = params.stab
    lap2_psi = laplacian(laplacian(psi_n))
    # directional derivative of N(phi): theta minus its leading biharmonic part
    h_field = ScalarField(grid, theta_n.values - lap2_psi.values)
    rhs_psi = (
        psi_n.values
        + dt * m0 * laplacian(h_field).values
        + dt * s * lap2_psi.values
        - dt * advect_scalar(w_np1, phi_n).values
        - dt * advect_scalar(base_np1.v, psi_n).values
    )
    if not params.constant_mobility:
        mval, m_p = params.mobility(phi_n.values)
        extra = mac.gradient_force(mval - m0, theta_n) + mac.gradient_force(
            m_p * psi_n.values, mu_n
        )
        rhs_psi += dt * divergence_of_faces(extra).values
    psi_np1 = helmholtz_poly_solve(1.0, 0.0, dt * s, dt * m0, ScalarField(grid, rhs_psi))

    return _lin_node(w_np1, q_np1, psi_np1, base_np1, params, base_np1.time)


def solve_linearized(
    base: Trajectory,
    h: Sequence[FaceField] | None,
    params: PhysParams,
) -> list[LinearizedState]:
    """Solve the sensitivity system with zero initial data along ``base``."""
    n_steps = base.time.n_steps
    if h is not None and len(h) != n_steps:
        raise ConfigError(f"perturbation series has {len(h)} entries, need {n_steps}")

    grid = base.grid
    lin = _lin_node(
        FaceField.zeros(grid), ScalarField.zeros(grid), ScalarField.zeros(grid),
        base.states[0], params, 0.0,
    )
    out = [lin]
    for n in range(n_steps):
        h_n = h[n] if h is not None else None
        lin = linearized_step(base.states[n], base.states[n + 1], lin, h_n, base.time.dt, params)
        if not (
            np.isfinite(lin.psi.values).all()
            and np.isfinite(lin.w.x).all()
            and np.isfinite(lin.w.y).all()
        ) or lin.psi.max_abs() > PHI_BLOWUP_LIMIT:
            raise BlowUpError(f"blow-up detected at step {n + 1}", step=n + 1)
        out.append(lin)
    return out
