"""Backward-in-time adjoint solver (constant unit mobility).

The adjoint tuple (va, pa, phia, mua, omegaa) runs backward from the
terminal data va(T) = 0, phia(T) = alpha2 (phi(T) - phi_Omega) and supplies
the velocity va that drives the reduced cost gradient alpha3*u + va.

The scalar chain mirrors the forward one in reverse:

    mua    = -Lap(phia) - grad(phi) . va,
    omegaa = -Lap(mua) + (f'(phi) + eta) mua,

and substituting the chain into the scalar adjoint equation exposes the
same leading triharmonic operator as the forward phase equation, so the
stepper marches in reversed time with the identical implicit symbol
(I + dt*(-Lap)^3 + dt*S*Lap^2).

One backward step t_{n+1} -> t_n applies the implicit solves first and the
explicit couplings second, to the smoothed fields:

    z = implicit_scalar_solve(phia_in)          # shared sixth-order symbol
    y = implicit_velocity_solve(project(va_in + dt * phase force))
    phia_out = z + dt * [scalar couplings](z, y) + dt * tracking source
    va_out   = project(y + dt * [velocity couplings](y))

with every coupling term one of the adjoint-system terms: the phase force
-phia grad(phi); the velocity terms div(2(nu(phi)-nu_bar) D va),
(v . grad)va and -(va . grad^T)v; the scalar terms Lap^2(grad(phi) . va)
and the chemical chain remainders, -2 nu'(phi) D(v):grad(va),
grad(phia) . v, -grad(mu) . va, and alpha1 (phi - phi_Q).

Time levels are calibrated against the sensitivity solver (the
duality/gradient checks of the verification suite): base coefficients are
frozen at the left node t_n of the step being transposed -- matching the
forward IMEX -- except the transport of phia itself, which pairs with the
end-of-step velocity v(t_{n+1}) exactly as the forward phase transport
does.  The tracking source alpha1 (phi - phi_Q) enters at its own node
with the trapezoid weight of the cost quadrature (the half-weighted final
node rides along with the terminal data during the first backward step;
the stored terminal state carries the plain terminal condition).

This realizes the continuous adjoint system rather than the exact
transpose of the discrete forward map: the velocity advection stencils are
transposed only up to O(h^2), so gradients agree with finite differences
up to discretization error, which the verification suite measures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mac
from .constitutive import CostSpec, PhysParams, potential_fp, potential_fpp
from .errors import BlowUpError, ConfigError
from .grid import (
    FaceField,
    ScalarField,
    advect_scalar,
    helmholtz_poly_solve,
    laplacian,
    project_divergence_free,
)
from .state import PHI_BLOWUP_LIMIT, State, Trajectory


@dataclass
class AdjointState:
    """Adjoint tuple at one time node; (mua, omegaa) consistent with (phia, va)."""

    va: FaceField
    pa: ScalarField
    phia: ScalarField
    mua: ScalarField
    omegaa: ScalarField
    time: float


def require_unit_mobility(params: PhysParams, context: str) -> None:
    """Reject configurations outside the adjoint theory's mobility assumption."""
    if not params.constant_mobility or params.mob_const != 1.0:
        raise ConfigError(
            f"{context} requires constant unit mobility (m = 1): the adjoint "
            "system and the control projection formula are derived under that "
            f"precondition, got mob_const={params.mob_const}, mob_amp={params.mob_amp}"
        )


def _adjoint_potentials(
    phia: ScalarField, va: FaceField, base: State, params: PhysParams
) -> tuple[ScalarField, ScalarField]:
    grid = phia.grid
    grad_phi_va = advect_scalar(va, base.phi)
    mua = ScalarField(grid, -laplacian(phia).values - grad_phi_va.values)
    omegaa = ScalarField(
        grid,
        -laplacian(mua).values + (potential_fp(base.phi.values) + params.eta) * mua.values,
    )
    return mua, omegaa


def adjoint_terminal(
    phi_t: ScalarField, cost: CostSpec, base_final: State, params: PhysParams
) -> AdjointState:
    """Terminal condition: va(T) = 0, phia(T) = alpha2 (phi(T) - phi_Omega)."""
    grid = phi_t.grid
    va = FaceField.zeros(grid)
    phia = ScalarField(grid, cost.alpha2 * (phi_t.values - cost.phi_omega.values))
    mua, omegaa = _adjoint_potentials(phia, va, base_final, params)
    return AdjointState(
        va=va, pa=ScalarField.zeros(grid), phia=phia, mua=mua, omegaa=omegaa,
        time=base_final.time,
    )


def _chain_transpose(chi: ScalarField, base: State, params: PhysParams) -> ScalarField:
    """Adjoint of the linearized chemical-potential remainder.

    For H(psi) = -Lap(f' psi) + f'' psi omega + (f' + eta)(-Lap psi + f' psi)
    this returns the field satisfying <H(psi), chi> = <psi, H^T(chi)>:

        H^T(chi) = -f' Lap(chi) + f'' omega chi - Lap((f' + eta) chi)
                   + f' (f' + eta) chi.
    """
    fp = potential_fp(base.phi.values)
    fpe = fp + params.eta
    vals = (
        -fp * laplacian(chi).values
        + potential_fpp(base.phi.values) * base.omega.values * chi.values
        - laplacian(ScalarField(chi.grid, fpe * chi.values)).values
        + fp * fpe * chi.values
    )
    return ScalarField(chi.grid, vals)


def adjoint_step(
    base_n: State,
    base_np1: State,
    adj_np1: AdjointState,
    tracking_source: ScalarField | None,
    dt: float,
    params: PhysParams,
) -> AdjointState:
    """One backward step t_{n+1} -> t_n of the adjoint system.

    ``tracking_source`` is the weighted misfit alpha1 * w_n * (phi - phi_Q)
    at the target node t_n (None when alpha1 = 0).
    """
    require_unit_mobility(params, "the adjoint solver")
    grid = base_n.phi.grid
    phi_n, v_n, mu_n = base_n.phi, base_n.v, base_n.mu
    nu, nu_p = params.viscosity(phi_n.values)
    s = params.stab

    # implicit smoothers first (shared symbols with the forward stepper;
    # the leading coefficient is dt since unit mobility is enforced above)
    z = helmholtz_poly_solve(1.0, 0.0, dt * s, dt, adj_np1.phia)
    force = mac.gradient_force(z.values, phi_n)
    y_pre = adj_np1.va - dt * force
    y_proj, p_front = project_divergence_free(y_pre, dt)
    y = mac.solve_face_helmholtz(y_proj, dt * params.nu_bar)

    # scalar couplings on the smoothed fields, coefficients at t_n
    g1 = advect_scalar(y, phi_n)  # grad(phi) . va on cells
    rest = (
        laplacian(laplacian(g1)).values
        + _chain_transpose(g1, base_n, params).values
        + _chain_transpose(laplacian(z), base_n, params).values
        + s * laplacian(laplacian(z)).values
        + advect_scalar(base_np1.v, z).values
        - advect_scalar(y, mu_n).values
        - 2.0 * nu_p * mac.strain_contraction(v_n, y)
    )
    phia_vals = z.values + dt * rest
    if tracking_source is not None:
        phia_vals = phia_vals + dt * tracking_source.values
    phia_n = ScalarField(grid, phia_vals)

    # velocity couplings on the smoothed field, coefficients at t_n; the
    # trailing projection restores the solenoidal invariant and is
    # transparent to the recursion (the next step projects again)
    visc = mac.viscous_stress_divergence(nu - params.nu_bar, y)
    adv = mac.momentum_advection(v_n, y)
    stretch = mac.transpose_gradient_term(v_n, y)
    va_n, p_end = project_divergence_free(y + dt * (visc + adv - stretch), dt)
    pa_n = ScalarField(grid, -(p_front.values + p_end.values))

    mua_n, omegaa_n = _adjoint_potentials(phia_n, va_n, base_n, params)
    return AdjointState(
        va=va_n, pa=pa_n, phia=phia_n, mua=mua_n, omegaa=omegaa_n, time=base_n.time
    )


def solve_adjoint(base: Trajectory, cost: CostSpec, params: PhysParams) -> list[AdjointState]:
    """March the adjoint system from T back to 0 along a stored trajectory.

    Returns adjoint states at every node t_0..t_N (index matching the
    forward trajectory).
    """
    require_unit_mobility(params, "the adjoint solver")
    n_steps = base.time.n_steps
    dt = base.time.dt
    if len(cost.phi_q) != n_steps + 1:
        raise ConfigError(
            f"running target has {len(cost.phi_q)} nodes, need {n_steps + 1}"
        )

    def source(n: int) -> ScalarField | None:
        if cost.alpha1 == 0.0:
            return None
        weight = 0.5 if n in (0, n_steps) else 1.0
        misfit = base.states[n].phi - cost.phi_q_at(n)
        return ScalarField(base.grid, cost.alpha1 * weight * misfit.values)

    terminal = adjoint_terminal(base.final.phi, cost, base.final, params)
    out = [terminal]

    # the half-weighted final tracking node rides along with the terminal
    # data; the stored terminal state stays the plain terminal condition
    adj = terminal
    s_n = source(n_steps)
    if s_n is not None:
        adj = AdjointState(
            va=terminal.va, pa=terminal.pa,
            phia=ScalarField(base.grid, terminal.phia.values + dt * s_n.values),
            mua=terminal.mua, omegaa=terminal.omegaa, time=terminal.time,
        )

    for n in range(n_steps - 1, -1, -1):
        adj = adjoint_step(
            base.states[n], base.states[n + 1], adj, source(n), dt, params
        )
        if not (
            np.isfinite(adj.phia.values).all()
            and np.isfinite(adj.va.x).all()
            and np.isfinite(adj.va.y).all()
        ) or adj.phia.max_abs() > PHI_BLOWUP_LIMIT:
            raise BlowUpError(f"blow-up detected at backward step to node {n}", step=n)
        out.append(adj)
    out.reverse()
    return out
