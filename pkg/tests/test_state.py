"""Forward solver: steps, conservation, fixed points, and a dense oracle."""

import numpy as np
import pytest

from nsch import (
    BlowUpError,
    ConfigError,
    FaceField,
    GridSpec,
    PhysParams,
    ScalarField,
    TimeSpec,
    ch_step,
    divergence_of_faces,
    energy_balance_residual,
    mu_of_phi,
    ns_step,
    simulate,
)
from nsch.config import bubble_phase, swirl_velocity

from conftest import random_face, random_scalar, random_solenoidal
import oracles


class TestTimeSpec:
    def test_rounding_consistency(self):
        ts = TimeSpec(0.1, 1e-3)
        assert ts.n_steps == 100
        assert len(ts.times()) == 101

    def test_non_integral_ratio_rejected(self):
        with pytest.raises(ConfigError):
            TimeSpec(0.1, 3e-4)

    def test_refine(self):
        ts = TimeSpec(0.1, 1e-3).refine()
        assert ts.n_steps == 200


class TestChStep:
    def test_pure_phase_fixed_point(self, grid6, params):
        phi = ScalarField.full(grid6, 1.0)
        out = ch_step(phi, FaceField.zeros(grid6), 1e-3, params)
        assert np.abs(out.values - 1.0).max() < 1e-13

    def test_any_constant_fixed_point(self, grid6, params):
        for c in (-1.0, 0.3, 2.0):
            phi = ScalarField.full(grid6, c)
            out = ch_step(phi, FaceField.zeros(grid6), 1e-3, params)
            assert np.abs(out.values - c).max() < 1e-12 * max(1.0, abs(c))

    def test_mean_preservation(self, grid65, params, rng):
        phi = random_scalar(grid65, rng, scale=0.5)
        v = random_solenoidal(grid65, rng)
        out = ch_step(phi, v, 1e-3, params)
        assert abs(out.mean() - phi.mean()) < 1e-13

    def test_mean_preservation_nonconstant_mobility(self, grid65, rng):
        p = PhysParams(mob_amp=0.5)
        phi = random_scalar(grid65, rng, scale=0.5)
        v = random_solenoidal(grid65, rng)
        out = ch_step(phi, v, 1e-4, p)
        assert abs(out.mean() - phi.mean()) < 1e-13

    def test_constants_fixed_under_nonconstant_mobility(self, grid6):
        # grad(mu) = 0 kills the extra flux, so constants stay fixed points
        p = PhysParams(mob_amp=0.5)
        phi = ScalarField.full(grid6, 0.4)
        out = ch_step(phi, FaceField.zeros(grid6), 1e-3, p)
        assert np.abs(out.values - 0.4).max() < 1e-13


def dense_ns_step_oracle(v, phi, mu, u, dt, params):
    """Loop-op re-implementation of the momentum step with dense solves."""
    grid = v.grid
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    nu, _ = params.viscosity(phi.values)

    adv = oracles.loop_momentum_advection(v.x, v.y, v.x, v.y, hx, hy)
    visc = oracles.loop_stress_divergence(nu - params.nu_bar, v.x, v.y, hx, hy)
    gpx, gpy = oracles.loop_gradient(phi.values, hx, hy)
    kx = np.zeros_like(gpx)
    ky = np.zeros_like(gpy)
    kx[1:-1, :] = 0.5 * (mu.values[1:, :] + mu.values[:-1, :]) * gpx[1:-1, :]
    ky[:, 1:-1] = 0.5 * (mu.values[:, 1:] + mu.values[:, :-1]) * gpy[:, 1:-1]

    rhs_x = v.x + dt * (-adv[0] + visc[0] + kx + u.x)
    rhs_y = v.y + dt * (-adv[1] + visc[1] + ky + u.y)

    lap_face = oracles.face_matrix(
        lambda vx, vy: oracles.loop_face_laplacian(vx, vy, hx, hy), nx, ny
    )
    dim = lap_face.shape[0]
    # pin boundary normal faces so the dense solve matches the spectral one
    bx = np.zeros((nx + 1, ny), dtype=bool)
    bx[0, :] = bx[-1, :] = True
    by = np.zeros((nx, ny + 1), dtype=bool)
    by[:, 0] = by[:, -1] = True
    pinned = np.concatenate([bx.ravel(), by.ravel()])
    a = np.eye(dim) - dt * params.nu_bar * lap_face
    a[pinned, :] = 0.0
    a[pinned, pinned] = 1.0
    rhs_flat = oracles.face_vec(rhs_x, rhs_y)
    rhs_flat[pinned] = 0.0
    v_star = np.linalg.solve(a, rhs_flat)

    project = oracles.dense_projection(nx, ny, hx, hy)
    v_new, p = project(v_star, dt)
    vx, vy = oracles.face_unvec(v_new, nx, ny)
    return FaceField(grid, vx, vy), ScalarField(grid, p.reshape(nx, ny))


class TestNsStep:
    def test_rest_state(self, grid6, params):
        v0 = FaceField.zeros(grid6)
        phi = ScalarField.full(grid6, 1.0)
        mu, _ = mu_of_phi(phi, params)
        v1, p1 = ns_step(v0, phi, mu, None, 1e-3, params)
        assert v1.max_abs() < 1e-14
        assert p1.max_abs() < 1e-14

    def test_pure_gradient_force_absorbed(self, grid6, params, rng):
        # u = grad f with v = 0 and constant phi: the projection removes
        # the gradient; only the O(dt) boundary coupling of the implicit
        # viscous solve survives, so the leakage vanishes at second order
        from nsch.grid import gradient_to_faces

        f = random_scalar(grid6, rng)
        u = gradient_to_faces(f)
        phi = ScalarField.full(grid6, 1.0)
        mu, _ = mu_of_phi(phi, params)

        leak = {}
        for dt in (1e-3, 1e-4):
            v1, p1 = ns_step(FaceField.zeros(grid6), phi, mu, u, dt, params)
            leak[dt] = v1.max_abs() / (dt * u.max_abs())
        assert leak[1e-3] < 0.05
        assert leak[1e-4] < 0.15 * leak[1e-3]
        # pressure absorbs the potential of u
        assert p1.max_abs() > 0.1 * np.abs(f.values - f.values.mean()).max()

    def test_single_step_matches_dense_oracle(self, grid6, params, rng):
        v = random_solenoidal(grid6, rng, scale=0.3)
        phi = random_scalar(grid6, rng, scale=0.4)
        mu, _ = mu_of_phi(phi, params)
        u = random_face(grid6, rng, scale=0.5)
        dt = 2e-3
        v1, p1 = ns_step(v, phi, mu, u, dt, params)
        v_ref, p_ref = dense_ns_step_oracle(v, phi, mu, u, dt, params)
        scale = max(1.0, v_ref.max_abs())
        assert np.abs(v1.x - v_ref.x).max() < 1e-10 * scale
        assert np.abs(v1.y - v_ref.y).max() < 1e-10 * scale
        assert np.abs(p1.values - p_ref.values).max() < 1e-10 * max(1.0, p_ref.max_abs())

    def test_output_divergence_free(self, grid65, params, rng):
        v = random_solenoidal(grid65, rng)
        phi = random_scalar(grid65, rng, scale=0.3)
        mu, _ = mu_of_phi(phi, params)
        v1, _ = ns_step(v, phi, mu, None, 1e-3, params)
        assert divergence_of_faces(v1).max_abs() < 1e-10 * max(
            1.0, v1.max_abs() / grid65.hx
        )


class TestSimulate:
    def test_equilibrium_trajectory(self, params):
        grid = GridSpec(16, 16, 8.0, 8.0)
        ts = TimeSpec(0.02, 1e-3)
        traj = simulate(
            FaceField.zeros(grid), ScalarField.full(grid, 1.0), None, ts, params
        )
        for s in traj.states:
            assert np.abs(s.phi.values - 1.0).max() < 1e-13
            assert s.v.max_abs() < 1e-13

    def test_mass_conservation_with_flow(self, params):
        grid = GridSpec(24, 24, 16.0, 16.0)
        ts = TimeSpec(0.05, 1e-3)
        traj = simulate(swirl_velocity(grid, 1.0), bubble_phase(grid), None, ts, params)
        means = np.array([s.phi.mean() for s in traj.states])
        assert np.abs(means - means[0]).max() <= 1e-12

    def test_divergence_stays_small(self, params):
        grid = GridSpec(16, 16, 16.0, 16.0)
        ts = TimeSpec(0.02, 1e-3)
        traj = simulate(swirl_velocity(grid, 1.0), bubble_phase(grid), None, ts, params)
        assert traj.diagnostics["divergence_max"].max() < 1e-8

    def test_first_order_self_convergence(self, params):
        # phase error between dt and dt/2 runs halves when dt is halved
        grid = GridSpec(16, 16, 16.0, 16.0)
        phi0, v0 = bubble_phase(grid), swirl_velocity(grid, 0.5)
        T = 0.02

        def final_phi(dt):
            return simulate(v0, phi0, None, TimeSpec(T, dt), params).final.phi

        e1 = (final_phi(2e-3) - final_phi(1e-3)).norm_l2()
        e2 = (final_phi(1e-3) - final_phi(5e-4)).norm_l2()
        assert 1.7 <= e1 / e2 <= 2.3

    def test_control_length_mismatch(self, grid6, params):
        ts = TimeSpec(0.01, 1e-3)
        u = [FaceField.zeros(grid6)] * 3
        with pytest.raises(ConfigError, match="control series"):
            simulate(FaceField.zeros(grid6), ScalarField.full(grid6, 1.0), u, ts, params)

    def test_blow_up_detection(self, params):
        grid = GridSpec(8, 8, 1.0, 1.0)
        ts = TimeSpec(0.01, 1e-3)
        phi0 = ScalarField.full(grid, 1e7)  # far outside the physical range
        with pytest.raises(BlowUpError, match="step"):
            simulate(FaceField.zeros(grid), phi0, None, ts, params)

    def test_diagnostics_columns(self, params):
        grid = GridSpec(8, 8, 4.0, 4.0)
        ts = TimeSpec(0.005, 1e-3)
        traj = simulate(FaceField.zeros(grid), bubble_phase(grid), None, ts, params)
        for col in ("mass", "energy", "willmore", "gl", "kinetic",
                    "dissipation_v", "dissipation_mu", "divergence_max"):
            assert len(traj.diagnostics[col]) == ts.n_steps + 1

    def test_negative_eta_regime_stable(self):
        # bending-dominated free energy (eta < 0): still monotone decay
        p = PhysParams(eta=-0.5)
        grid = GridSpec(24, 24, 16.0, 16.0)
        ts = TimeSpec(0.05, 1e-3)
        traj = simulate(swirl_velocity(grid, 1.0), bubble_phase(grid), None, ts, p)
        d = traj.diagnostics
        total = d["kinetic"] + d["energy"]
        assert np.diff(total).max() <= 1e-11
        assert max(s.phi.max_abs() for s in traj.states) < 1.2
        assert np.abs(d["mass"] - d["mass"][0]).max() < 1e-11

    def test_energy_decay_and_balance_convergence(self, params):
        grid = GridSpec(24, 24, 16.0, 16.0)
        phi0, v0 = bubble_phase(grid), swirl_velocity(grid, 1.0)

        def run(dt):
            traj = simulate(v0, phi0, None, TimeSpec(0.02, dt), params)
            total = traj.diagnostics["kinetic"] + traj.diagnostics["energy"]
            return traj, float(np.diff(total).max())

        traj1, inc1 = run(5e-4)
        traj2, inc2 = run(2.5e-4)
        assert inc1 <= 1e-11
        assert inc2 <= 1e-11
        r1 = energy_balance_residual(traj1)
        r2 = energy_balance_residual(traj2)
        assert 1.7 <= abs(r1) / abs(r2) <= 2.3

    def test_forced_energy_balance(self, params, rng):
        # the work integral enters the balance with the right sign
        grid = GridSpec(16, 16, 16.0, 16.0)
        ts = TimeSpec(0.02, 5e-4)
        u = [random_solenoidal(grid, rng, scale=0.5) for _ in range(ts.n_steps)]
        traj = simulate(FaceField.zeros(grid), bubble_phase(grid), u, ts, params)
        res_with_work = energy_balance_residual(traj, u)
        res_without = energy_balance_residual(traj)
        assert abs(res_with_work) < abs(res_without)
