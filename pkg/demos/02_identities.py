"""The verification harness, narrated.

Runs the five identity checks on a reduced (32x32) configuration so the
whole script finishes in well under a minute:

1. mass        -- the phase mean is constant along a forced run;
2. energy      -- unforced decay is monotone and the balance defect is
                  first order in dt;
3. frechet     -- the sensitivity solver is the derivative of the state
                  map: the Taylor defect e(eps) halves with eps;
4. duality     -- the control-side and state-side integrals of the
                  adjoint pairing agree, and agree better when grid and
                  step are refined together;
5. gradient    -- the adjoint gradient matches central finite
                  differences of the reduced cost along random smooth
                  directions.

The three adjoint checks use a stripe target: the run's phase never
resembles it, so the compared integrals carry O(1) signal instead of
near-cancelling noise.
"""

from nsch.config import RunConfig, build_problem, refine_config
import nsch.verification as verification

cfg = RunConfig({
    "grid.nx": 32, "grid.ny": 32,
    "time.T": 0.05, "time.dt": 1e-3,
    "init.swirl": 1.0,
    "cost.target": "stripe",
})
problem = build_problem(cfg)

print(verification.verify_mass(problem).summary())
print(verification.verify_energy(problem).summary())
print(verification.verify_frechet(problem, seed=0).summary())

refined = build_problem(refine_config(cfg))
print(verification.verify_duality(problem, refined, seed=0).summary())
print(verification.verify_gradient(problem, seed=0).summary())
