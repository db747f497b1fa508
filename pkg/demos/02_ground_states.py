"""
Ground states at fixed mass and at fixed frequency
===================================================

Energy minimizers at fixed mass, action minimizers on the Nehari manifold,
and the sign of the frequency relative to the ground level mu_0.
"""

from agpwaves import (BasisSpec, ProblemParams, action_ground_state, assemble, eigen_lowest,
                      energy_ground_state, enhance, localization_fit, nehari_ground_state,
                      sample_noise, sign_condition_check)

F = assemble(enhance(sample_noise(0, BasisSpec(1, 128))))
mu0 = eigen_lowest(F, 1).mu0
print(f"mu_0 = {mu0:.6f}")

# Focusing, defocusing and linear ground states of mass 1/2.
for lam in (1.0, 0.0, -1.0):
    p = ProblemParams(lam, 1.0)
    gs = energy_ground_state(F, p, 0.5)
    v = sign_condition_check(gs, p, mu0)
    print(f"lam={lam:+.0f}: omega={gs.omega:+.6f}  omega+mu_0={gs.omega + mu0:+.2e}  "
          f"residual={gs.residual:.1e}  positive={gs.positive}  sign ok={v.passed}")

# The focusing state is localized like a Gaussian: log|v| is linear in |x|^2.
gs = energy_ground_state(F, ProblemParams(1.0, 1.0), 0.5)
fit = localization_fit(gs, F)
print(f"log|v| ~ {fit.intercept:.3f} - {fit.slope:.3f}|x|^2, r^2={fit.r2:.4f} on {fit.nodes_used} nodes")

# At fixed frequency omega = -mu_0 + 1 two independent routes give the same action.
p = ProblemParams(1.0, 1.0, -mu0 + 1.0)
a = action_ground_state(F, p, mu0=mu0)
b = nehari_ground_state(F, p)
print(f"action via P on Q=1: {a.extras['action']:.12f}")
print(f"action via Nehari:   {b.extras['action']:.12f}")
