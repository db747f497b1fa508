"""
The small-mass limit
====================

As m -> 0 the normalized ground state tends to the linear ground state phi_0
and omega_m + mu_0 ~ lam (2m)^gamma int phi_0^(2 gamma + 2).
"""

import numpy as np

from agpwaves import BasisSpec, ProblemParams, assemble, enhance, sample_noise, small_mass_sweep

F = assemble(enhance(sample_noise(7, BasisSpec(1, 128))))
p = ProblemParams(1.0, 1.0)
r = small_mass_sweep(F, p, np.geomspace(1e-1, 1e-3, 8))

print("      m        omega + mu_0    |psi_m - phi_0|")
for m, om, err in zip(r.masses, r.omegas, r.errors):
    print(f"{m:10.2e}  {om + r.mu0:14.6e}  {err:14.6e}")
print(f"fitted exponent {r.exponent:.4f} (gamma = {p.gamma})")
print(f"fitted prefactor {r.prefactor:.6f}, predicted {r.predicted_prefactor:.6f}")
