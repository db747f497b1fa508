"""
The critical mass at the mass-critical exponent
================================================

At gamma = 2/d the energy is bounded below only for small masses.  The
threshold is set by the Gagliardo-Nirenberg constant: without noise it is
the mass of the soliton, with noise it is bracketed between J_Xi / lam and a
scaling probe.
"""

import math

from agpwaves import (BasisSpec, ProblemParams, assemble, critical_mass, enhance, gn_constant,
                      noisy_gn_constant, sample_noise)

# 1D quintic: J = pi^2 / 4 and m* = sqrt(3) pi / 4.
g1 = gn_constant(1, 2.0, cutoff=128)
print(f"1D: J={g1.J:.8f} (pi^2/4={math.pi ** 2 / 4:.8f}), m*={g1.critical_mass:.8f}, "
      f"Pohozaev residual {g1.pohozaev_rel:.1e}")

# 2D cubic: the Townes soliton.
g2 = gn_constant(2, 1.0, cutoff=48)
print(f"2D: J={g2.J:.6f}, 1/2 ||Q||^2={g2.half_norm_sq:.6f}")

# With noise the 1D threshold does not move, and the 2D one is bracketed.
F1 = assemble(enhance(sample_noise(1, BasisSpec(1, 128))))
r = critical_mass(F1, ProblemParams(1.0, 2.0), gn=g1)
print(f"1D noisy bracket: [{r.lower:.5f}, {r.upper:.5f}], m*={r.mstar:.5f}")

en = enhance(sample_noise(1, BasisSpec(2, 48)))
F2 = assemble(en)
JX, _ = noisy_gn_constant(F2)
r = critical_mass(F2, ProblemParams(1.0, 1.0), gn=g2, noisy=JX)
floor = math.exp(4 * (en.infY - en.supY)) * r.mstar
print(f"2D noisy: J_Xi={JX:.5f}, bracket [{r.lower:.5f}, {r.upper:.5f}], "
      f"oscillation floor {floor:.5f}, m*={r.mstar:.5f}")
