"""
The harmonic oscillator and its white-noise perturbation
=========================================================

Start from the bare oscillator -Delta + |x|^2, whose Hermite functions are
exact eigenfunctions, then add a spatial white noise and watch the ground
level move.
"""

import numpy as np

from agpwaves import BasisSpec, assemble, eigen_lowest, enhance, sample_noise, zero_noise
from agpwaves.noise import BARE, noise_sobolev_series

# Without noise the Galerkin matrix is diagonal: levels 2k + 1 in 1D.
basis = BasisSpec(1, 128)
F0 = assemble(enhance(zero_noise(basis), BARE))
print("bare 1D levels:", eigen_lowest(F0, 4).values)

# In 2D the levels 2|k| + 2 are degenerate, and the solver reports clusters.
F0_2d = assemble(enhance(zero_noise(BasisSpec(2, 24)), BARE))
e = eigen_lowest(F0_2d, 6)
print("bare 2D levels:", e.values.round(10), "clusters:", e.clusters)

# A noise realization is fixed by its seed; low modes do not depend on the cutoff.
xi = sample_noise(7, basis)
print("first noise modes:", xi.xi[:4])

# The ground level of -(H + xi) fluctuates from seed to seed.
mus = [eigen_lowest(assemble(enhance(sample_noise(s, basis))), 1).mu0 for s in range(10)]
print(f"mu_0 over 10 seeds: mean {np.mean(mus):.4f}, std {np.std(mus):.4f}")

# It converges slowly in the cutoff: each doubling of N still moves it by a few 1e-3.
for N in (64, 128, 256, 512):
    F = assemble(enhance(sample_noise(7, BasisSpec(1, N))))
    print(f"N={N:4d}  mu_0={eigen_lowest(F, 1).mu0:.6f}")

# The expected squared norm of xi in the oscillator Sobolev scale is the
# series sum_k (2|k| + d)^alpha = E |H^(alpha/2) xi|^2, with H = -Delta + |x|^2,
# finite exactly when alpha < -d.  Since H^(1/2) costs one derivative or one
# power of |x|, xi lies in the H-scale just below order -d.
for alpha in (-1.5, -1.0, -0.75):
    S = noise_sobolev_series(BasisSpec(1, 4), alpha, cutoff=8192)
    print(f"alpha={alpha:+.2f}: S(4096)={S[4096]:.4f}  S(8192)={S[8192]:.4f}")
