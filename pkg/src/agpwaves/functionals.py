"""Mass, energy, action and Nehari functionals on an AndersonForm.

All integrals of powers of |u| use the oversampled quadrature grid of the
form.  Gradients are taken with respect to the real inner product
Re <f, g> = Re sum f_k conj(g_k) on coefficients.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import AliasError, SignError, ZeroFieldError
from .spectral import SpectralField, hermite_table, project


@dataclass(frozen=True)
class ProblemParams:
    """Coupling ``lam`` (focusing > 0), exponent ``gamma`` > 0, optional frequency ``omega``."""

    lam: float
    gamma: float
    omega: float = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def critical(self, dim):
        return abs(self.gamma - 2.0 / dim) < 1e-12

    def with_omega(self, omega):
        return ProblemParams(self.lam, self.gamma, omega)

    def with_lam(self, lam):
        return ProblemParams(lam, self.gamma, self.omega)


def _c(u, F):
    F.check(u)
    return u.coeffs


# coefficient-level kernels shared with the solvers

def mass_c(F, c):
    return 0.5 * float(np.real(np.vdot(c, F.apply_gram(c))))


def quad_c(F, c):
    return float(np.real(np.vdot(c, F.matrix @ c)))


def power_integral_c(F, c, gamma):
    """int |u|^{2 gamma + 2}."""
    u = F.u_values(c)
    return float(F.grid.weights @ np.abs(u) ** (2 * gamma + 2))


def nonlinear_c(F, c, gamma):
    """Galerkin vector of |u|^{2 gamma} u."""
    u = F.u_values(c)
    return F.project(np.abs(u) ** (2 * gamma) * u)


def nonlinear_jacobian_c(F, c, gamma):
    """(2 gamma + 1) int |u|^{2 gamma} e_j e_k: derivative of nonlinear_c along real directions at real u."""
    u = np.real(F.u_values(c))
    return (2 * gamma + 1) * F.weighted_matrix(np.abs(u) ** (2 * gamma))


def energy_c(F, c, p):
    return 0.5 * quad_c(F, c) - p.lam / (2 * p.gamma + 2) * power_integral_c(F, c, p.gamma)


def gradient_c(F, c, p):
    return F.matrix @ c - p.lam * nonlinear_c(F, c, p.gamma)


# public API on SpectralFields

def mass(u, F=None):
    """M(u) = 1/2 int |u|^2 (u = rho v in the transformed representation)."""
    if F is None:
        return 0.5 * float(np.sum(np.abs(u.coeffs) ** 2))
    return mass_c(F, _c(u, F))


def nonlinear_term(u, gamma, F):
    """Projection of |u|^{2 gamma} u onto the form's basis functions."""
    return SpectralField(u.basis, nonlinear_c(F, _c(u, F), gamma))


def energy(u, F, p):
    """E(u) = 1/2 a(u, u) - lam / (2 gamma + 2) int |u|^{2 gamma + 2}."""
    return energy_c(F, _c(u, F), p)


def Q_func(u, F, gamma):
    """Q(u) = int |u|^{2 gamma + 2}."""
    c = _c(u, F)
    if not np.any(c):
        raise ZeroFieldError("Q of the zero field")
    return power_integral_c(F, c, gamma)


def P_omega(u, F, omega):
    """P(u) = a(u, u) + omega ||u||^2."""
    c = _c(u, F)
    return quad_c(F, c) + 2.0 * omega * mass_c(F, c)


def J_omega(u, F, omega, gamma):
    """Weinstein-type quotient P(u) / Q(u)^{1 / (gamma + 1)}."""
    c = _c(u, F)
    if not np.any(c):
        raise ZeroFieldError("J of the zero field")
    return P_omega(u, F, omega) / power_integral_c(F, c, gamma) ** (1.0 / (gamma + 1))


def action(u, F, p):
    """S(u) = E(u) + omega M(u) = P/2 - lam / (2 gamma + 2) Q."""
    c = _c(u, F)
    return energy_c(F, c, p) + p.omega * mass_c(F, c)


def nehari_I(u, F, p):
    """I(u) = P(u) - lam Q(u)."""
    c = _c(u, F)
    return P_omega(u, F, p.omega) - p.lam * power_integral_c(F, c, p.gamma)


def t_nehari(u, F, p):
    """Scaling t with I(t u) = 0: t = (P / (lam Q))^{1 / (2 gamma)}."""
    if not p.lam > 0:
        raise ValueError("the Nehari scaling needs lam > 0")
    c = _c(u, F)
    if not np.any(c):
        raise ZeroFieldError("Nehari scaling of the zero field")
    P = P_omega(u, F, p.omega)
    if P <= 0:
        raise SignError(f"P_omega(u) = {P:.3e} <= 0")
    return (P / (p.lam * power_integral_c(F, c, p.gamma))) ** (1.0 / (2 * p.gamma))


def energy_gradient(u, F, p):
    """g = M c - lam n(c), so that dE(u)[w] = Re <g, w>."""
    return SpectralField(u.basis, gradient_c(F, _c(u, F), p))


def omega_from_field(F, c, p):
    """Lagrange multiplier (lam int |u|^{2g+2} - a(u,u)) / (2 m)."""
    m = mass_c(F, c)
    return (p.lam * power_integral_c(F, c, p.gamma) - quad_c(F, c)) / (2 * m)


def seminorm_sq(u, F):
    """Energy seminorm squared: W^{1,2} in 1D, D^{1,2} = int (|grad v|^2 + |x v|^2) rho^2 in 2D."""
    c = _c(u, F)
    return float(np.real(np.vdot(c, F.seminorm @ c)))


# scaling u_alpha(x) = alpha^{d/2} rho(x) v(alpha x)

def _v_coeffs(F, c):
    # coefficients of v = u / rho on the basis
    if F.transformed:
        return c
    return project(F.v_values(c), F.basis, F.grid)


def scaling_loss(F, v, alpha):
    """Relative L2 energy of v(alpha .) lost by truncation to the basis."""
    d = F.dim
    basis = F.basis
    grid = F.grid
    N = basis.cutoff
    pts = alpha * grid.x
    h = hermite_table(N, pts)
    if d == 1:
        vals = v @ h
    else:
        m = basis.modes
        C = np.zeros((N + 1, N + 1), dtype=v.dtype)
        C[m[:, 0], m[:, 1]] = v
        vals = (h.T @ C @ h).ravel()
    coeffs = project(vals, basis, grid)
    exact = alpha ** (-d) * float(np.sum(np.abs(v) ** 2))
    if exact == 0:
        return 0.0, vals
    kept = float(np.sum(np.abs(coeffs) ** 2))
    return max(0.0, 1.0 - kept / exact), vals


def alias_bound(u, F, tol=1e-10, alpha_cap=64.0):
    """Largest alpha (on a 2^(1/8) ladder) for which v(alpha .) is resolved to ``tol``."""
    v = _v_coeffs(F, _c(u, F))
    alpha = 1.0
    step = 2 ** 0.125
    while alpha * step <= alpha_cap and scaling_loss(F, v, alpha * step)[0] <= tol:
        alpha *= step
    return alpha


def scale_field(u, alpha, F, tol=1e-10):
    """Coefficients of alpha^{d/2} rho(x) v(alpha x) in the form's representation.

    Raises AliasError when v(alpha .) loses more than ``tol`` of its L2 energy
    to truncation, i.e. alpha exceeds the resolution of the basis.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    c = _c(u, F)
    if alpha == 1:
        return SpectralField(u.basis, c.copy())
    v = _v_coeffs(F, c)
    loss, vals = scaling_loss(F, v, alpha)
    if loss > tol:
        raise AliasError(f"scaling alpha={alpha:g} loses {loss:.2e} of the L2 mass; raise the cutoff")
    vals = alpha ** (F.dim / 2) * vals
    if not F.transformed:
        vals = vals * F.noise.rho_vals
    return SpectralField(u.basis, project(vals, F.basis, F.grid))
