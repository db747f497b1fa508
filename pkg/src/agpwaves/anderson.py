"""Galerkin form of -A = -(H + xi) for one noise realization.

1D uses the direct representation: the state is u and

    a(u, v) = int u'v' + x^2 uv - <xi_N, uv>,

where <xi_N, uv> is the exact spectral pairing of the truncated noise with
the product.  2D uses the exponential transform u = rho v, rho = exp(Y):

    a(rho v1, rho v2) = int (grad v1 . grad v2 + |x|^2 (1 - Y) v1 v2) rho^2
                        - int Z v1 v2 rho^2,

so the Galerkin problem is a pencil (M, B) with B_jk = int rho^2 h_j h_k.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import eigsh

from .errors import BasisMismatch, ConvergenceError, RepresentationError
from .spectral import (SpectralField, axis_tables, gauss_hermite, hermite_table,
                       project, synthesize_coeffs, weighted_gram)

DIRECT = "direct"
TRANSFORMED = "transformed"
DENSE_LIMIT = 4000
PENCIL_LIMIT = 2000


def pairing_matrix(xi, basis):
    """T_jk = int xi_N h_j h_k, exact.

    The integrand is exp(-3x^2/2) times a polynomial of degree <= 3N, so a
    Gauss-Hermite rule rescaled by sqrt(3/2) with ceil((3N+2)/2) nodes is exact.
    """
    N = basis.cutoff
    n = math.ceil((3 * N + 2) / 2)
    c = math.sqrt(1.5)
    y, w = gauss_hermite(n)
    x = y / c
    H = hermite_table(N, x)
    xi_vals = xi @ H
    return (H * (w / c * xi_vals)) @ H.T


@dataclass(eq=False)
class AndersonForm:
    """Galerkin matrices of a(., .) for one enhanced noise.

    Attributes
    ----------
    noise : EnhancedNoise
    representation : str
        ``"direct"`` (1D, state u) or ``"transformed"`` (2D, state v, u = rho v).
    matrix : ndarray
        M_jk = a(e_j, e_k) with e_k = h_k (direct) or rho h_k (transformed).
    gram : ndarray or None
        L2 Gram matrix of the e_k; None means the identity.
    seminorm : ndarray
        Gram matrix of the energy seminorm: W^{1,2} (direct) or D^{1,2} (transformed).
    """

    noise: object
    representation: str
    matrix: np.ndarray
    gram: np.ndarray
    seminorm: np.ndarray

    @property
    def basis(self):
        return self.noise.basis

    @property
    def grid(self):
        return self.noise.grid

    @property
    def dim(self):
        return self.basis.dim

    @property
    def transformed(self):
        return self.representation == TRANSFORMED

    @cached_property
    def gram_matrix(self):
        return np.eye(self.basis.n_modes) if self.gram is None else self.gram

    # coefficient <-> grid
    def v_values(self, c):
        """Transformed profile v = u / rho on the grid."""
        vals = synthesize_coeffs(c, self.basis, self.grid)
        return vals if self.transformed else vals / self.noise.rho_vals

    def u_values(self, c):
        """Physical field u on the grid."""
        vals = synthesize_coeffs(c, self.basis, self.grid)
        return vals * self.noise.rho_vals if self.transformed else vals

    def project(self, f):
        """Galerkin vector sum_i w_i f(x_i) e_k(x_i) of physical grid values f."""
        if self.transformed:
            f = f * self.noise.rho_vals
        return project(f, self.basis, self.grid)

    def from_physical(self, u_vals):
        """Coefficients of the physical grid field u in this representation."""
        if self.transformed:
            u_vals = u_vals / self.noise.rho_vals
        return project(u_vals, self.basis, self.grid)

    def apply(self, c):
        return self.matrix @ c

    def apply_gram(self, c):
        return c if self.gram is None else self.gram @ c

    def weighted_matrix(self, f):
        """sum_i w_i f(x_i) e_j(x_i) e_k(x_i) for physical weight values f."""
        if self.transformed:
            f = f * self.noise.rho2_vals
        if self.dim == 1:
            h = axis_tables(self.basis.cutoff, self.grid.n_axis)[0]
            return (h * (f * self.grid.weights)) @ h.T
        return weighted_gram(f, self.basis, self.grid)

    def check(self, u):
        if u.basis != self.basis:
            raise BasisMismatch(f"field basis {u.basis} vs form basis {self.basis}")

    @cached_property
    def shift(self):
        """Pencil-certified quasi-coercivity shift (None above PENCIL_LIMIT modes)."""
        return certified_shift(self)

    def dump_csv(self, path):
        """Lower triangle of the matrix as CSV with a commented header."""
        en = self.noise
        M = self.matrix
        with open(path, "w") as fh:
            fh.write(f"# dim={self.dim},cutoff={self.basis.cutoff},seed={en.seed},"
                     f"mode={en.mode},representation={self.representation}\n")
            fh.write("i,j,value\n")
            for i in range(M.shape[0]):
                for j in range(i + 1):
                    fh.write(f"{i},{j},{M[i, j]:.17g}\n")


def assemble(noise, basis=None, representation=None):
    """Assemble the Galerkin form for an enhanced noise on its basis."""
    basis = basis or noise.basis
    if basis != noise.basis:
        raise BasisMismatch("noise and form must share the basis")
    expected = DIRECT if basis.dim == 1 else TRANSFORMED
    representation = representation or expected
    if representation != expected:
        raise RepresentationError(
            f"dimension {basis.dim} requires the {expected} representation")
    lam2 = basis.eigenvalues
    if basis.dim == 1:
        S = np.diag(lam2)
        if noise.realization.is_zero:
            M = np.diag(lam2)
        else:
            M = np.diag(lam2) - pairing_matrix(noise.realization.xi, basis)
            M = 0.5 * (M + M.T)
        return AndersonForm(noise, DIRECT, M, None, S)
    grid = noise.grid
    rho2 = noise.rho2_vals
    grad = (weighted_gram(rho2, basis, grid, ("d", "h"), ("d", "h"))
            + weighted_gram(rho2, basis, grid, ("h", "d"), ("h", "d")))
    B = weighted_gram(rho2, basis, grid)
    S = grad + weighted_gram(rho2 * grid.r2, basis, grid)
    pot = grid.r2 * (1.0 - noise.Y_vals) - noise.Z_vals
    M = grad + weighted_gram(rho2 * pot, basis, grid)
    sym = lambda A: 0.5 * (A + A.T)
    return AndersonForm(noise, TRANSFORMED, sym(M), sym(B), sym(S))


def form_value(F, u1, u2):
    """a(u1, u2) = Re c1^T M conj(c2)."""
    F.check(u1)
    F.check(u2)
    return float(np.real(u1.coeffs @ (F.matrix @ np.conj(u2.coeffs))))


@dataclass
class EigenResult:
    """Lowest eigenpairs of the pencil (M, B)."""

    values: np.ndarray
    fields: list
    clusters: list
    residuals: np.ndarray

    @property
    def gap(self):
        return float(self.values[1] - self.values[0]) if len(self.values) > 1 else math.inf

    @property
    def mu0(self):
        return float(self.values[0])

    @property
    def phi0(self):
        return self.fields[0]


def _phase_fix(F, vecs):
    w = F.grid.weights
    for j in range(vecs.shape[1]):
        s = w @ F.u_values(vecs[:, j])
        if abs(s) < 1e-10:
            s = vecs[np.argmax(np.abs(vecs[:, j])), j]
        if s < 0:
            vecs[:, j] *= -1
    return vecs


def eigen_lowest(F, count=1):
    """Lowest ``count`` eigenpairs of -A on the truncated space.

    Dense generalized solver up to DENSE_LIMIT modes, shift-invert Lanczos above.
    Eigenfields are B-orthonormal, i.e. L2-orthonormal as physical fields.
    """
    n = F.basis.n_modes
    count = int(count)
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}]")
    M = F.matrix
    B = F.gram
    if n <= DENSE_LIMIT:
        vals, vecs = sla.eigh(M, B, subset_by_index=[0, count - 1])
    else:
        sigma = float(M.diagonal().min()) - 10.0
        vals, vecs = eigsh(M, k=count, M=B, sigma=sigma, which="LM")
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        norms = np.sqrt(np.einsum("ij,ij->j", vecs, F.apply_gram(vecs)))
        vecs = vecs / norms
    vecs = _phase_fix(F, np.array(vecs))
    res = np.linalg.norm(M @ vecs - F.apply_gram(vecs) * vals, axis=0)
    bad = res > 1e-8 * (1 + np.abs(vals))
    if bad.any():
        raise ConvergenceError(f"eigen residuals {res[bad]} exceed tolerance", residual=float(res.max()))
    clusters = []
    start = 0
    for j in range(1, count + 1):
        if j == count or vals[j] - vals[j - 1] >= 1e-8 * (1 + abs(vals[j])):
            clusters.append(list(range(start, j)))
            start = j
    fields = [SpectralField(F.basis, vecs[:, j]) for j in range(count)]
    return EigenResult(np.asarray(vals), fields, clusters, res)


def certified_shift(F):
    """max(0, -min eig of (M - S/2, B)): exact quasi-coercivity shift of the truncated form."""
    if F.basis.n_modes > PENCIL_LIMIT:
        return None
    lo = sla.eigh(F.matrix - 0.5 * F.seminorm, F.gram, eigvals_only=True,
                  subset_by_index=[0, 0])[0]
    return max(0.0, -float(lo))


def coercivity_probe(F, trials=200, seed=0, step=0.05, eig_count=32):
    """Sampled quasi-coercivity shift on a bisection grid of spacing ``step``.

    Returns the smallest grid value delta with
    a(u,u) + delta ||u||^2 >= |u|^2 / 2 for every sampled u, where |.| is the
    energy seminorm.  Samples are ``trials`` smooth random fields, the lowest
    ``eig_count`` eigenfields, random combinations of them, and the worst
    combination in their span (a small Rayleigh-Ritz problem).
    """
    n = F.basis.n_modes
    rng = np.random.default_rng(seed)
    lam2 = F.basis.eigenvalues
    k = min(eig_count, n)
    E = np.column_stack([f.coeffs for f in eigen_lowest(F, k).fields])
    A = E.T @ (0.5 * F.seminorm - F.matrix) @ E
    _, ritz = sla.eigh(0.5 * (A + A.T), E.T @ F.apply_gram(E), subset_by_index=[k - 1, k - 1])
    U = [rng.standard_normal((n, trials)) / lam2[:, None] ** 2,
         rng.standard_normal((n, trials)) / lam2[:, None],
         E, E @ rng.standard_normal((k, trials)), E @ ritz]
    U = np.concatenate(U, axis=1)
    quad = np.einsum("ij,ij->j", U, F.matrix @ U)
    semi = np.einsum("ij,ij->j", U, F.seminorm @ U)
    l2 = np.einsum("ij,ij->j", U, F.apply_gram(U))
    need = float(np.max((0.5 * semi - quad) / l2))
    if need <= 0:
        return 0.0
    lo, hi = 0, 1
    while hi * step < need:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid * step >= need:
            hi = mid
        else:
            lo = mid
    return hi * step
