"""Hermite eigenbasis of -H = -Laplacian + |x|^2, quadrature and coefficient transforms.

Conventions
-----------
* ``h_k`` are the L2-normalized Hermite functions, ``-H h_k = (2|k| + d) h_k``.
* In 2D the basis is truncated by total degree ``k1 + k2 <= N`` and ordered
  graded-lexicographically: by degree, then by decreasing ``k1``, so
  ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...``.  Raising the cutoff
  only appends modes.
* Grid values of a 2D field are stored flat in C order over the tensor grid,
  node ``i * n + j`` sitting at ``(x_i, x_j)``.
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import AliasError, BasisMismatch, ShapeError

ENUMERATION = "graded-lex-v1"
_RESCALE = 1e150


def hermite_table(kmax, x):
    """Values of h_0 .. h_kmax at the points ``x``, shape ``(kmax + 1,) + x.shape``.

    Upward recurrence on normalized functions.  The Gaussian factor is carried
    in log form so that far nodes do not underflow before the polynomial part
    has grown.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    logscale = -0.5 * x * x
    a_prev = np.zeros_like(x)
    a = np.full_like(x, np.pi ** -0.25)
    out[0] = a * np.exp(logscale)
    for k in range(1, kmax + 1):
        if k == 1:
            a_next = np.sqrt(2.0) * x * a
        else:
            a_next = np.sqrt(2.0 / k) * x * a - np.sqrt((k - 1) / k) * a_prev
        a_prev, a = a, a_next
        big = np.abs(a) > _RESCALE
        if big.any():
            a = np.where(big, a / _RESCALE, a)
            a_prev = np.where(big, a_prev / _RESCALE, a_prev)
            logscale = np.where(big, logscale + np.log(_RESCALE), logscale)
        out[k] = a * np.exp(logscale)
    return out


def hermite_derivative_table(kmax, x, table=None):
    """Derivatives h_k' for k <= kmax via h_k' = sqrt(k/2) h_{k-1} - sqrt((k+1)/2) h_{k+1}."""
    if table is None or table.shape[0] < kmax + 2:
        table = hermite_table(kmax + 1, x)
    k = np.arange(kmax + 1).reshape((-1,) + (1,) * np.ndim(x))
    d = -np.sqrt((k + 1) / 2.0) * table[1:kmax + 2]
    d[1:] += np.sqrt(k[1:] / 2.0) * table[:kmax]
    return d


def _christoffel_sum(n, x):
    # sum_{k<n} h_k(x)^2 without storing the table
    x = np.asarray(x, dtype=float)
    logscale = -0.5 * x * x
    a_prev = np.zeros_like(x)
    a = np.full_like(x, np.pi ** -0.25)
    # accumulate sum of a^2 in units of exp(2 * logscale_ref)
    total = a * a * np.exp(2 * logscale)
    for k in range(1, n):
        if k == 1:
            a_next = np.sqrt(2.0) * x * a
        else:
            a_next = np.sqrt(2.0 / k) * x * a - np.sqrt((k - 1) / k) * a_prev
        a_prev, a = a, a_next
        big = np.abs(a) > _RESCALE
        if big.any():
            a = np.where(big, a / _RESCALE, a)
            a_prev = np.where(big, a_prev / _RESCALE, a_prev)
            logscale = np.where(big, logscale + np.log(_RESCALE), logscale)
        total += (a * np.exp(logscale)) ** 2
    return total


@lru_cache(maxsize=64)
def gauss_hermite(n):
    """Nodes and unweighted weights of the n-point Gauss-Hermite rule.

    ``sum_i w_i f(x_i)`` equals ``int f`` whenever ``f = exp(-x^2) * poly``
    with polynomial degree below ``2n``.  Nodes are eigenvalues of the Jacobi
    matrix; weights use the Christoffel form ``1 / sum_k h_k(x_i)^2``, which
    stays finite where the classical weights overflow.
    """
    if n < 1:
        raise ValueError("need at least one node")
    off = np.sqrt(np.arange(1, n) / 2.0)
    x = eigh_tridiagonal(np.zeros(n), off, eigvals_only=True)
    x = 0.5 * (x - x[::-1])  # exact symmetry
    w = 1.0 / _christoffel_sum(n, x)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class BasisSpec:
    """Truncated Hermite basis: ``dim`` in {1, 2}, cutoff ``N``, quadrature ``oversample``."""

    dim: int
    cutoff: int
    oversample: float = 3.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"cutoff must be an integer >= 1, got {self.cutoff}")
        if self.oversample < 1:
            raise ValueError("oversample must be >= 1")

    @property
    def n_modes(self):
        N = self.cutoff
        return N + 1 if self.dim == 1 else (N + 1) * (N + 2) // 2

    @cached_property
    def modes(self):
        """Multi-indices, shape ``(n_modes, dim)``, in enumeration order."""
        return _modes(self.dim, self.cutoff)

    @cached_property
    def degrees(self):
        return self.modes.sum(axis=1)

    @cached_property
    def eigenvalues(self):
        """lambda_k^2 = 2|k| + d for every mode."""
        return (2 * self.degrees + self.dim).astype(float)

    @property
    def n_axis(self):
        """Default per-axis node count of the quadrature grid."""
        return int(math.ceil(self.oversample * (self.cutoff + 1) - 1e-9))

    def grid(self, n_axis=None):
        return QuadratureGrid(self.dim, n_axis or self.n_axis)

    def index(self, k):
        """Flat position of a mode (integer in 1D, pair in 2D)."""
        if self.dim == 1:
            k = int(np.ravel([k])[0])
            if not 0 <= k <= self.cutoff:
                raise IndexError(f"mode {k} outside cutoff {self.cutoff}")
            return k
        k1, k2 = (int(v) for v in k)
        n = k1 + k2
        if k1 < 0 or k2 < 0 or n > self.cutoff:
            raise IndexError(f"mode {(k1, k2)} outside cutoff {self.cutoff}")
        return n * (n + 1) // 2 + (n - k1)

    def with_cutoff(self, cutoff):
        return BasisSpec(self.dim, cutoff, self.oversample)


@lru_cache(maxsize=32)
def _modes(dim, N):
    if dim == 1:
        m = np.arange(N + 1).reshape(-1, 1)
    else:
        m = np.array([(n - j, j) for n in range(N + 1) for j in range(n + 1)])
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor Gauss-Hermite grid with ``n_axis`` nodes per axis and unweighted weights."""

    dim: int
    n_axis: int

    @property
    def x(self):
        return gauss_hermite(self.n_axis)[0]

    @property
    def w(self):
        return gauss_hermite(self.n_axis)[1]

    @property
    def size(self):
        return self.n_axis ** self.dim

    @cached_property
    def nodes(self):
        """Points, shape ``(size, dim)``."""
        if self.dim == 1:
            return self.x.reshape(-1, 1)
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def weights(self):
        if self.dim == 1:
            return np.array(self.w)
        return np.outer(self.w, self.w).ravel()

    @cached_property
    def r2(self):
        """|x|^2 at every node."""
        return (self.nodes ** 2).sum(axis=1)

    def integrate(self, values):
        values = np.asarray(values)
        if values.shape[0] != self.size:
            raise ShapeError(f"expected {self.size} grid values, got {values.shape[0]}")
        return self.weights @ values


@lru_cache(maxsize=32)
def axis_tables(kmax, n_axis):
    """(h, h') tables of shape ``(kmax + 1, n_axis)`` on the n-point Gauss-Hermite nodes."""
    x = gauss_hermite(n_axis)[0]
    full = hermite_table(kmax + 1, x)
    h = full[:kmax + 1].copy()
    dh = hermite_derivative_table(kmax, x, full)
    h.setflags(write=False)
    dh.setflags(write=False)
    return h, dh


class SpectralField:
    """Coefficient vector on a truncated Hermite basis.

    Parameters
    ----------
    basis : BasisSpec
    coeffs : array_like
        One (real or complex) coefficient per mode, in enumeration order.
    """

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.dtype.kind not in "fc":
            coeffs = coeffs.astype(float)
        if coeffs.shape != (basis.n_modes,):
            raise ShapeError(f"expected {basis.n_modes} coefficients, got shape {coeffs.shape}")
        self.basis = basis
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, basis, dtype=float):
        return cls(basis, np.zeros(basis.n_modes, dtype=dtype))

    @classmethod
    def mode(cls, basis, k):
        c = np.zeros(basis.n_modes)
        c[basis.index(k)] = 1.0
        return cls(basis, c)

    def _check(self, other):
        if other.basis != self.basis:
            raise BasisMismatch(f"{self.basis} vs {other.basis}")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.basis, -self.coeffs)

    def norm(self):
        """L2 norm (Parseval)."""
        return float(np.linalg.norm(self.coeffs))

    def inner(self, other):
        """Real inner product Re sum c_k conj(d_k)."""
        self._check(other)
        return float(np.real(np.vdot(other.coeffs, self.coeffs)))

    def to_dict(self):
        c = np.asarray(self.coeffs, dtype=complex)
        return {
            "dim": self.basis.dim,
            "cutoff": self.basis.cutoff,
            "enumeration": ENUMERATION,
            "coeffs": [[float(z.real), float(z.imag)] for z in c],
        }

    @classmethod
    def from_dict(cls, d, oversample=3.0):
        if d.get("enumeration") != ENUMERATION:
            raise ValueError(f"unknown enumeration {d.get('enumeration')!r}")
        basis = BasisSpec(int(d["dim"]), int(d["cutoff"]), oversample)
        c = np.array([complex(re, im) for re, im in d["coeffs"]])
        if not np.any(c.imag):
            c = c.real
        return cls(basis, c)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text, oversample=3.0):
        return cls.from_dict(json.loads(text), oversample)

    def __repr__(self):
        return f"SpectralField(dim={self.basis.dim}, cutoff={self.basis.cutoff})"


def hermite_eval(k, x, dim=1):
    """Value of the normalized Hermite function h_k at x (product of 1D factors in 2D)."""
    if dim == 1:
        k = int(np.ravel([k])[0])
        return float(hermite_table(k, np.float64(np.ravel([x])[0]))[k])
    k1, k2 = (int(v) for v in k)
    x1, x2 = (float(v) for v in x)
    return float(hermite_table(k1, x1)[k1] * hermite_table(k2, x2)[k2])


def eigenvalue(k, basis):
    """lambda_k^2 = 2|k| + d."""
    return float(2 * basis.degrees[basis.index(k)] + basis.dim)


def _coeff_array(f):
    # 2D coefficients as an (N+1, N+1) array, zero above the total degree
    N = f.basis.cutoff
    C = np.zeros((N + 1, N + 1), dtype=f.coeffs.dtype)
    m = f.basis.modes
    C[m[:, 0], m[:, 1]] = f.coeffs
    return C


def _check_alias(basis, grid):
    need = basis.n_axis
    if grid.dim != basis.dim:
        raise ShapeError(f"grid dim {grid.dim} vs basis dim {basis.dim}")
    if grid.n_axis < need:
        raise AliasError(
            f"grid has {grid.n_axis} nodes per axis, cutoff {basis.cutoff} "
            f"with oversample {basis.oversample} needs {need}")


def synthesize_coeffs(coeffs, basis, grid, table=None):
    """Grid values of sum_k c_k h_k (no alias check; internal fast path)."""
    h = axis_tables(basis.cutoff, grid.n_axis)[0] if table is None else table
    if basis.dim == 1:
        return coeffs @ h
    f = SpectralField(basis, coeffs)
    return (h.T @ _coeff_array(f) @ h).ravel()


def synthesize(f, grid):
    """Pointwise values sum_k c_k h_k(x_i) on the grid nodes."""
    _check_alias(f.basis, grid)
    return synthesize_coeffs(f.coeffs, f.basis, grid)


def project(values, basis, grid, table=None):
    """Coefficients sum_i w_i values_i h_k(x_i) as a raw array."""
    values = np.asarray(values)
    if values.shape != (grid.size,):
        raise ShapeError(f"expected {grid.size} values, got shape {values.shape}")
    h = axis_tables(basis.cutoff, grid.n_axis)[0] if table is None else table
    hw = h * grid.w
    if basis.dim == 1:
        return hw @ values
    V = values.reshape(grid.n_axis, grid.n_axis)
    C = hw @ V @ hw.T
    m = basis.modes
    return C[m[:, 0], m[:, 1]]


def analyze(values, grid, basis):
    """Galerkin projection of grid values onto the basis."""
    if grid.dim != basis.dim:
        raise ShapeError(f"grid dim {grid.dim} vs basis dim {basis.dim}")
    return SpectralField(basis, project(values, basis, grid))


def evaluate(f, points):
    """Values of f at arbitrary points, shape ``(npts,)`` (points ``(npts, dim)`` or 1D array)."""
    pts = np.asarray(points, dtype=float)
    N = f.basis.cutoff
    if f.basis.dim == 1:
        return f.coeffs @ hermite_table(N, pts.ravel())
    pts = pts.reshape(-1, 2)
    h1 = hermite_table(N, pts[:, 0])
    h2 = hermite_table(N, pts[:, 1])
    m = f.basis.modes
    return np.einsum("k,kp,kp->p", f.coeffs, h1[m[:, 0]], h2[m[:, 1]])


def gradient_values(f, grid):
    """Spectral gradient of f on the grid, shape ``(size, dim)``."""
    _check_alias(f.basis, grid)
    h, dh = axis_tables(f.basis.cutoff, grid.n_axis)
    if f.basis.dim == 1:
        return (f.coeffs @ dh).reshape(-1, 1)
    C = _coeff_array(f)
    gx = (dh.T @ C @ h).ravel()
    gy = (h.T @ C @ dh).ravel()
    return np.column_stack([gx, gy])


def neg_H_pow(f, s):
    """Apply (-H)^{s/2}: c_k -> (lambda_k^2)^{s/2} c_k."""
    return SpectralField(f.basis, f.coeffs * f.basis.eigenvalues ** (0.5 * s))


def sobolev_norm(f, s):
    """Hermite-Sobolev norm (sum_k (lambda_k^2)^s |c_k|^2)^{1/2}."""
    return float(np.sqrt(np.sum(f.basis.eigenvalues ** s * np.abs(f.coeffs) ** 2)))


def derivative_matrix(basis, axis=0):
    """Exact d/dx_axis on the basis, mapping into the cutoff N+1 basis.

    Returns a dense array of shape ``(n_modes(N+1), n_modes(N))``.
    """
    big = basis.with_cutoff(basis.cutoff + 1)
    D = np.zeros((big.n_modes, basis.n_modes))
    for j, k in enumerate(basis.modes):
        kk = int(k[axis])
        up = np.array(k)
        up[axis] += 1
        D[big.index(up if basis.dim == 2 else up[0]), j] -= math.sqrt((kk + 1) / 2.0)
        if kk > 0:
            dn = np.array(k)
            dn[axis] -= 1
            D[big.index(dn if basis.dim == 2 else dn[0]), j] += math.sqrt(kk / 2.0)
    return D


def kinetic_matrix(basis):
    """Gram matrix of int grad h_j . grad h_k (exact)."""
    K = np.zeros((basis.n_modes, basis.n_modes))
    for axis in range(basis.dim):
        D = derivative_matrix(basis, axis)
        K += D.T @ D
    return K


def weighted_gram(f, basis, grid, left=("h", "h"), right=("h", "h")):
    """Matrix G_jk = sum_i w_i f(x_i) A_j(x_i) B_k(x_i).

    ``left`` and ``right`` name the per-axis factor (``"h"`` or ``"d"`` for
    the derivative) of the basis functions A_j and B_k.  In 1D only the first
    entry is used.  2D uses the tensor structure of the grid.
    """
    h, dh = axis_tables(basis.cutoff, grid.n_axis)
    tab = {"h": h, "d": dh}
    fw = np.asarray(f, dtype=float) * grid.weights
    if basis.dim == 1:
        A = tab[left[0]]
        B = tab[right[0]]
        return (A * fw) @ B.T
    n = grid.n_axis
    N1 = basis.cutoff + 1
    F = fw.reshape(n, n)
    Ax, Ay = tab[left[0]], tab[left[1]]
    Bx, By = tab[right[0]], tab[right[1]]
    # T[a, c, y] = sum_x Ax[a, x] Bx[c, x] F[x, y]
    pair_x = (Ax[:, None, :] * Bx[None, :, :]).reshape(N1 * N1, n)
    T = pair_x @ F
    pair_y = (Ay[:, None, :] * By[None, :, :]).reshape(N1 * N1, n)
    G = (T @ pair_y.T).reshape(N1, N1, N1, N1)  # indices a, c, b, d
    m = basis.modes
    a, b = m[:, 0], m[:, 1]
    return G[a[:, None], a[None, :], b[:, None], b[None, :]]
