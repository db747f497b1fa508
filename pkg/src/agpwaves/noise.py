"""Spatial white noise in the Hermite basis and the enhanced noise (Y, Z).

Each coefficient <xi, h_n> is drawn from its own ``SeedSequence`` keyed by
``(seed, n)`` with ``n`` the flat mode index.  Since the enumeration only
appends modes when the cutoff grows, realizations at different cutoffs are
coupled: the low modes coincide.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ModeError
from .spectral import (BasisSpec, SpectralField, axis_tables, gradient_values,
                       hermite_derivative_table, hermite_table, synthesize)

WICK = "wick"
BARE = "bare"


def _keyed_normals(seed, start, stop):
    # two 64-bit words per mode from SeedSequence(seed, spawn_key=(n,)), then Box-Muller
    out = np.empty(stop - start)
    for i, n in enumerate(range(start, stop)):
        a, b = np.random.SeedSequence(seed, spawn_key=(n,)).generate_state(2, np.uint64)
        u1 = ((int(a) >> 11) + 1) * 2.0 ** -53   # (0, 1]
        u2 = (int(b) >> 11) * 2.0 ** -53          # [0, 1)
        out[i] = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return out


_NORMAL_CACHE = {}


def _normals(seed, count):
    cached = _NORMAL_CACHE.get(seed)
    if cached is None or cached.size < count:
        have = 0 if cached is None else cached.size
        extra = _keyed_normals(seed, have, count)
        cached = extra if cached is None else np.concatenate([cached, extra])
        cached.setflags(write=False)
        if len(_NORMAL_CACHE) > 256:
            _NORMAL_CACHE.clear()
        _NORMAL_CACHE[seed] = cached
    return cached[:count]


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """Standard normal coefficients ``xi[n] = <xi, h_n>`` of one white-noise sample."""

    seed: int
    basis: BasisSpec
    xi: np.ndarray

    @property
    def is_zero(self):
        return not np.any(self.xi)


def sample_noise(seed, basis):
    """Reproducible white-noise coefficients for ``(seed, basis)``."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return NoiseRealization(seed, basis, np.array(_normals(seed, basis.n_modes)))


def zero_noise(basis):
    """The deterministic realization xi = 0 (pure oscillator)."""
    return NoiseRealization(0, basis, np.zeros(basis.n_modes))


def compute_Y(r):
    """Y = (-H)^{-1} xi, coefficient n equal to xi_n / lambda_n^2."""
    return SpectralField(r.basis, r.xi / r.basis.eigenvalues)


def wick_expectation(basis, grid=None):
    """Pointwise E|grad Y_N|^2 = sum_{|k|<=N} |grad h_k|^2 / lambda_k^4 on a 2D grid."""
    if basis.dim != 2:
        raise DimensionError("Wick renormalization is only defined in 2D")
    grid = grid or basis.grid()
    h, dh = axis_tables(basis.cutoff, grid.n_axis)
    return _wick_tensor(basis.cutoff, h, dh, h, dh).ravel()


def wick_expectation_tensor(cutoff, x1, x2):
    """Wick expectation on the tensor grid x1 (rows) by x2 (columns)."""
    t1 = hermite_table(cutoff + 1, x1)
    t2 = hermite_table(cutoff + 1, x2)
    return _wick_tensor(cutoff, t1[:cutoff + 1], hermite_derivative_table(cutoff, x1, t1),
                        t2[:cutoff + 1], hermite_derivative_table(cutoff, x2, t2))


def _wick_tensor(N, h1, dh1, h2, dh2):
    k = np.arange(N + 1)
    tot = k[:, None] + k[None, :]
    W = np.where(tot <= N, 1.0 / (2.0 * tot + 2.0) ** 2, 0.0)
    return (dh1 ** 2).T @ W @ h2 ** 2 + (h1 ** 2).T @ W @ dh2 ** 2


@dataclass(frozen=True, eq=False)
class EnhancedNoise:
    """One realization of (Y, Z) with the grid data derived from it."""

    realization: NoiseRealization
    Y: SpectralField
    grid: object
    Y_vals: np.ndarray
    gradY_vals: np.ndarray
    rho_vals: np.ndarray
    rho2_vals: np.ndarray
    Z_vals: np.ndarray
    infY: float
    supY: float
    mode: str
    wick_vals: np.ndarray = field(default=None, repr=False)

    @property
    def basis(self):
        return self.realization.basis

    @property
    def seed(self):
        return self.realization.seed

    def rho_at(self, points):
        """rho = exp(Y) at arbitrary points."""
        from .spectral import evaluate
        return np.exp(evaluate(self.Y, points))

    def header(self):
        return {
            "seed": self.seed,
            "dim": self.basis.dim,
            "cutoff": self.basis.cutoff,
            "oversample": self.basis.oversample,
            "mode": self.mode,
            "infY": float(self.infY),
            "supY": float(self.supY),
        }

    def to_csv(self):
        """Grid columns x, [y,] Y, dY/dx1, [dY/dx2,] rho, Z with 17 significant digits."""
        d = self.basis.dim
        names = ["x", "y"][:d] + ["Y"] + ["dY_dx1", "dY_dx2"][:d] + ["rho", "Z"]
        cols = [self.grid.nodes[:, i] for i in range(d)] + [self.Y_vals]
        cols += [self.gradY_vals[:, i] for i in range(d)] + [self.rho_vals, self.Z_vals]
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(names)
        for row in zip(*cols):
            wr.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()

    def save(self, prefix):
        """Write ``prefix.json`` (header) and ``prefix.csv`` (grid columns)."""
        with open(f"{prefix}.json", "w") as fh:
            json.dump(self.header(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(f"{prefix}.csv", "w") as fh:
            fh.write(self.to_csv())


def enhance(r, mode=None, grid=None):
    """Build the enhanced noise for a realization.

    ``mode`` defaults to bare in 1D and Wick in 2D.  Wick mode subtracts the
    pointwise expectation of |grad Y_N|^2 and is refused in 1D.
    """
    basis = r.basis
    if mode is None:
        mode = BARE if basis.dim == 1 else WICK
    if mode not in (WICK, BARE):
        raise ModeError(f"unknown mode {mode!r}")
    if mode == WICK and basis.dim == 1:
        raise ModeError("Wick mode is not used in 1D, where Z = |Y'|^2")
    grid = grid or basis.grid()
    Y = compute_Y(r)
    Yv = synthesize(Y, grid)
    gY = gradient_values(Y, grid)
    Z = (gY ** 2).sum(axis=1)
    wick = None
    if basis.dim == 2:
        wick = wick_expectation(basis, grid)
        if mode == WICK:
            Z = Z - wick
    rho = np.exp(Yv)
    for a in (Yv, gY, rho, Z):
        a.setflags(write=False)
    return EnhancedNoise(r, Y, grid, Yv, gY, rho, rho * rho, Z,
                         float(Yv.min()), float(Yv.max()), mode, wick)


def noise_sobolev_series(basis, alpha, cutoff=None):
    """Partial sums S_N = sum_{|k|<=N} (lambda_k^2)^alpha for N = 0 .. cutoff.

    ``S_N`` is the expected squared W^{alpha,2} norm of the truncated noise;
    with ``alpha = -d/2 - s`` it converges iff ``s > d/2``.
    """
    N = basis.cutoff if cutoff is None else int(cutoff)
    j = np.arange(N + 1, dtype=float)
    mult = np.ones_like(j) if basis.dim == 1 else j + 1.0
    return np.cumsum(mult * (2.0 * j + basis.dim) ** alpha)
