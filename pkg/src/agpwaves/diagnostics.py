"""Post-hoc checks of computed standing waves.

Every diagnostic returns a small record with a ``to_dict`` method so that
the command-line report can serialize it directly.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientNodes
from .solvers import galerkin_residual
from .spectral import SpectralField, project, sobolev_norm


@dataclass(frozen=True)
class Residual:
    absolute: float
    relative: float

    def to_dict(self):
        return asdict(self)


def residual(gs, F, p):
    """Galerkin residual || M c - lam n(c) + omega B c || of a ground state."""
    F.check(gs.field)
    a, r = galerkin_residual(F, gs.field.coeffs, p, gs.omega)
    return Residual(a, r)


@dataclass(frozen=True)
class LocalizationFit:
    """log|v| ~ intercept - slope |x|^2 over the admissible nodes."""

    slope: float
    intercept: float
    r2: float
    nodes_used: int

    def to_dict(self):
        return asdict(self)


def localization_fit(gs, F, floor=1e-12, weights=None, min_nodes=10, truncation_floor=True):
    """Least-squares fit of log|v(x_i)| against |x_i|^2.

    v = u / rho is the transformed profile.  A node is admissible when
    |v| > floor * max|v| and, with ``truncation_floor``, when |u| exceeds
    sup |u_high|, u_high being the synthesized upper half of the spectrum
    (|k| > N/2): below that level the grid values are truncation plateau,
    not decay.  ``weights`` (one per grid node) default to uniform.
    """
    F.check(gs.field)
    c = gs.field.coeffs
    v = np.abs(F.v_values(c))
    top = v.max() if v.size else 0.0
    keep = v > floor * top if top > 0 else np.zeros(v.shape, bool)
    if truncation_floor and top > 0:
        high = np.where(F.basis.degrees > F.basis.cutoff // 2, c, 0)
        keep &= np.abs(F.u_values(c)) > np.abs(F.u_values(high)).max()
    n = int(keep.sum())
    if n < min_nodes:
        raise InsufficientNodes(f"{n} admissible nodes, need {min_nodes}")
    r2x = F.grid.r2[keep]
    y = np.log(v[keep])
    w = np.ones(n) if weights is None else np.asarray(weights, float)[keep]
    A = np.column_stack([np.ones(n), -r2x])
    sw = np.sqrt(w)
    (a, slope), *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    fit = A @ np.array([a, slope])
    ybar = np.average(y, weights=w)
    ss_tot = float(w @ (y - ybar) ** 2)
    ss_res = float(w @ (y - fit) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LocalizationFit(float(slope), float(a), float(r2), n)


@dataclass(frozen=True)
class SignVerdict:
    """Frequency sign conditions for a positive standing wave."""

    lam: float
    omega: float
    mu0: float
    positive: bool
    focusing_ok: bool
    defocusing_ok: bool
    linear_ok: bool
    applicable: str

    @property
    def passed(self):
        return {"focusing": self.focusing_ok, "defocusing": self.defocusing_ok,
                "linear": self.linear_ok}[self.applicable]

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def sign_condition_check(gs, p, mu0, tol=1e-6):
    """Verdicts (lam > 0 => omega > -mu0), (lam < 0 => omega < -mu0), (lam = 0 => omega = -mu0).

    Each implication is vacuously true when its hypothesis fails;
    ``applicable`` names the one whose hypothesis holds.
    """
    lam, om = float(p.lam), float(gs.omega)
    shift = om + mu0
    kind = "focusing" if lam > 0 else "defocusing" if lam < 0 else "linear"
    return SignVerdict(lam, om, float(mu0), bool(gs.positive),
                       focusing_ok=bool(lam <= 0 or shift > 0),
                       defocusing_ok=bool(lam >= 0 or shift < 0),
                       linear_ok=bool(lam != 0 or abs(shift) <= tol),
                       applicable=kind)


def physical_field(gs, F=None):
    """Hermite coefficients of the physical field u (re-analyzed from rho v if transformed)."""
    if F is None or not F.transformed:
        return gs.field
    F.check(gs.field)
    return SpectralField(F.basis, project(F.u_values(gs.field.coeffs), F.basis, F.grid))


def sobolev_growth(gs, s_grid, F=None):
    """Rows (s, W^{s,2} norm of u) with the Hermite-Sobolev norm."""
    u = physical_field(gs, F)
    return [(float(s), sobolev_norm(u, float(s))) for s in s_grid]


def sobolev_ratio(states, s):
    """norm(state_k) / norm(state_0) at regularity s for a list of states at growing cutoffs."""
    base = sobolev_norm(states[0], s)
    return [sobolev_norm(u, s) / base if base > 0 else math.inf for u in states]
