"""Constrained minimizations: energy at fixed mass, action on the Nehari
manifold, Gagliardo-Nirenberg quotients, and the critical-mass bracket.

All iterations work on real coefficient vectors; ground states are real up
to a global phase, which is fixed at the end.
"""

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .anderson import assemble, eigen_lowest
from .errors import (ConvergenceError, CriticalityError, DivergenceError,
                     FrequencyError)
from .functionals import (ProblemParams, alias_bound, energy_c, gradient_c, mass_c,
                          nonlinear_c, nonlinear_jacobian_c, omega_from_field,
                          power_integral_c, quad_c, scaling_loss)
from .noise import BARE, enhance, wick_expectation_tensor, zero_noise
from .spectral import (SpectralField, hermite_derivative_table, hermite_table,
                       kinetic_matrix, project)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls shared by all solvers."""

    max_iters: int = 5000
    step: float = 1.0
    tol_residual: float = 1e-8
    tol_energy: float = 1e-12
    precondition: bool = True
    restarts: int = 0
    seed: int = 0
    newton_switch: float = 1e-4
    newton_iters: int = 40
    energy_floor: float = -1e8

    def __post_init__(self):
        for name in ("step", "tol_residual", "tol_energy", "newton_switch"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class GroundState:
    """Solver output for a standing wave."""

    field: SpectralField
    omega: float
    mass: float
    energy: float
    residual: float
    iterations: int
    converged: bool
    positive: bool
    residual_rel: float = math.nan
    omega_rayleigh: float = math.nan
    representation: str = "direct"
    lam: float = math.nan
    gamma: float = math.nan
    kind: str = "energy"
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        d = {k: v for k, v in asdict(self).items() if k not in ("field", "extras")}
        d["field"] = self.field.to_dict()
        d["extras"] = {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                       for k, v in self.extras.items()}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# helpers

def _real(c):
    return np.real(np.asarray(c, dtype=complex)) if np.iscomplexobj(c) else np.asarray(c, float)


def _phase_fix(F, c):
    """Rotate c so that the quadrature integral of u is real positive."""
    s = F.grid.weights @ F.u_values(c)
    if abs(s) < 1e-14:
        k = np.argmax(np.abs(c))
        s = c[k]
    ph = s / abs(s) if abs(s) > 0 else 1.0
    return c / ph


def positivity(F, c, rel_tol=1e-8):
    """(positive, min u / max |u|) for the synthesized field.

    A node counts as negative only below -(rel_tol max|u| + t(x)), where
    t(x) bounds the contribution of the upper half of the spectrum,
    sum_{|k| > N/2} |c_k| sup|h_k| (times rho in the transformed
    representation): values below that bound cannot be told apart from
    zero at this truncation.
    """
    u = np.real(F.u_values(c))
    top = np.abs(u).max()
    high = F.basis.degrees > F.basis.cutoff // 2
    tail = np.abs(c[high]).sum() * np.pi ** (-F.dim / 4)
    bound = tail * (F.noise.rho_vals if F.transformed else 1.0)
    ok = bool(np.all(u >= -(rel_tol * top + bound)))
    return ok, float(u.min() / top) if top > 0 else 0.0


def _preconditioner(F, cfg, extra=0.0):
    d = F.matrix.diagonal() + extra
    if not cfg.precondition:
        return np.ones_like(d)
    shift = max(0.0, 1.0 - d.min())
    return 1.0 / (d + shift)


def galerkin_residual(F, c, p, omega):
    """r = M c - lam n(c) + omega B c, absolute and relative 2-norms."""
    r = gradient_c(F, c, p) + omega * F.apply_gram(c)
    scale = np.linalg.norm(F.matrix @ c) + abs(omega) * np.linalg.norm(F.apply_gram(c))
    a = float(np.linalg.norm(r))
    return a, a / scale if scale > 0 else math.inf


def _random_init(F, rng):
    lam2 = F.basis.eigenvalues
    return rng.standard_normal(F.basis.n_modes) * np.exp(-0.5 * lam2)


# energy at fixed mass

def _normalize_mass(F, c, m):
    return c * math.sqrt(m / mass_c(F, c))


def _energy_newton(F, p, m, c, omega, cfg):
    """Bordered Newton on (M - lam Jn + omega B) dc + B c domega = -r, c^T B dc = -(M(c) - m)."""
    n = c.size
    for it in range(cfg.newton_iters):
        Bc = F.apply_gram(c)
        r = gradient_c(F, c, p) + omega * Bc
        g = mass_c(F, c) - m
        if np.linalg.norm(r) <= 0.05 * cfg.tol_residual and abs(g) <= 1e-14 * m:
            return c, omega, it
        Jm = F.matrix + omega * F.gram_matrix
        if p.lam != 0:
            Jm = Jm - p.lam * nonlinear_jacobian_c(F, c, p.gamma)
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = Jm
        K[:n, n] = Bc
        K[n, :n] = Bc
        sol = np.linalg.lstsq(K, -np.concatenate([r, [g]]), rcond=1e-14)[0]
        c = _normalize_mass(F, c + sol[:n], m)
        omega = omega + sol[n]
    return c, omega, cfg.newton_iters


def _energy_flow(F, p, m, c, cfg, history=None):
    """Normalized preconditioned gradient flow with Armijo backtracking."""
    P = _preconditioner(F, cfg)
    c = _normalize_mass(F, _real(c), m)
    E = energy_c(F, c, p)
    tau = cfg.step
    floor = cfg.energy_floor
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = gradient_c(F, c, p)
        Bc = F.apply_gram(c)
        omega = -float(c @ g) / float(c @ Bc)
        res = np.linalg.norm(g + omega * Bc)
        if res <= cfg.newton_switch or res <= cfg.tol_residual:
            return c, omega, E, it, True
        d = P * g
        PBc = P * Bc
        d = d - (Bc @ d) / (Bc @ PBc) * PBc
        slope = float(g @ d)
        accepted = False
        for _ in range(60):
            cn = _normalize_mass(F, c - tau * d, m)
            En = energy_c(F, cn, p)
            if En <= E - 1e-4 * tau * slope:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            return c, omega, E, it, False
        if history is not None:
            history.append(En)
        stall = E - En <= cfg.tol_energy * max(1.0, abs(E))
        c, E = cn, En
        tau = min(tau * 1.5, 1e3 * cfg.step)
        if E < floor:
            raise DivergenceError(f"energy {E:.3e} fell below floor {floor:.3e}")
        if stall and res < 1e-2:
            return c, omega, E, it, True
    return c, omega, E, it, False


def _finish(F, p, c, omega, iters, cfg, kind, extras=None):
    c = _phase_fix(F, c)
    c = _real(c) if np.allclose(np.imag(np.asarray(c, complex)), 0) else c
    res, rel = galerkin_residual(F, c, p, omega)
    om_formula = omega_from_field(F, c, p)
    pos, min_ratio = positivity(F, c)
    extras = dict(extras or {})
    extras["min_ratio"] = min_ratio
    gs = GroundState(
        field=SpectralField(F.basis, c), omega=float(om_formula), mass=mass_c(F, c),
        energy=energy_c(F, c, p), residual=res, iterations=iters,
        converged=bool(res <= cfg.tol_residual), positive=pos,
        residual_rel=rel, omega_rayleigh=float(omega), representation=F.representation,
        lam=float(p.lam), gamma=float(p.gamma), kind=kind, extras=extras)
    return gs


def energy_ground_state(F, p, m, cfg=SolverConfig(), init=None, history=None):
    """Minimize E at fixed mass m by normalized gradient flow plus Newton polish.

    The default initial datum is sqrt(2m) phi_0; ``cfg.restarts`` extra runs
    start from random smooth data and the lowest energy wins.  Raises
    DivergenceError for lam > 0 with gamma > 2/d (energy unbounded below),
    ConvergenceError if the residual target is not met.
    """
    if not m > 0:
        raise ValueError("mass must be positive")
    d = F.dim
    flags = {}
    if p.lam > 0 and p.gamma > 2.0 / d + 1e-12:
        raise DivergenceError("energy is unbounded below for lam > 0 and gamma > 2/d; use the action route")
    if p.lam > 0 and p.critical(d):
        flags["critical_exponent"] = True
    inits = []
    if init is not None:
        inits.append(_real(init.coeffs if isinstance(init, SpectralField) else init))
    else:
        inits.append(eigen_lowest(F, 1).phi0.coeffs)
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.restarts):
        inits.append(_random_init(F, rng))
    best = None
    for c0 in inits:
        hist = [] if history is not None else None
        c, omega, E, it, ok = _energy_flow(F, p, m, c0, cfg, hist)
        E_flow = E
        c, omega, nit = _energy_newton(F, p, m, c, omega, cfg)
        E_new = energy_c(F, c, p)
        if E_new > E_flow + 1e-9 * max(1.0, abs(E_flow)):
            flags["newton_left_basin"] = True
        gs = _finish(F, p, c, omega, it + nit, cfg, "energy", flags)
        gs.extras["flow_iterations"] = it
        gs.extras["newton_iterations"] = nit
        if history is not None:
            history.append(hist)
        if best is None or gs.energy < best.energy - 1e-12 * max(1, abs(best.energy)):
            best = gs
    if not best.converged:
        raise ConvergenceError(
            f"energy ground state residual {best.residual:.3e} > {cfg.tol_residual:.1e}",
            residual=best.residual, iterations=best.iterations)
    return best


def energy_ground_states(F, p, m, cfg, count):
    """Independent solves from ``count`` random initial data (for uniqueness checks)."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    for _ in range(count):
        c0 = _random_init(F, rng)
        c, omega, E, it, ok = _energy_flow(F, p, m, c0, cfg)
        c, omega, nit = _energy_newton(F, p, m, c, omega, cfg)
        gs = _finish(F, p, c, omega, it + nit, cfg, "energy")
        if not gs.converged:
            raise ConvergenceError(f"restart residual {gs.residual:.3e}", residual=gs.residual)
        out.append(gs)
    return out


# action on the Nehari manifold

def _normalize_Q(F, c, gamma, q=1.0):
    return c * (q / power_integral_c(F, c, gamma)) ** (1.0 / (2 * gamma + 2))


def p_on_q(F, omega, gamma, cfg=SolverConfig(), init=None):
    """Minimize P_omega on {Q = 1}: projected gradient flow and bordered Newton.

    Returns (c, J, iterations) with Q(c) = 1 and J = P_omega(c).
    """
    A = F.matrix + omega * F.gram_matrix
    Pd = _preconditioner(F, cfg, extra=omega * F.gram_matrix.diagonal())
    c0 = eigen_lowest(F, 1).phi0.coeffs if init is None else _real(init)
    c = _normalize_Q(F, c0, gamma)
    Pval = float(c @ A @ c)
    tau = cfg.step
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = 2 * A @ c
        nq = nonlinear_c(F, c, gamma)
        Lam = Pval  # multiplier with Q = 1
        res = np.linalg.norm(A @ c - Lam * nq)
        if res <= cfg.newton_switch:
            break
        d = Pd * g
        Pn = Pd * nq
        d = d - (nq @ d) / (nq @ Pn) * Pn
        slope = float(g @ d)
        for _ in range(60):
            cn = _normalize_Q(F, c - tau * d, gamma)
            Pn_val = float(cn @ A @ cn)
            if Pn_val <= Pval - 1e-4 * tau * slope:
                break
            tau *= 0.5
        else:
            break
        c, Pval = cn, Pn_val
        tau = min(tau * 1.5, 1e3 * cfg.step)
    # bordered Newton on (A c - Lam n(c) = 0, Q(c) = 1)
    n = c.size
    Lam = Pval
    for k in range(cfg.newton_iters):
        nq = nonlinear_c(F, c, gamma)
        r = A @ c - Lam * nq
        g = power_integral_c(F, c, gamma) - 1.0
        if np.linalg.norm(r) <= 0.01 * cfg.tol_residual and abs(g) < 1e-15:
            break
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = A - Lam * nonlinear_jacobian_c(F, c, gamma) / 1.0
        K[:n, n] = -nq
        K[n, :n] = (2 * gamma + 2) * nq
        sol = np.linalg.lstsq(K, -np.concatenate([r, [g]]), rcond=1e-14)[0]
        c = _normalize_Q(F, c + sol[:n], gamma)
        Lam = Lam + sol[n]
    J = float(c @ A @ c)
    return c, J, it + k


def action_ground_state(F, p, cfg=SolverConfig(), mu0=None):
    """Action ground state psi_omega = (J/lam)^{1/(2 gamma)} u*, u* minimizing P on {Q = 1}."""
    if not p.lam > 0:
        raise ValueError("the action route needs lam > 0")
    if p.omega is None:
        raise ValueError("omega is required")
    mu0 = eigen_lowest(F, 1).mu0 if mu0 is None else mu0
    if p.omega <= -mu0 + 1e-10:
        raise FrequencyError(f"omega = {p.omega} must exceed -mu0 = {-mu0}")
    c, J, iters = p_on_q(F, p.omega, p.gamma, cfg)
    q_pre = power_integral_c(F, c, p.gamma)
    t = (J / p.lam) ** (1.0 / (2 * p.gamma))
    psi = t * c
    P = quad_c(F, psi) + 2 * p.omega * mass_c(F, psi)
    Q = power_integral_c(F, psi, p.gamma)
    S = 0.5 * P - p.lam / (2 * p.gamma + 2) * Q
    S_pred = p.gamma / (2 * p.gamma + 2) * p.lam ** (-1.0 / p.gamma) * J ** ((p.gamma + 1) / p.gamma)
    extras = {"J_omega": J, "Q_prescale": q_pre, "action": S, "action_predicted": S_pred,
              "nehari_I": P - p.lam * Q, "P_omega": P, "mu0": mu0}
    return _finish(F, p, psi, p.omega, iters, cfg, "action", extras)


def nehari_ground_state(F, p, cfg=SolverConfig(), init=None):
    """Minimize S directly on the Nehari manifold (independent route).

    Gradient flow on S with projection c -> t_c c after each step, then Newton
    on the unconstrained equation (M + omega B) c - lam n(c) = 0.
    """
    if not p.lam > 0:
        raise ValueError("the Nehari route needs lam > 0")
    A = F.matrix + p.omega * F.gram_matrix
    Pd = _preconditioner(F, cfg, extra=p.omega * F.gram_matrix.diagonal())
    g_ = p.gamma

    def proj(c):
        P = float(c @ A @ c)
        return c * (P / (p.lam * power_integral_c(F, c, g_))) ** (1.0 / (2 * g_))

    def S(c):
        return 0.5 * float(c @ A @ c) - p.lam / (2 * g_ + 2) * power_integral_c(F, c, g_)

    c = proj(eigen_lowest(F, 1).phi0.coeffs if init is None else _real(init))
    Sv = S(c)
    tau = cfg.step
    it = 0
    for it in range(1, cfg.max_iters + 1):
        grad = A @ c - p.lam * nonlinear_c(F, c, g_)
        if np.linalg.norm(grad) <= cfg.newton_switch:
            break
        d = Pd * grad
        d = d - (c @ d) / (c @ (Pd * c)) * (Pd * c)  # keep the step off the radial direction
        slope = float(grad @ d)
        for _ in range(60):
            cn = proj(c - tau * d)
            Sn = S(cn)
            if Sn <= Sv - 1e-4 * tau * slope:
                break
            tau *= 0.5
        else:
            break
        c, Sv = cn, Sn
        tau = min(tau * 1.5, 1e3 * cfg.step)
    for k in range(cfg.newton_iters):
        r = A @ c - p.lam * nonlinear_c(F, c, g_)
        if np.linalg.norm(r) <= 0.01 * cfg.tol_residual:
            break
        Jm = A - p.lam * nonlinear_jacobian_c(F, c, g_)
        c = c + np.linalg.lstsq(Jm, -r, rcond=1e-14)[0]
    P = float(c @ A @ c)
    Q = power_integral_c(F, c, g_)
    extras = {"J_omega": P / Q ** (1.0 / (g_ + 1)), "action": S(c), "Q": Q, "nehari_I": P - p.lam * Q}
    return _finish(F, p, c, p.omega, it + k, cfg, "nehari", extras)


# Gagliardo-Nirenberg quotients

def _minimize_quotient(fg, c0, scale, cfg):
    """L-BFGS on a scale-invariant log-quotient with diagonal variable scaling."""
    def fun(y):
        f, g = fg(y * scale)
        return f, g * scale
    y0 = c0 / scale
    y0 = y0 / np.linalg.norm(y0)
    out = minimize(fun, y0, jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iters, "gtol": 1e-13, "ftol": 1e-16, "maxcor": 30})
    c = out.x * scale
    return c / np.linalg.norm(c), float(out.fun), out


def _free_form(dim, cutoff, oversample=3.0):
    from .spectral import BasisSpec
    basis = BasisSpec(dim, cutoff, oversample)
    return assemble(enhance(zero_noise(basis), BARE))


def gn_quotient(c, F0, K, gamma):
    """|grad v|^2 ||v||^{2 gamma} / ||v||^{2 gamma + 2}_{2 gamma + 2} on the noise-free basis."""
    A = float(c @ K @ c)
    B = float(c @ c)
    return A * B ** gamma / power_integral_c(F0, c, gamma)


@dataclass
class GNResult:
    J: float
    soliton: SpectralField
    lam: float
    pohozaev_rel: float
    critical_mass: float
    half_norm_sq: float
    quotient_minimizer: SpectralField
    soliton_residual: float


def gn_constant(dim, gamma, cfg=SolverConfig(), cutoff=None, lam=1.0, oversample=3.0):
    """Optimal Gagliardo-Nirenberg constant J and the soliton Q.

    The quotient is minimized on the noise-free truncated space (L-BFGS in
    oscillator-scaled variables).  The minimizer is then rescaled to the
    soliton normalization -Delta Q + Q = lam Q^{2 gamma + 1}, using the
    constants of a least-squares fit of K v against (v, v^{2 gamma + 1}),
    and Newton-polished on that Galerkin equation.  The Pohozaev residual
    |1/2 int |grad Q|^2 - lam/(2 gamma + 2) int Q^{2 gamma + 2}| / (1/2 int |grad Q|^2)
    is reported; it is not implied by the Galerkin equation.
    """
    if abs(gamma - 2.0 / dim) > 1e-12:
        raise CriticalityError(f"the quotient is dilation invariant only for gamma = 2/d = {2.0 / dim}")
    cutoff = cutoff or (128 if dim == 1 else 48)
    F0 = _free_form(dim, cutoff, oversample)
    K = kinetic_matrix(F0.basis)
    lam2 = F0.basis.eigenvalues

    def fg(c):
        A = float(c @ K @ c)
        B = float(c @ c)
        Q = power_integral_c(F0, c, gamma)
        n = nonlinear_c(F0, c, gamma)
        f = math.log(A) + gamma * math.log(B) - math.log(Q)
        g = 2 * (K @ c) / A + 2 * gamma * c / B - (2 * gamma + 2) * n / Q
        return f, g

    c0 = np.zeros(F0.basis.n_modes)
    c0[0] = 1.0
    c0 = c0 + 1e-3 * np.exp(-lam2)  # break the exact Gaussian symmetry of the start
    if dim == 2:
        c0 = np.where(F0.basis.modes % 2 == 0, 1, 0).prod(axis=1) * c0
    c, logJ, out = _minimize_quotient(fg, c0, 1.0 / np.sqrt(lam2), cfg)
    J = math.exp(logJ)
    # soliton normalization from the fitted equation K v = -c1 v + c2 n(v)
    n = nonlinear_c(F0, c, gamma)
    coef = np.linalg.lstsq(np.column_stack([-c, n]), K @ c, rcond=None)[0]
    c1, c2 = coef
    b = c1 ** -0.5
    a = (c2 / (lam * c1)) ** (1.0 / (2 * gamma))
    Qc = _dilate(F0, a * c, b)
    # Newton on K Q + Q - lam n(Q) = 0
    I = np.eye(Qc.size)
    for _ in range(cfg.newton_iters):
        r = K @ Qc + Qc - lam * nonlinear_c(F0, Qc, gamma)
        if np.linalg.norm(r) < 1e-13 * np.linalg.norm(Qc):
            break
        Jm = K + I - lam * nonlinear_jacobian_c(F0, Qc, gamma)
        Qc = Qc + np.linalg.lstsq(Jm, -r, rcond=1e-13)[0]
    r = K @ Qc + Qc - lam * nonlinear_c(F0, Qc, gamma)
    kin = 0.5 * float(Qc @ K @ Qc)
    pot = lam / (2 * gamma + 2) * power_integral_c(F0, Qc, gamma)
    mstar = 0.5 * ((gamma + 1) * J / lam) ** (1.0 / gamma)
    return GNResult(J, SpectralField(F0.basis, Qc), lam, abs(kin - pot) / kin, mstar,
                    0.5 * float(Qc @ Qc), SpectralField(F0.basis, c), float(np.linalg.norm(r)))


def _dilate(F0, c, b):
    """Coefficients of x -> v(b x) on the same basis."""
    loss, vals = scaling_loss(F0, c, b)
    if loss > 1e-8:
        raise ConvergenceError(f"soliton rescaling by {b:.3g} is not resolved (loss {loss:.1e})")
    return project(vals, F0.basis, F0.grid)


def noisy_gn_quotient(F, c):
    """|u|^2_{D12} ||u||^2 / ||u||_4^4 in the transformed representation."""
    return float(c @ F.seminorm @ c) * float(c @ F.gram_matrix @ c) / power_integral_c(F, c, 1.0)


def noisy_gn_constant(F, cfg=SolverConfig(), init=None):
    """Noisy Gagliardo-Nirenberg constant J_Xi (2D, gamma = 1) on the truncated space."""
    if F.dim != 2:
        raise CriticalityError("the noisy quotient is defined for d = 2, gamma = 1")
    S = F.seminorm
    B = F.gram_matrix

    def fg(c):
        a = float(c @ S @ c)
        b = float(c @ B @ c)
        q = power_integral_c(F, c, 1.0)
        n = nonlinear_c(F, c, 1.0)
        return (math.log(a) + math.log(b) - math.log(q),
                2 * (S @ c) / a + 2 * (B @ c) / b - 4 * n / q)

    c0 = eigen_lowest(F, 1).phi0.coeffs if init is None else _real(init)
    c, logJ, out = _minimize_quotient(fg, c0, 1.0 / np.sqrt(S.diagonal()), cfg)
    return math.exp(logJ), SpectralField(F.basis, c)


# critical mass

@dataclass
class CriticalMassResult:
    lower: float
    upper: float
    mstar: float
    alpha_max: float
    alphas: list
    threshold_hit: bool
    details: dict = field(default_factory=dict)


def _panel_rule(half, width, order):
    # composite Gauss-Legendre on [-half, half] with panels no wider than ``width``
    npan = max(1, int(math.ceil(2 * half / width)))
    edges = np.linspace(-half, half, npan + 1)
    gx, gw = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    hw = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + hw * gx).ravel(), (hw * gw).ravel()


def _effective_degree(f, tol=1e-13):
    a = np.abs(f.coeffs)
    big = np.nonzero(a > tol * a.max())[0]
    return int(f.basis.degrees[big].max())


def _tensor_values(f, x, deriv=False):
    """Values (and gradient) of a field on the tensor grid x by x (2D) or at x (1D)."""
    N = f.basis.cutoff
    t = hermite_table(N + 1, x)
    h = t[:N + 1]
    dh = hermite_derivative_table(N, x, t)
    if f.basis.dim == 1:
        return (f.coeffs @ h, [f.coeffs @ dh]) if deriv else f.coeffs @ h
    m = f.basis.modes
    C = np.zeros((N + 1, N + 1))
    C[m[:, 0], m[:, 1]] = np.real(f.coeffs)
    val = h.T @ C @ h
    if not deriv:
        return val
    return val, [dh.T @ C @ h, h.T @ C @ dh]


def scaling_probe(noise, soliton, alphas, gamma, lam, order=12):
    """Mass-normalized parts of E(u_alpha), u_alpha = alpha^{d/2} rho(x) Q(alpha x).

    Returns arrays (k, p) with E(u) = m k - m^{gamma+1} p at mass m.  The
    energy is evaluated in the transformed form
    1/2 int (|grad v|^2 + (|x|^2 (1 - Y) - Z) v^2) rho^2 - lam/(2g+2) int rho^{2g+2} v^{2g+2}
    by composite Gauss-Legendre quadrature on a box that shrinks like 1/alpha,
    so u_alpha is never truncated to the basis; only the noise is.
    """
    d = noise.basis.dim
    N = noise.basis.cutoff
    kq = _effective_degree(soliton)
    reach = math.sqrt(2 * soliton.basis.cutoff + d) + 6.0
    ks, ps = [], []
    for al in alphas:
        half = reach / al
        width = min(math.pi / math.sqrt(2 * N + d), math.pi / (al * math.sqrt(2 * kq + d)))
        x, w = _panel_rule(half, width, order)
        Y, dY = _tensor_values(noise.Y, x, deriv=True)
        Q, dQ = _tensor_values(soliton, al * x, deriv=True)
        if d == 1:
            r2, W = x * x, w
        else:
            r2 = x[:, None] ** 2 + x[None, :] ** 2
            W = np.outer(w, w)
        Z = sum(g * g for g in dY)
        if d == 2 and noise.mode == "wick":
            Z = Z - wick_expectation_tensor(N, x, x)
        rho2 = np.exp(2 * Y)
        v = al ** (d / 2) * Q
        grad2 = al ** (d + 2) * sum(g * g for g in dQ)
        quad = np.sum(W * (grad2 + (r2 * (1 - Y) - Z) * v * v) * rho2)
        m = 0.5 * np.sum(W * rho2 * v * v)
        q = np.sum(W * rho2 ** (gamma + 1) * np.abs(v) ** (2 * gamma + 2))
        ks.append(0.5 * quad / m)
        ps.append(lam / (2 * gamma + 2) * q / m ** (gamma + 1))
    return np.array(ks), np.array(ps)


def critical_mass(F, p, cfg=SolverConfig(), gn=None, resolution=0.02, alpha_top=256.0,
                  slope_threshold=1e-3, noisy=None):
    """Bracket [lower, upper] for the critical mass at gamma = 2/d.

    lower: m*_lam = 1/2 ((gamma+1) J / lam)^{1/gamma} in 1D, J_Xi / lam in 2D.
    upper: smallest mass on the grid lower * (1 + resolution)^j at which
    the scaling probe u_alpha = alpha^{d/2} rho v(alpha x), v the soliton,
    rescaled to that mass, has a leading alpha^2 coefficient of E(u_alpha)
    below ``-slope_threshold`` times the kinetic coefficient.  The coefficient
    comes from a least-squares fit of E over (alpha^2, 1, alpha^{-2}) on the
    top of the alpha ladder 2^{j/2} <= alpha_top.
    """
    d = F.dim
    if not p.critical(d):
        raise CriticalityError(f"gamma = {p.gamma} is not 2/d = {2.0 / d}")
    if not p.lam > 0:
        raise ValueError("critical mass needs lam > 0")
    if gn is None:
        gn = gn_constant(d, p.gamma, cfg, cutoff=F.basis.cutoff, lam=p.lam,
                         oversample=F.basis.oversample)
    mstar = 0.5 * ((p.gamma + 1) * gn.J / p.lam) ** (1.0 / p.gamma)
    details = {"J": gn.J}
    if d == 1:
        lower = mstar
    else:
        JX = noisy_gn_constant(F, cfg)[0] if noisy is None else noisy
        details["J_Xi"] = JX
        lower = JX / p.lam
    alphas = 2.0 ** (np.arange(0 if d == 1 else 2, 2 * math.log2(alpha_top) + 1) / 2)
    ks, ps = scaling_probe(F.noise, gn.soliton, alphas, p.gamma, p.lam)
    fit = alphas >= alpha_top / 4
    X = np.column_stack([alphas[fit] ** 2, np.ones(fit.sum()), alphas[fit] ** -2.0])
    k2 = np.linalg.lstsq(X, ks[fit], rcond=None)[0][0]
    p2 = np.linalg.lstsq(X, ps[fit], rcond=None)[0][0]

    def blows(m):
        return k2 - m ** p.gamma * p2 < -slope_threshold * abs(k2)

    ratio = 1.0 + resolution
    j_lo, j_hi = int(math.floor(math.log(0.25) / math.log(ratio))), 0
    while not blows(lower * ratio ** j_hi):
        j_hi += 8
        if j_hi > 400:
            break
    while j_hi - j_lo > 1:
        mid = (j_lo + j_hi) // 2
        if blows(lower * ratio ** mid):
            j_hi = mid
        else:
            j_lo = mid
    upper = lower * ratio ** j_hi
    E = upper * ks - upper ** (p.gamma + 1) * ps
    hit = bool(np.any(E < -1e3 * abs(E[0])))
    sb = gn.soliton.basis
    basis_bound = alias_bound(gn.soliton, _free_form(d, sb.cutoff, sb.oversample))
    details.update({"k2": float(k2), "p2": float(p2),
                    "extrapolated_mass": float((k2 / p2) ** (1 / p.gamma)),
                    "energies_at_upper": E.tolist(), "basis_alias_bound": basis_bound})
    return CriticalMassResult(float(lower), float(upper), float(mstar), float(alphas[-1]),
                              alphas.tolist(), hit, details)


# small-mass sweep

@dataclass
class SweepResult:
    masses: np.ndarray
    omegas: np.ndarray
    errors: np.ndarray
    exponent: float
    prefactor: float
    predicted_prefactor: float
    mu0: float
    states: list


def small_mass_sweep(F, p, masses, cfg=SolverConfig()):
    """Energy ground states along decreasing masses; fit |omega + mu0| = C m^k."""
    masses = np.asarray(masses, dtype=float)
    if np.any(np.diff(masses) >= 0):
        raise ValueError("masses must be strictly decreasing")
    eig = eigen_lowest(F, 1)
    mu0 = eig.mu0
    phi0 = eig.phi0.coeffs
    B = F.gram_matrix
    oms, errs, states = [], [], []
    init = None
    for m in masses:
        gs = energy_ground_state(F, p, float(m), cfg, init=init)
        psi = _real(gs.field.coeffs) / math.sqrt(2 * m)
        diff = psi - phi0
        errs.append(math.sqrt(max(0.0, float(diff @ B @ diff))))
        oms.append(gs.omega)
        states.append(gs)
        init = gs.field
    oms = np.array(oms)
    slope, icpt = np.polyfit(np.log(masses), np.log(np.abs(oms + mu0)), 1)
    pred = p.lam * 2 ** p.gamma * power_integral_c(F, phi0, p.gamma)
    return SweepResult(masses, oms, np.array(errs), float(slope), float(math.copysign(math.exp(icpt), p.lam)),
                       float(pred), mu0, states)
