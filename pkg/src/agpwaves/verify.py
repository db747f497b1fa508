"""The acceptance matrix: twelve groups of numerical checks.

Each ``criterion_k(profile)`` returns a list of :class:`Check` records with
the measured value, the tolerance and a one-line statement of the property
being verified.  ``run_suite`` drives all of them; the command-line
``verify`` subcommand and the acceptance tests share this code.
"""

import itertools
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .anderson import assemble, eigen_lowest, form_value
from .diagnostics import localization_fit, sign_condition_check
from .functionals import (ProblemParams, P_omega, action, energy, energy_c, gradient_c,
                          nehari_I, t_nehari)
from .noise import BARE, enhance, noise_sobolev_series, sample_noise, zero_noise
from .solvers import (SolverConfig, _random_init, action_ground_state, critical_mass,
                      energy_ground_state, energy_ground_states, gn_constant,
                      nehari_ground_state, small_mass_sweep)
from .spectral import BasisSpec, SpectralField


@dataclass
class Check:
    criterion: int
    name: str
    passed: bool
    value: float
    tolerance: float
    statement: str
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] criterion {self.criterion:2d} {self.name}: value={self.value:.6g} "
                f"tol={self.tolerance:.3g} ({self.seconds:.1f}s)")

    def to_dict(self):
        d = asdict(self)
        d["value"] = _num(d["value"])
        d["tolerance"] = _num(d["tolerance"])
        return d


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


@dataclass(frozen=True)
class Profile:
    """Sizes and sample counts of a suite run."""

    name: str = "desk"
    cutoff_1d: int = 128
    cutoff_2d: int = 48
    seeds_linear: int = 20
    seeds_sign: int = 10
    seeds_critical: int = 5
    nehari_fields: int = 100
    trials: int = 50
    seed: int = 0
    gn_cutoff_1d: int = 128
    gn_cutoff_2d: int = 48


DESK = Profile()
QUICK = Profile("quick", 64, 24, 5, 3, 2, 30, 20, gn_cutoff_1d=96, gn_cutoff_2d=40)


def _check(criterion, name, value, tol, ok, statement, **detail):
    return Check(criterion, name, bool(ok), float(value), float(tol), statement, detail=detail)


def _form(dim, cutoff, seed=None):
    basis = BasisSpec(dim, cutoff)
    if seed is None:
        return assemble(enhance(zero_noise(basis), BARE))
    return assemble(enhance(sample_noise(seed, basis)))


def _l2(F, a, b):
    d = a - b
    return math.sqrt(max(0.0, float(np.real(np.vdot(d, F.apply_gram(d))))))


# 1. deterministic anchors

def criterion_1(pr):
    out = []
    F = _form(1, pr.cutoff_1d)
    eig = eigen_lowest(F, 2)
    h0 = SpectralField.mode(F.basis, 0).coeffs
    out.append(_check(1, "1d_mu0", abs(eig.values[0] - 1), 1e-8, abs(eig.values[0] - 1) <= 1e-8,
                      "oscillator ground level equals 1 in 1D"))
    out.append(_check(1, "1d_mu1", abs(eig.values[1] - 3), 1e-8, abs(eig.values[1] - 3) <= 1e-8,
                      "first excited oscillator level equals 3 in 1D"))
    err = _l2(F, eig.phi0.coeffs, h0)
    out.append(_check(1, "1d_phi0", err, 1e-8, err <= 1e-8, "ground state equals h_0 in L2"))
    F2 = _form(2, pr.cutoff_2d)
    e2 = eigen_lowest(F2, 3)
    dev = abs(e2.values[0] - 2)
    out.append(_check(1, "2d_mu0", dev, 1e-6, dev <= 1e-6, "oscillator ground level equals 2 in 2D"))
    dev = float(np.max(np.abs(e2.values[1:3] - 4)))
    pair = [1, 2] in e2.clusters
    out.append(_check(1, "2d_degenerate_pair", dev, 1e-6, dev <= 1e-6 and pair,
                      "levels mu_1 = mu_2 = 4 form one degenerate cluster", clusters=e2.clusters))
    return out


# 2. linear ground states

def criterion_2(pr, m=1.0):
    p = ProblemParams(0.0, 1.0)
    field_err, om_err = [], []
    for s in range(pr.seed, pr.seed + pr.seeds_linear):
        F = _form(1, pr.cutoff_1d, s)
        eig = eigen_lowest(F, 1)
        init = _random_init(F, np.random.default_rng(s))
        gs = energy_ground_state(F, p, m, init=init)
        c = gs.field.coeffs
        target = math.sqrt(2 * m) * eig.phi0.coeffs
        # up to phase: align the global phase before measuring
        ph = np.vdot(target, F.apply_gram(c))
        c = c * (abs(ph) / ph if ph != 0 else 1.0)
        field_err.append(_l2(F, c, target))
        om_err.append(abs(gs.omega + eig.mu0))
    fe, oe = max(field_err), max(om_err)
    return [
        _check(2, "linear_state_is_phi0", fe, 1e-6, fe <= 1e-6,
               "at lam = 0 the energy minimizer is sqrt(2m) phi_0 up to phase (worst seed)"),
        _check(2, "linear_frequency", oe, 1e-6, oe <= 1e-6,
               "at lam = 0 the frequency equals -mu_0 (worst seed)"),
    ]


# 3. frequency signs

def criterion_3(pr, m=0.5):
    good, total, unconverged = 0, 0, 0
    for s in range(pr.seed, pr.seed + pr.seeds_sign):
        F = _form(1, pr.cutoff_1d, s)
        mu0 = eigen_lowest(F, 1).mu0
        for lam in (1.0, -1.0):
            p = ProblemParams(lam, 1.0)
            gs = energy_ground_state(F, p, m)
            total += 1
            unconverged += not gs.converged
            v = sign_condition_check(gs, p, mu0)
            good += bool(v.passed and gs.converged and np.sign(gs.omega + mu0) == np.sign(lam))
    return [_check(3, "frequency_sign", good / total, 1.0, good == total,
                   "sign(omega + mu_0) = sign(lam) for converged states",
                   cases=total, good=good, unconverged=unconverged)]


# 4. small-mass law

def criterion_4(pr, seed=7):
    F = _form(1, pr.cutoff_1d, seed)
    p = ProblemParams(1.0, 1.0)
    r = small_mass_sweep(F, p, np.geomspace(1e-1, 1e-3, 8))
    pref = abs(r.prefactor / r.predicted_prefactor - 1)
    mono = bool(np.all(np.diff(r.errors) < 0))
    return [
        _check(4, "small_mass_exponent", abs(r.exponent - p.gamma), 0.1, abs(r.exponent - p.gamma) <= 0.1,
               "|omega_m + mu_0| ~ C m^gamma as m -> 0", exponent=r.exponent),
        _check(4, "small_mass_prefactor", pref, 0.1, pref <= 0.1,
               "C = lam 2^gamma int phi_0^(2 gamma + 2)", prefactor=r.prefactor,
               predicted=r.predicted_prefactor),
        _check(4, "small_mass_profile", r.errors[-1], 1e-3, r.errors[-1] <= 1e-3 and mono,
               "(2m)^(-1/2) phi_m -> phi_0 in L2, monotonically along the sweep",
               errors=r.errors.tolist()),
    ]


# 5. Nehari scaling

def _golden_t(F, u, p):
    # maximize t -> S(t u) over log t in [log 1e-3, log 1e3]
    c = u.coeffs

    def neg(s):
        return -action(SpectralField(u.basis, math.exp(s) * c), F, p)
    grid = np.linspace(math.log(1e-3), math.log(1e3), 61)
    i = int(np.clip(np.argmin([neg(s) for s in grid]), 1, grid.size - 2))
    res = minimize_scalar(neg, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                          tol=1e-12)
    return math.exp(res.x)


def criterion_5(pr, seed=3):
    F = _form(1, pr.cutoff_1d, seed)
    mu0 = eigen_lowest(F, 1).mu0
    p = ProblemParams(1.0, 1.0, -mu0 + 1.0)
    rng = np.random.default_rng(seed)
    lam2 = F.basis.eigenvalues
    worst_t, worst_i = 0.0, 0.0
    for _ in range(pr.nehari_fields):
        u = SpectralField(F.basis, rng.standard_normal(lam2.size) * np.exp(-0.25 * lam2))
        t = t_nehari(u, F, p)
        worst_t = max(worst_t, abs(t / _golden_t(F, u, p) - 1))
        ut = u * t
        worst_i = max(worst_i, abs(nehari_I(ut, F, p)) / P_omega(ut, F, p.omega))
    return [
        _check(5, "nehari_closed_form", worst_t, 1e-6, worst_t <= 1e-6,
               "t_u is the unique maximizer of t -> S(t u)"),
        _check(5, "nehari_projection", worst_i, 1e-8, worst_i <= 1e-8,
               "I(t_u u) = 0 relative to P_omega"),
    ]


# 6. equivalence of the action routes

def criterion_6(pr, seeds=(1, 2), shift=1.0):
    dj, ds, dn = 0.0, 0.0, 0.0
    for s in seeds:
        F = _form(1, pr.cutoff_1d, s)
        mu0 = eigen_lowest(F, 1).mu0
        p = ProblemParams(1.0, 1.0, -mu0 + shift)
        a = action_ground_state(F, p, mu0=mu0)
        b = nehari_ground_state(F, p)
        Ja, Jb = a.extras["J_omega"], b.extras["J_omega"]
        dj = max(dj, abs(Ja / Jb - 1))
        ds = max(ds, abs(a.extras["action"] / a.extras["action_predicted"] - 1))
        dn = max(dn, abs(a.extras["action"] / b.extras["action"] - 1))
    return [
        _check(6, "J_omega_routes", dj, 1e-8, dj <= 1e-8,
               "min of P_omega on Q = 1 equals J_omega at the Nehari minimizer"),
        _check(6, "action_from_J", ds, 1e-8, ds <= 1e-8,
               "S(psi) = gamma/(2 gamma + 2) lam^(-1/gamma) J^((gamma+1)/gamma)"),
        _check(6, "action_routes", dn, 1e-8, dn <= 1e-8,
               "rescaled P-on-Q minimizer and Nehari minimizer have equal action"),
    ]


# 7. Pohozaev and the critical mass of the soliton

def criterion_7(pr):
    g1 = gn_constant(1, 2.0, cutoff=pr.gn_cutoff_1d)
    g2 = gn_constant(2, 1.0, cutoff=pr.gn_cutoff_2d)
    dm = abs(g2.critical_mass / g2.half_norm_sq - 1)
    return [
        _check(7, "pohozaev_1d", g1.pohozaev_rel, 1e-4, g1.pohozaev_rel <= 1e-4,
               "1/2 int |Q'|^2 = lam/(2 gamma + 2) int Q^(2 gamma + 2), d = 1, gamma = 2", J=g1.J),
        _check(7, "pohozaev_2d", g2.pohozaev_rel, 1e-4, g2.pohozaev_rel <= 1e-4,
               "1/2 int |grad Q|^2 = lam/4 int Q^4, d = 2, gamma = 1", J=g2.J),
        _check(7, "townes_mass", dm, 1e-2, dm <= 1e-2,
               "m* = J / lam agrees with 1/2 ||Q||^2 in 2D", J=g2.J, half_norm_sq=g2.half_norm_sq),
    ]


# 8. critical-mass bracket

def criterion_8(pr):
    out = []
    gn2 = gn_constant(2, 1.0, cutoff=pr.gn_cutoff_2d)
    p2 = ProblemParams(1.0, 1.0)
    worst_up, worst_lo, rows = -math.inf, -math.inf, []
    for s in range(pr.seed + 1, pr.seed + 1 + pr.seeds_critical):
        F = _form(2, pr.cutoff_2d, s)
        r = critical_mass(F, p2, gn=gn2)
        floor = math.exp(4 * (F.noise.infY - F.noise.supY)) * r.mstar * 0.95
        worst_up = max(worst_up, floor / r.upper)
        worst_lo = max(worst_lo, r.lower / (r.mstar * 1.05))
        rows.append({"seed": s, "lower": r.lower, "upper": r.upper, "mstar": r.mstar})
    out.append(_check(8, "2d_upper_bound", worst_up, 1.0, worst_up <= 1.0,
                      "upper >= 0.95 exp(4 (inf Y - sup Y)) m* (ratio, worst seed)", rows=rows))
    out.append(_check(8, "2d_lower_bound", worst_lo, 1.0, worst_lo <= 1.0,
                      "lower = J_Xi / lam <= 1.05 m* (ratio, worst seed)"))
    gn1 = gn_constant(1, 2.0, cutoff=pr.gn_cutoff_1d)
    p1 = ProblemParams(1.0, 2.0)
    width, inside, rows = 0.0, True, []
    for s in range(pr.seed + 1, pr.seed + 1 + pr.seeds_critical):
        r = critical_mass(_form(1, pr.cutoff_1d, s), p1, gn=gn1)
        width = max(width, (r.upper - r.lower) / r.mstar)
        inside &= r.lower <= r.mstar * (1 + 1e-12) <= r.upper * (1 + 1e-12)
        rows.append({"seed": s, "lower": r.lower, "upper": r.upper, "mstar": r.mstar})
    out.append(_check(8, "1d_bracket", width, 0.05, width <= 0.05 and inside,
                      "1D bracket contains m* and is at most 5% wide", rows=rows))
    return out


# 9. defocusing uniqueness

def criterion_9(pr, seed=4, restarts=5, m=1.0):
    F = _form(1, pr.cutoff_1d, seed)
    p = ProblemParams(-1.0, 1.0)
    states = energy_ground_states(F, p, m, SolverConfig(seed=seed), restarts)
    mods = [np.abs(F.u_values(g.field.coeffs)) for g in states]
    w = F.grid.weights
    dist = max(math.sqrt(float(w @ (a - b) ** 2)) for a, b in itertools.combinations(mods, 2))
    return [_check(9, "defocusing_uniqueness", dist, 1e-6, dist <= 1e-6,
                   "energy minimizers from random starts share one modulus (lam < 0)")]


# 10. gradient, symmetry, diamagnetic inequality

def criterion_10(pr, seed=5):
    out = []
    rng = np.random.default_rng(seed)
    p = ProblemParams(1.0, 1.0)
    forms = [_form(1, pr.cutoff_1d, seed), _form(2, pr.cutoff_2d // 2, seed)]
    grad = sym = 0.0
    dia = -math.inf
    for F in forms:
        lam2 = F.basis.eigenvalues
        n = lam2.size
        for _ in range(pr.trials):
            c = rng.standard_normal(n) * np.exp(-0.3 * lam2)
            w = rng.standard_normal(n) * np.exp(-0.3 * lam2)
            h = 1e-5
            fd = (energy_c(F, c + h * w, p) - energy_c(F, c - h * w, p)) / (2 * h)
            g = float(gradient_c(F, c, p) @ w)
            grad = max(grad, abs(fd - g) / max(abs(g), 1e-300))
            u, v = SpectralField(F.basis, c), SpectralField(F.basis, w)
            a_uv, a_vu = form_value(F, u, v), form_value(F, v, u)
            scale = 1 + abs(form_value(F, u, u)) + abs(form_value(F, v, v))
            sym = max(sym, abs(a_uv - a_vu) / scale)
            z = SpectralField(F.basis, c + 1j * w)
            mod = SpectralField(F.basis, F.from_physical(np.abs(F.u_values(z.coeffs))))
            dia = max(dia, energy(mod, F, p) - energy(z, F, p))
    out.append(_check(10, "gradient_fd", grad, 1e-5, grad <= 1e-5,
                      "energy gradient matches central differences (step 1e-5)"))
    out.append(_check(10, "form_symmetry", sym, 1e-10, sym <= 1e-10, "a(u, v) = a(v, u)"))
    out.append(_check(10, "diamagnetic", dia, 1e-8, dia <= 1e-8, "E(|u|) <= E(u) for complex u"))
    return out


# 11. localization

def criterion_11(pr, seed=0, m=0.5):
    F = _form(1, pr.cutoff_1d, seed)
    gs = energy_ground_state(F, ProblemParams(1.0, 1.0), m)
    fit = localization_fit(gs, F)
    return [_check(11, "localization", fit.r2, 0.95, gs.converged and fit.slope > 0 and fit.r2 >= 0.95,
                   "log|v| decays like -c |x|^2 with c > 0 (r^2 of the fit)", **fit.to_dict())]


# 12. white-noise regularity

def criterion_12(pr, N=4096):
    out = []
    for d in (1, 2):
        basis = BasisSpec(d, 2 * N)
        for gap in (0.5, 1.0):
            S = noise_sobolev_series(basis, -d / 2 - (d / 2 + gap))
            tail = S[2 * N] / S[N] - 1
            out.append(_check(12, f"noise_converges_d{d}_s+{gap}", tail, 1e-2, tail <= 1e-2,
                              f"partial sums converge for s = d/2 + {gap}"))
        gap = 0.5
        S = noise_sobolev_series(basis, -d / 2 - (d / 2 - gap))
        ratio = S[2 * N] / S[N]
        need = 1 + 0.5 * (2 ** gap - 1)
        out.append(_check(12, f"noise_diverges_d{d}_s-{gap}", ratio, need, ratio >= need,
                          f"doubling ratio stays above 1 for s = d/2 - {gap}"))
    return out


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 13)}


@dataclass
class Report:
    profile: Profile
    checks: list
    seconds: dict

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        return [c.line() for c in self.checks]

    def to_dict(self):
        return {"profile": asdict(self.profile), "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks],
                "seconds": {str(k): v for k, v in self.seconds.items()}}


def run_criterion(k, profile=DESK):
    t0 = time.perf_counter()
    checks = CRITERIA[k](profile)
    dt = time.perf_counter() - t0
    for c in checks:
        c.seconds = dt
    return checks, dt


def run_suite(profile=DESK, only=None, log=None):
    """Run the selected criteria (all by default); ``log`` receives one line per check."""
    checks, secs = [], {}
    for k in sorted(only or CRITERIA):
        got, secs[k] = run_criterion(k, profile)
        checks.extend(got)
        if log is not None:
            for c in got:
                log(c.line())
    return Report(profile, checks, secs)


def with_seed(profile, seed):
    return replace(profile, seed=int(seed))
