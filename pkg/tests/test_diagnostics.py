import math

import numpy as np
import pytest
from conftest import form

from agpwaves.anderson import eigen_lowest
from agpwaves.diagnostics import (localization_fit, physical_field, residual,
                                  sign_condition_check, sobolev_growth, sobolev_ratio)
from agpwaves.errors import InsufficientNodes
from agpwaves.functionals import ProblemParams
from agpwaves.solvers import GroundState, energy_ground_state
from agpwaves.spectral import SpectralField


def _state(field, omega, m=1.0):
    return GroundState(field, omega, m, 0.0, 0.0, 0, True, True)


def _linear_state(F, m=1.0):
    e = eigen_lowest(F, 1)
    return _state(e.phi0 * math.sqrt(2 * m), -e.mu0, m), e


@pytest.fixture(scope="module")
def setup():
    F = form(1, 64, 3)
    return F, eigen_lowest(F, 1).mu0


class TestResidual:
    @pytest.mark.parametrize("d,N,seed", [(1, 64, 2), (2, 16, 2)])
    def test_linear_eigenfield(self, d, N, seed):
        F = form(d, N, seed)
        gs, _ = _linear_state(F)
        r = residual(gs, F, ProblemParams(0.0, 1.0))
        assert 0 <= r.absolute <= 1e-10 and r.relative <= 1e-10

    def test_perturbation_raises_residual(self, rng):
        F = form(1, 64, 2)
        p = ProblemParams(1.0, 1.0)
        gs = energy_ground_state(F, p, 0.5)
        base = residual(gs, F, p).absolute
        assert base <= 1e-8
        pert = rng.standard_normal(F.basis.n_modes) * np.exp(-0.25 * F.basis.eigenvalues)
        pert *= 1e-3 / np.linalg.norm(pert)
        moved = _state(SpectralField(F.basis, gs.field.coeffs + pert), gs.omega)
        assert residual(moved, F, p).absolute >= 10 * base

    def test_basis_checked(self):
        gs, _ = _linear_state(form(1, 16))
        from agpwaves.errors import BasisMismatch
        with pytest.raises(BasisMismatch):
            residual(gs, form(1, 17), ProblemParams(0.0, 1.0))


class TestLocalization:
    def test_oscillator_gaussian(self):
        F = form(1, 64)
        gs, _ = _linear_state(F)
        fit = localization_fit(gs, F)
        assert fit.slope == pytest.approx(0.5, abs=1e-6)
        assert fit.r2 >= 0.999 and fit.nodes_used >= 10

    def test_focusing_random_seed(self):
        F = form(1, 128, 0)
        gs = energy_ground_state(F, ProblemParams(1.0, 1.0), 0.5)
        fit = localization_fit(gs, F)
        assert fit.slope > 0 and fit.r2 >= 0.95

    def test_zero_field(self):
        F = form(1, 32, 1)
        with pytest.raises(InsufficientNodes):
            localization_fit(_state(SpectralField.zeros(F.basis), 0.0), F)

    def test_phase_and_scale_invariance(self):
        F = form(2, 24, 1)
        gs, _ = _linear_state(F)
        a = localization_fit(gs, F)
        b = localization_fit(_state(gs.field * (3.0 * np.exp(0.4j)), gs.omega), F)
        assert b.slope == pytest.approx(a.slope, rel=1e-10)
        assert b.intercept == pytest.approx(a.intercept + math.log(3.0), rel=1e-10)
        assert b.nodes_used == a.nodes_used

    def test_weights(self):
        F = form(1, 64)
        gs, _ = _linear_state(F)
        w = np.linspace(1, 2, F.grid.size)
        assert localization_fit(gs, F, weights=w).slope == pytest.approx(0.5, abs=1e-6)


class TestSignCondition:
    def test_linear(self, setup):
        F, mu0 = setup
        gs, _ = _linear_state(F)
        v = sign_condition_check(gs, ProblemParams(0.0, 1.0), mu0)
        assert v.applicable == "linear" and v.linear_ok and v.passed

    @pytest.mark.parametrize("lam,kind", [(1.0, "focusing"), (-1.0, "defocusing")])
    def test_nonlinear(self, setup, lam, kind):
        F, mu0 = setup
        p = ProblemParams(lam, 1.0)
        v = sign_condition_check(energy_ground_state(F, p, 0.5), p, mu0)
        assert v.applicable == kind and v.passed and v.positive
        assert v.to_dict()["passed"] is True

    def test_violation_detected(self, setup):
        F, mu0 = setup
        gs = _state(SpectralField.mode(F.basis, 0), -mu0 - 0.5)
        assert not sign_condition_check(gs, ProblemParams(1.0, 1.0), mu0).passed


class TestSobolevGrowth:
    def test_l2_norm(self):
        m = 0.7
        F = form(1, 64, 1)
        (s, n), = sobolev_growth(_linear_state(F, m)[0], [0.0], F)
        assert n == pytest.approx(math.sqrt(2 * m), rel=1e-12)
        # 2D: rho v is re-analyzed onto the truncated basis, a projection
        F = form(2, 24, 1)
        (s, n), = sobolev_growth(_linear_state(F, m)[0], [0.0], F)
        assert math.sqrt(2 * m) * (1 - 1e-3) <= n <= math.sqrt(2 * m) * (1 + 1e-12)

    def test_smooth_state_is_cutoff_stable(self):
        rows = [dict(sobolev_growth(_linear_state(form(1, N))[0], [0.5, 1.0, 2.0])) for N in (64, 128)]
        for s in rows[0]:
            assert rows[1][s] == pytest.approx(rows[0][s], rel=1e-10)

    def test_noisy_state_roughness(self):
        p = ProblemParams(1.0, 1.0)
        states = []
        for N in (256, 512):
            F = form(1, N, 4)
            states.append(physical_field(energy_ground_state(F, p, 0.5), F))
        assert sobolev_ratio(states, 1.8)[1] > sobolev_ratio(states, 1.2)[1]
