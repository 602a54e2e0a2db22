import math

import numpy as np
import pytest

from surfgrow.blowup import complex_preset
from surfgrow.evolve import StepperConfig, Trajectory, simulate
from surfgrow.field import FourierField
from surfgrow.functionals import (CSV_COLUMNS, budget, cubic_identity_residual, diagnose, dissipation_rate,
                                  energy_residual, lyapunov_identity_residual, lyapunov_monotone_violation,
                                  lyapunov_value, poincare_decay_violation, trapezoid_running)

from test_field import random_field


@pytest.fixture(scope="module")
def cos_run():
    """h0 = cos x, K = 128, T = 0.1, every step recorded at dt = 1e-4."""
    return simulate(FourierField.from_modes(128, {1: 0.5}), 0.1, StepperConfig(dt=1e-4))


@pytest.fixture(scope="module")
def zero_run():
    return simulate(FourierField.zeros(8), 0.01, StepperConfig(dt=1e-3))


@pytest.fixture(scope="module")
def capped_run():
    u = complex_preset(16, 4.0, 0.9, sign=-1.0)
    return simulate(u, 0.05, StepperConfig(dt=1e-3, norm_cap=1e6, adapt_target=1e-6))


class TestRecord:
    def test_zero_field(self):
        rec = diagnose(FourierField.zeros(8), 0.0)
        assert rec.l2_sq == rec.h2_sq == rec.cubic == rec.quartic_gradient == 0
        assert rec.lyapunov[1.0] == pytest.approx(2 * math.pi, rel=1e-14)

    def test_cos_values(self):
        rec = diagnose(FourierField.from_modes(16, {1: 0.5}), 0.0)
        assert rec.l2_sq == pytest.approx(math.pi, rel=1e-13)
        assert rec.sup_norm == pytest.approx(1.0, rel=1e-13)
        assert rec.quartic_gradient == pytest.approx(3 * math.pi / 4, rel=1e-12)

    def test_linearized_single_mode_terms(self):
        # h = eps e^{-t} cos x: int h^3 = int h h_xx^2 = 0 and int h_x^4 = (3 pi / 4) (eps e^{-t})^4
        eps, t = 1e-3, 0.3
        a = eps * math.exp(-t)
        rec = diagnose(FourierField.from_modes(16, {1: a / 2}), t)
        assert abs(rec.cubic) < 1e-6 * a ** 3
        assert abs(rec.cubic_hessian) < 1e-6 * a ** 3
        assert rec.quartic_gradient == pytest.approx(3 * math.pi / 4 * a ** 4, rel=1e-6)

    def test_dissipation_rate_single_mode(self):
        assert dissipation_rate(FourierField.from_modes(8, {2: 0.5})) == pytest.approx(16 * math.pi, rel=1e-13)

    def test_csv_row_matches_columns(self):
        assert len(diagnose(FourierField.zeros(4), 0.0).csv_row()) == len(CSV_COLUMNS)

    def test_lyapunov_overflow_is_inf(self):
        u = FourierField.from_modes(64, {1: 500.0})
        assert lyapunov_value(u, 1.5) == math.inf
        # Laplace asymptotics: log int e^{1500 cos x} = 1500 + log sqrt(2 pi / 1500) + O(1e-4)
        expect = 1500 + 0.5 * math.log(2 * math.pi / 1500)
        assert diagnose(u, 0.0).log_lyapunov[1.5] == pytest.approx(expect, abs=1e-3)


class TestEnergy:
    def test_zero(self, zero_run):
        assert energy_residual(zero_run) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            energy_residual(Trajectory())

    def test_smooth_run(self, cos_run):
        assert energy_residual(cos_run) < 1e-6

    def test_coarse_quadrature_grows(self, cos_run):
        assert energy_residual(cos_run, stride=4) > 2 * energy_residual(cos_run, stride=1)

    def test_dissipation_nondecreasing(self, cos_run):
        assert np.all(np.diff(cos_run.column("dissipation_integral")) >= 0)

    def test_energy_nonincreasing(self, cos_run):
        e = cos_run.column("l2_sq")
        assert np.all(np.diff(e) <= 1e-10 * e[:-1])

    def test_poincare_decay(self, cos_run):
        assert poincare_decay_violation(cos_run) <= 1e-10


class TestLyapunov:
    def test_zero_value(self):
        assert lyapunov_value(FourierField.zeros(8), 0.7) == pytest.approx(2 * math.pi, rel=1e-14)
        assert lyapunov_value(FourierField.zeros(8, L=3.0), 0.7) == pytest.approx(3.0, rel=1e-14)

    def test_cos_value(self):
        # int_0^{2pi} e^{a cos x} dx = 2 pi I_0(a)
        i0 = sum((0.25) ** k / math.factorial(k) ** 2 for k in range(30))
        assert lyapunov_value(FourierField.from_modes(16, {1: 0.5}), 1.0) == pytest.approx(2 * math.pi * i0,
                                                                                         rel=1e-12)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_monotone(self, cos_run, alpha):
        assert lyapunov_monotone_violation(cos_run, alpha) <= 1e-8

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_identity(self, cos_run, alpha):
        assert lyapunov_identity_residual(cos_run, alpha) < 1e-4

    def test_zero_identity(self, zero_run):
        assert lyapunov_identity_residual(zero_run, 1.0) == 0


class TestCubic:
    def test_zero(self, zero_run):
        assert cubic_identity_residual(zero_run) == 0

    def test_integrated_form(self, cos_run):
        assert cubic_identity_residual(cos_run, hessian_coeff=2.0) < 1e-4

    def test_unit_coefficient_does_not_balance(self, cos_run):
        assert cubic_identity_residual(cos_run, hessian_coeff=1.0) > 1e-2


class TestBudget:
    @pytest.mark.parametrize("kind,param", [("H", 1.0), ("W14", None), ("C1", None), ("H1H3", 6.0)])
    def test_zero(self, zero_run, kind, param):
        assert budget(zero_run, kind, param).value == 0

    @pytest.mark.parametrize("kind,param", [("H", 0.5), ("H", 4.5), ("H", None), ("H1H3", 0.0),
                                            ("H1H3", 10.0), ("L2", None)])
    def test_out_of_range(self, zero_run, kind, param):
        with pytest.raises(ValueError):
            budget(zero_run, kind, param)

    def test_exponents(self, cos_run):
        assert budget(cos_run, "H", 1.0).exponent == 8
        assert budget(cos_run, "W14").exponent == pytest.approx(16 / 3)
        assert budget(cos_run, "C1").exponent == 4

    @pytest.mark.parametrize("kind,param", [("H", 1.0), ("H", 2.5), ("W14", None), ("C1", None)])
    def test_additive(self, cos_run, kind, param):
        whole = budget(cos_run, kind, param).value
        parts = budget(cos_run, kind, param, t_end=0.05).value + budget(cos_run, kind, param, t_start=0.05).value
        assert parts == pytest.approx(whole, rel=1e-12)

    def test_h1h3_ratio_finite(self):
        ratios = []
        for seed in range(20):
            tr = simulate(random_field(16, seed, slope=-2.0) * 0.2, 0.01, StepperConfig(dt=2e-3))
            rep = budget(tr, "H1H3", 6.0)
            assert rep.extra["ratio"] == pytest.approx(rep.extra["lhs"] / rep.extra["rhs"])
            ratios.append(rep.extra["ratio"])
        assert math.isfinite(max(ratios))

    def test_grows_toward_cap(self, capped_run):
        assert capped_run.termination == "norm_cap_hit"
        te = capped_run.times[-1]
        last = budget(capped_run, "H", 1.0, t_start=te / 2).value
        prev = budget(capped_run, "H", 1.0, t_start=te / 4, t_end=te / 2).value
        assert last > 10 * prev


class TestHelpers:
    def test_trapezoid_running(self):
        t = np.linspace(0, 1, 101)
        assert trapezoid_running(t, 2 * t)[-1] == pytest.approx(1.0, rel=1e-14)
