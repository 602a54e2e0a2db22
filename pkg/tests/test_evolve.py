import math

import numpy as np
import pytest

from surfgrow.evolve import (StepFailure, StepperConfig, Trajectory, contraction_threshold, graded_grid,
                             integrability_norm, phi_functions, picard_iterate, simulate, star_norm,
                             step, weighted_sup_norm)
from surfgrow.field import FourierField, sobolev_norm
from surfgrow.functionals import diagnose

from test_field import random_field


def single_mode_trajectory(alpha, T, n=4000):
    """h(t) = e^{-t} e^{ix} sampled on a fine geometric grid."""
    e1 = FourierField.from_modes(8, {1: 1.0}, real=False)
    traj = Trajectory()
    for t in np.concatenate([[0.0], np.geomspace(1e-8, T, n)]):
        u = e1 * math.exp(-t)
        traj.append(t, u, diagnose(u, t))
    traj.finish("completed")
    return traj


class TestPhiFunctions:
    def test_series_matches_closed_form_at_switch(self):
        lo = phi_functions(np.array([-0.4999999]))
        hi = phi_functions(np.array([-0.5000001]))
        for p, q in zip(lo, hi):
            assert p[0] == pytest.approx(q[0], rel=1e-6)

    def test_zero(self):
        p1, p2, p3 = phi_functions(np.array([0.0]))
        assert (p1[0], p2[0], p3[0]) == pytest.approx((1.0, 0.5, 1 / 6), rel=1e-15)

    def test_large_negative(self):
        p1, p2, p3 = phi_functions(np.array([-1e6]))
        assert p1[0] == pytest.approx(1e-6, rel=1e-5)


class TestStep:
    def test_zero_stays_zero(self):
        assert np.all(step(FourierField.zeros(8), 1e-3).coeffs == 0)

    @pytest.mark.parametrize("scheme", ["ETDRK4", "IFRK4"])
    def test_linearization(self, scheme):
        eps, dt = 1e-6, 1e-2
        u = FourierField.from_modes(8, {1: eps}, real=False)
        out = step(u, dt, scheme)
        assert np.max(np.abs(out.coeffs - math.exp(-dt) * u.coeffs)) < 10 * eps ** 2

    def test_invalid_dt(self):
        with pytest.raises(ValueError):
            step(FourierField.zeros(4), 0.0)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            step(FourierField.zeros(4), 1e-3, "Euler")

    def test_reality_and_mean(self):
        out = step(random_field(16, 1), 1e-3)
        assert out.real and out.coeff(0) == 0
        assert np.max(np.abs(out.to_grid().imag)) <= 1e-12

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_signals_failure(self):
        u = FourierField.from_modes(16, {1: 1e150, 2: 1e150})
        with pytest.raises(StepFailure):
            step(u, 1.0)

    def test_richardson_order(self):
        # one-step error |S(dt) - S(dt/2)^2| in the asymptotic regime
        u = FourierField.from_modes(32, {1: 0.5, 2: 0.2j})

        def err(dt):
            return np.max(np.abs(step(u, dt).coeffs - step(step(u, dt / 2), dt / 2).coeffs))

        assert err(2.5e-4) / err(1.25e-4) >= 2 ** 3.5


class TestStepperConfig:
    @pytest.mark.parametrize("kw", [dict(dt=1e-3, dt_min=1e-2), dict(norm_cap=0), dict(adapt_target=-1),
                                    dict(record_every=0), dict(scheme="RK2")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            StepperConfig(**kw)


class TestSimulate:
    def test_zero_data(self):
        tr = simulate(FourierField.zeros(8), 0.05)
        assert tr.termination == "completed"
        assert all(np.all(u.coeffs == 0) for u in tr.states)

    def test_linear_decay_rate(self):
        u = FourierField.from_modes(32, {1: 0.5e-3})
        tr = simulate(u, 1.0, StepperConfig(dt=1e-2))
        t = np.array(tr.times)
        slope = np.polyfit(t, np.log(np.sqrt(tr.column("l2_sq"))), 1)[0]
        assert -slope == pytest.approx(1.0, rel=0.02)

    def test_times_increase_and_termination_once(self):
        tr = simulate(random_field(16, 2, slope=-2), 0.01, StepperConfig(dt=1e-3))
        assert np.all(np.diff(tr.times) > 0)
        assert tr.times[-1] == pytest.approx(0.01)
        with pytest.raises(RuntimeError):
            tr.finish("completed")

    def test_record_every(self):
        tr = simulate(FourierField.from_modes(8, {1: 0.1}), 0.01, StepperConfig(dt=1e-3, record_every=3,
                                                                                    adaptive=False))
        # initial record, every third step, final record
        assert len(tr) == 1 + 3 + 1

    def test_states_share_layout(self):
        u = random_field(16, 3, slope=-2)
        tr = simulate(u, 0.01, StepperConfig(dt=1e-3))
        assert all(s.K == u.K and s.L == u.L and s.real for s in tr.states)
        assert all(s.coeff(0) == 0 for s in tr.states)

    def test_energy_nonincreasing(self):
        tr = simulate(random_field(32, 4, slope=-2), 0.05, StepperConfig(dt=1e-3))
        e = tr.column("l2_sq")
        assert np.all(np.diff(e) <= 1e-10 * e[:-1])

    def test_norm_cap(self):
        u = FourierField.from_modes(16, {1: -2.0, 2: -1.0}, real=False)
        tr = simulate(u, 0.05, StepperConfig(dt=1e-3, norm_cap=20, adapt_target=1e-6))
        assert tr.termination == "norm_cap_hit"
        assert math.sqrt(tr.records[-1].h2_sq) > 20

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_dt_underflow(self):
        u = random_field(16, 5, slope=0) * 50.0
        tr = simulate(u, 1.0, StepperConfig(dt=1e-2, dt_min=1e-3, adapt_target=1e-12))
        assert tr.termination == "dt_underflow"

    def test_csv_and_snapshots(self, tmp_path):
        tr = simulate(FourierField.from_modes(8, {1: 0.2}), 0.003, StepperConfig(dt=1e-3))
        tr.to_csv(tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0].startswith("t,l2_sq,h2_sq,dissip")
        assert len(lines) == len(tr) + 1
        tr.write_snapshots(tmp_path / "snaps")
        assert len(list((tmp_path / "snaps").iterdir())) == len(tr)

    def test_below_threshold_decays(self):
        shape = FourierField.from_modes(16, {1: 0.5, 2: 0.25})
        a = contraction_threshold(shape, 0.25, 0.1, n_grid=64, tol=1e-2)
        u = shape * (0.5 * a / sobolev_norm(shape, 0.5))
        tr = simulate(u, 10.0, StepperConfig(dt=1e-2, record_every=10))
        assert tr.termination == "completed"
        h = np.array([r.sobolev[0.5] for r in tr.records])
        assert h[-1] < 1e-3 * h[0]
        assert np.all(np.diff(h) <= 1e-12 * h[0])

    @pytest.mark.parametrize("seed", range(2))
    def test_scaling_covariance(self, seed):
        u = random_field(16, seed, slope=-2) * 0.3
        big = simulate(u, 0.05, StepperConfig(dt=1e-4, adapt_target=1e-10)).states[-1]
        # h0(2x) on the half period has the same coefficients
        small_h0 = FourierField(u.coeffs, L=math.pi, real=True)
        small = simulate(small_h0, 0.05 / 16, StepperConfig(dt=1e-4 / 16, adapt_target=1e-10)).states[-1]
        diff = np.linalg.norm(big.coeffs - small.coeffs) / np.linalg.norm(big.coeffs)
        assert diff < 1e-6


class TestPicard:
    def test_graded_grid(self):
        g = graded_grid(2.0, 4)
        assert g == pytest.approx([0, 2 / 256, 2 / 16, 2 * 81 / 256, 2])

    def test_first_iterate_is_free_evolution(self):
        u = random_field(8, 1)
        st = picard_iterate(u, 0.25, 0.1, n_iter=1, n_grid=32)
        kap4 = u.basis.kappa4
        expect = np.exp(-np.multiply.outer(st.time_grid, kap4)) * u.coeffs
        assert np.array_equal(st.iterates[0], expect)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            picard_iterate(FourierField.zeros(4), 0.5, 1.0)

    def test_small_data_contracts(self):
        u = FourierField.from_modes(16, {1: 0.05})
        st = picard_iterate(u, 0.25, 0.1, n_iter=6)
        assert st.diverged_at is None
        assert max(st.ratios) < 1

    def test_large_data_diverges(self):
        u = FourierField.from_modes(16, {1: -4.0, 2: -2.0}, real=False)
        st = picard_iterate(u, 0.25, 0.5, n_iter=30, delta=1.0, n_grid=64)
        assert st.diverged_at is not None

    def test_fixed_point_matches_simulation(self):
        u = FourierField.from_modes(16, {1: 0.05, 2: 0.02})
        T = 0.1
        st = picard_iterate(u, 0.25, T, n_iter=10)
        ref = simulate(u, T, StepperConfig(dt=1e-4, adapt_target=1e-12)).states[-1]
        diff = sobolev_norm(st.field_at(-1) - ref, 0.5) / sobolev_norm(ref, 0.5)
        assert diff < 1e-5

    def test_threshold_ratio(self):
        shape = FourierField.from_modes(16, {1: 0.5})
        a = contraction_threshold(shape, 0.25, 0.1, n_grid=64, tol=1e-3)
        st = picard_iterate(shape * (a / sobolev_norm(shape, 0.5)), 0.25, 0.1, n_iter=3, n_grid=64,
                            delta=math.inf)
        assert st.ratios[1] == pytest.approx(0.5, rel=5e-3)


class TestCriticalNorms:
    def test_zero(self):
        tr = simulate(FourierField.zeros(8), 0.01)
        assert star_norm(tr, 0.25, 0.01) == 0
        assert weighted_sup_norm(tr, 0.25, 0.01) == 0
        assert integrability_norm(tr, 0.25, 0.01) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            star_norm(Trajectory(), 0.25, 1.0)

    @pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
    def test_single_mode_star(self, alpha):
        theta = (1 + 2 * alpha) / 8
        T = 1.0
        tr = single_mode_trajectory(alpha, T)
        assert star_norm(tr, alpha, T) == pytest.approx(theta ** theta * math.exp(-theta), rel=1e-6)

    @pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
    def test_single_mode_integrability(self, alpha):
        T = 0.5
        p = 8 / (1 + 2 * alpha)
        t = np.linspace(0, T, 20_001)
        tr = Trajectory()
        e1 = FourierField.from_modes(8, {1: 1.0}, real=False)
        for s in t:
            tr.times.append(float(s))
            tr.states.append(e1 * math.exp(-s))
        exact = (1 - math.exp(-p * T)) / p
        assert integrability_norm(tr, alpha, T) == pytest.approx(exact, rel=1e-8)

    @pytest.mark.parametrize("seed", range(3))
    def test_sup_below_star(self, seed):
        tr = simulate(random_field(16, seed, slope=-1.5) * 0.2, 0.02, StepperConfig(dt=1e-3))
        assert weighted_sup_norm(tr, 0.25, 0.02) <= star_norm(tr, 0.25, 0.02) * (1 + 1e-12)

    def test_picard_state_accepted(self):
        st = picard_iterate(FourierField.from_modes(8, {1: 0.05}), 0.25, 0.1, n_iter=3, n_grid=64)
        assert weighted_sup_norm(st, 0.25, 0.1) == pytest.approx(st.k_norms[-1], rel=1e-12)
        assert math.isfinite(integrability_norm(st, 0.25, 0.1))
