import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surfgrow.field import FourierField, inner, nonlinearity_B
from surfgrow.inequalities import (ExponentTriple, classify_easy, condition_holds, critical_beta, easy_regime,
                                   hard_growth_exponent, hard_support, sum_easy, sum_hard, trilinear_ratio,
                                   trilinear_sup)

from test_field import random_field

T001 = ExponentTriple(0.0, 0.0, 1.0)


class TestCondition:
    @pytest.mark.parametrize("triple,expected", [
        ((0, 0, 1), True),
        ((0.5, 0.5, -0.5), False),
        ((-0.1, 0, 1), False),
        ((0.25, 0.25, 0.0), True),
        ((0.5, 0.0, 0.0), False),
        ((0.5, 0.0, 0.01), True),
        ((0.2, 0.2, 0.05), False),
        ((0.7, 0.7, -0.8), False),
        ((0.7, 0.9, -0.8), True),
        ((0.75, 0.75, -1.0), False),
        ((1.0, 1.0, -0.9), True),
        ((0.0, 0.7, -0.2), True),
    ])
    def test_table(self, triple, expected):
        assert condition_holds(ExponentTriple(*triple)) is expected

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            ExponentTriple(math.nan, 0, 0)

    def test_total(self):
        assert ExponentTriple(0.1, 0.2, 0.3).total == pytest.approx(0.6)


class TestEasySum:
    def test_gamma_zero(self):
        assert sum_easy(0.0, 10) == 20

    @pytest.mark.parametrize("a", [1, 7, 10.5, 1000])
    def test_gamma_zero_closed_form(self, a):
        assert sum_easy(0.0, a) == 2 * math.floor(a)

    def test_gamma_one_limit(self):
        assert sum_easy(1.0, 10 ** 6) == pytest.approx(math.pi ** 2 / 3, abs=3e-6)

    def test_gamma_half_log(self):
        r = [sum_easy(0.5, 2 ** k) / math.log(2 ** k) for k in range(4, 15)]
        assert max(r) / min(r) < 1.2

    def test_a_below_one(self):
        with pytest.raises(ValueError):
            sum_easy(0.0, 0.5)

    @pytest.mark.parametrize("gamma,regime", [(-0.5, "power"), (0.0, "power"), (0.25, "power"), (0.45, "power"),
                                              (0.5, "log"), (0.55, "constant"), (1.0, "constant"),
                                              (2.0, "constant")])
    def test_classification(self, gamma, regime):
        rep = classify_easy(gamma)
        assert rep.regime == regime == easy_regime(gamma)
        assert rep.empirical_regime == regime
        assert math.isfinite(rep.constant) and rep.constant > 0


class TestHardSum:
    def test_m_one_empty(self):
        assert hard_support(1).size == 0
        assert sum_hard(0.3, 0.2, 1) == 0

    def test_m_zero_rejected(self):
        with pytest.raises(ValueError):
            hard_support(0)

    @pytest.mark.parametrize("m", [2, 3, 7, -5, 64, 1001])
    def test_support_window(self, m):
        k = hard_support(m)
        assert np.all(3 * np.abs(k) >= 2 * abs(m)) and np.all(np.abs(k) < 2 * abs(m))
        assert m not in k

    @pytest.mark.parametrize("m", [3, 10, -4])
    def test_brute_force(self, m):
        terms = [abs(k - m) ** -0.6 * abs(k) ** -0.4 for k in range(-3 * abs(m), 3 * abs(m) + 1)
                 if abs(k) < 2 * abs(m) and 0 < abs(k - m) < abs(k) / 2]
        assert sum_hard(0.3, 0.2, m) == pytest.approx(sum(terms), rel=1e-13)

    def test_count_linear(self):
        assert hard_growth_exponent(0.0, 0.0) == pytest.approx(1.0, abs=0.02)
        # |k - m| < |k|/2 with k > 0 means 2m/3 < k < 2m, minus k = m
        for m in (9, 30, 300):
            assert sum_hard(0.0, 0.0, m) == len(range(2 * m // 3 + 1, 2 * m)) - 1

    @pytest.mark.parametrize("alpha,gamma", [(0.0, 0.25), (0.2, 0.0), (0.75, 0.2), (1.0, -0.2)])
    def test_growth_below_critical(self, alpha, gamma):
        tail = [2 ** k for k in range(8, 15)]
        assert hard_growth_exponent(alpha, gamma, tail) <= 2 * critical_beta(alpha, gamma) + 0.05

    def test_critical_beta(self):
        assert critical_beta(0.0, 0.0) == 0.5
        assert critical_beta(1.0, 0.25) == -0.25


class TestTrilinearRatio:
    def test_single_mode_oracle(self):
        e1 = FourierField.from_modes(8, {1: 1.0}, real=False)
        e2 = FourierField.from_modes(8, {2: 1.0}, real=False)
        assert trilinear_ratio(e1, e1, e2, T001) == pytest.approx(math.pi, rel=1e-13)

    def test_orthogonal_zero(self):
        e1 = FourierField.from_modes(8, {1: 1.0}, real=False)
        e3 = FourierField.from_modes(8, {3: 1.0}, real=False)
        assert trilinear_ratio(e1, e1, e3, T001) == 0

    def test_zero_rejected(self):
        e1 = FourierField.from_modes(8, {1: 1.0}, real=False)
        with pytest.raises(ValueError):
            trilinear_ratio(e1, FourierField.zeros(8), e1, T001)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 999), a=st.floats(0.1, 10), b=st.floats(0.1, 10), c=st.floats(0.1, 10))
    def test_scaling_invariance(self, seed, a, b, c):
        u, v, w = (random_field(8, seed + i, real=False) for i in range(3))
        t = ExponentTriple(0.25, 0.25, 0.1)
        assert trilinear_ratio(u * a, v * b, w * c, t) == pytest.approx(trilinear_ratio(u, v, w, t), rel=1e-10)
        num = inner(nonlinearity_B(u * a, v), w)
        assert num == pytest.approx(a * inner(nonlinearity_B(u, v), w), rel=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 999))
    def test_symmetry(self, seed):
        u, v, w = (random_field(8, seed + i, real=False) for i in range(3))
        assert trilinear_ratio(u, v, w, T001) == trilinear_ratio(v, u, w, T001)

    def test_dual_optimal_w_bounds_random_w(self):
        # the sampler's closed-form sup over w dominates any particular w
        u, v = random_field(8, 1, real=False), random_field(8, 2, real=False)
        rep = trilinear_sup(T001, [8, 16], samples=10, hill_steps=0)
        b = u.basis
        Bc = b.B_direct(u.coeffs, v.coeffs)
        wk = np.zeros_like(Bc)
        wk[b.nonzero] = b.abs_kappa[b.nonzero] ** -6.0 * Bc[b.nonzero]
        w_opt = FourierField(wk, u.L, real=False)
        best = trilinear_ratio(u, v, w_opt, T001)
        for seed in range(20):
            assert trilinear_ratio(u, v, random_field(8, 100 + seed, real=False), T001) <= best * (1 + 1e-12)
        assert rep.max_ratio >= math.pi * (1 - 1e-12)


class TestTrilinearSup:
    def test_report(self):
        rep = trilinear_sup(ExponentTriple(0.25, 0.25, 0.1), 8, samples=500, hill_steps=20)
        assert rep.K_used == [8, 16]
        assert set(rep.per_K) == {8, 16}
        assert rep.max_ratio == rep.per_K[16] > 0
        assert rep.stability == [pytest.approx(rep.per_K[16] / rep.per_K[8])]
        d = json.loads(rep.to_json())
        assert d["per_K"].keys() == {"8", "16"}

    def test_deterministic_and_parallel(self):
        t = ExponentTriple(0.25, 0.25, 0.1)
        a = trilinear_sup(t, [8, 16], samples=2500, seed=3, hill_steps=10)
        b = trilinear_sup(t, [8, 16], samples=2500, seed=3, hill_steps=10, jobs=2)
        assert a.to_json() == b.to_json()

    def test_inadmissible_rejected(self):
        with pytest.raises(ValueError):
            trilinear_sup(ExponentTriple(0.0, 0.0, 0.4), 8, samples=10)

    def test_inadmissible_allowed_when_asked(self):
        rep = trilinear_sup(ExponentTriple(0.0, 0.0, 0.4), 8, samples=10, hill_steps=0, require_admissible=False)
        assert rep.max_ratio > 0

    def test_single_resolution_rejected(self):
        with pytest.raises(ValueError):
            trilinear_sup(T001, [8], samples=10)

    def test_at_least_single_mode_value(self):
        # structured candidates include the single-mode pair, so the sup is at least pi
        rep = trilinear_sup(T001, [8, 16], samples=10, hill_steps=0)
        assert min(rep.per_K.values()) >= math.pi * (1 - 1e-12)
