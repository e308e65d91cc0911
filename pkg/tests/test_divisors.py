"""Hill spectrum, divisor roots, resonance windows, measure tests."""

import numpy as np
import pytest

from kgperiodic.divisors import (
    CoverageError,
    DivisorTable,
    HillSpectrum,
    ResonanceParams,
    averaged_potential,
    divisor_min,
    epsilon_kj,
    hill_eigs,
    is_resonant,
    measure_exponent_fit,
    window_measure,
)
from kgperiodic.nonlinearity import Nonlinearity
from kgperiodic.planar import find_orbit

from oracles import divisor_root_exact, divisor_root_float, log_fit

# Resonance value eps_{2,100} for the flat potential at period 2*pi, from
# the exact-rational bisection oracle on -4 + 1/(1+e^2) + 1e4 e^2 = 0.
EPS_2_100_ORACLE = 0.017321373906255252


@pytest.fixture(scope="module")
def flat_2pi():
    return HillSpectrum.flat(2.0 * np.pi, 400)


class TestAveragedPotential:
    def test_zero_base_point_phi4(self):
        traj = find_orbit(6.0, 1e-9).trajectory(64)
        q = averaged_potential(traj, None, 0.1, Nonlinearity.phi4())
        assert np.max(np.abs(q)) < 1e-15

    def test_phi4_proportional_v_squared(self):
        # multiplier -(3/omega^2)(v sin x)^2 has x-mean -(3/2) v^2 / omega^2
        eps = 0.1
        traj = find_orbit(6.0, 1.0).trajectory(64)
        q = averaged_potential(traj, None, eps, Nonlinearity.phi4(), M_tau=64)
        v = traj.resample(64)
        expected = -(1.5 / (1.0 + eps**2)) * v**2
        assert np.max(np.abs(q - expected)) < 1e-13

    def test_even_and_periodic(self):
        traj = find_orbit(1.0, 0.9).trajectory(128)
        q = averaged_potential(traj, None, 0.1, Nonlinearity.sine_gordon(),
                               M_tau=128)
        # evenness in tau: q[m] = q[M-m]
        assert np.max(np.abs(q[1:] - q[::-1][:-1])) < 1e-12


class TestHillEigs:
    def test_flat_potential(self, flat_2pi):
        js = np.arange(0, 40)
        assert np.max(np.abs(flat_2pi.lambda_at(js) - js.astype(float) ** 2)) < 1e-11

    def test_constant_shift(self):
        period = 5.0
        spec = hill_eigs(np.full(64, 2.5), period, 60)
        js = np.arange(0, 30)
        expected = (2 * np.pi * js / period) ** 2 + 2.5
        assert np.max(np.abs(spec.lambda_at(js) - expected)) < 1e-10

    def test_growth_rate_generic(self):
        period = 6.0
        taus = period * np.arange(128) / 128
        q = 0.3 * np.cos(2 * np.pi * taus / period) - 0.1
        spec = hill_eigs(q, period, 120)
        js = np.arange(20, 60)
        ratio = spec.lambda_at(js) / js.astype(float) ** 2
        assert np.max(np.abs(ratio - (2 * np.pi / period) ** 2)) < 0.01

    def test_eigenvalue_simplicity(self):
        period = 6.058
        taus = period * np.arange(128) / 128
        q = -0.4 * np.cos(2 * np.pi * taus / period) ** 2
        spec = hill_eigs(q, period, 80)
        lam = spec.lambda_at(np.arange(0, 81))
        assert np.min(np.diff(lam)) > 0.0


class TestEpsilonKJ:
    def test_spot_value_2_100(self, flat_2pi):
        value = epsilon_kj(2, 100, flat_2pi)
        assert value == pytest.approx(EPS_2_100_ORACLE, abs=1e-10)
        assert value == pytest.approx(divisor_root_exact(2, 100 * 100), abs=1e-14)

    def test_defining_equation_residual(self, flat_2pi):
        for k, j in ((2, 10), (3, 55), (5, 400), (2, 100)):
            e = epsilon_kj(k, j, flat_2pi)
            lam = float(flat_2pi.lambda_at(j)[0])
            assert abs(-k * k + 1.0 / (1.0 + e * e) + e * e * lam) < 1e-12

    def test_float_oracle_agreement(self, flat_2pi):
        for k, j in ((2, 37), (4, 211)):
            lam = float(flat_2pi.lambda_at(j)[0])
            assert epsilon_kj(k, j, flat_2pi) == pytest.approx(
                divisor_root_float(k, lam), abs=1e-13)

    def test_lambda_equal_k_squared_closed_form(self, flat_2pi):
        # at lambda_j = k^2 the root reduces to eps = (1 - 1/k^2)^(1/4);
        # this b = 0 corner of the quadratic must not fall through
        for k in (2, 3, 5):
            expected = (1.0 - 1.0 / k**2) ** 0.25
            assert epsilon_kj(k, k, flat_2pi) == pytest.approx(expected,
                                                               abs=1e-13)
        table = DivisorTable.build(flat_2pi, K_max=5, J_max=10)
        for k in (2, 3, 5):
            assert table.lookup(k, k) == pytest.approx(
                (1.0 - 1.0 / k**2) ** 0.25, abs=1e-13)

    def test_monotone_decreasing_in_j(self, flat_2pi):
        values = [epsilon_kj(2, j, flat_2pi) for j in range(10, 60)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_no_root_for_nonpositive_lambda(self, flat_2pi):
        # j = 0 has lambda = 0: no positive eps solves the equation
        assert epsilon_kj(2, 0, flat_2pi) is None

    def test_asymptotic_law(self, flat_2pi):
        # j * eps_{k,j} -> (p/2pi) sqrt(k^2 - 1); j beyond the computed
        # truncation exercises the asymptotic tail of lambda_at
        spec = flat_2pi
        for k in (2, 3, 5):
            target = np.sqrt(k * k - 1.0)
            for j in (100, 1000, 10**4):
                scaled = j * epsilon_kj(k, j, spec)
                assert abs(scaled - target) / target < 0.01


class TestResonanceWindows:
    def test_center_is_resonant(self, flat_2pi):
        table = DivisorTable.build(flat_2pi, K_max=4, J_max=400)
        params = ResonanceParams()
        center = table.lookup(2, 100)
        rep = is_resonant(center, params, table)
        assert rep.resonant and rep.nearest_k == 2 and rep.nearest_j == 100

    def test_gap_midpoint_not_resonant(self, flat_2pi):
        table = DivisorTable.build(flat_2pi, K_max=2, J_max=400)
        params = ResonanceParams()
        mid = 0.5 * (table.lookup(2, 100) + table.lookup(2, 101))
        rep = is_resonant(mid, params, table, k_range=2)
        assert not rep.resonant
        assert rep.distance > 0.0

    def test_coverage_error_not_silent_false(self, flat_2pi):
        # query far below the tabulated centers must raise, never answer
        table = DivisorTable.build(flat_2pi, K_max=3, J_max=50)
        with pytest.raises(CoverageError):
            is_resonant(1e-4, ResonanceParams(), table)

    def test_params_invariants(self):
        params = ResonanceParams()
        assert 2.0 <= 2.0 + params.alpha < params.l < 3.0
        assert params.gamma == pytest.approx(params.l - params.alpha - 2.0)
        with pytest.raises(ValueError):
            ResonanceParams(alpha=1.5, l=2.5)   # violates 2 + alpha < l


class TestMeasure:
    def test_direct_summation_bound(self, flat_2pi):
        # window-union measure inside (0, eps0) is O(eps0^(l-1))
        table = DivisorTable.build(flat_2pi, K_max=6, J_max=4000)
        params = ResonanceParams()
        m_10 = window_measure(table, params, 0.10)
        m_05 = window_measure(table, params, 0.05)
        assert 0.0 < m_05 < m_10
        # l - 1 = 1.5: halving eps0 should cut the measure by ~2^1.5
        assert m_10 / m_05 > 2.0

    def test_exponent_fit_in_band(self, flat_2pi):
        table = DivisorTable.build(flat_2pi, K_max=6, J_max=4000)
        slope, r2 = measure_exponent_fit(
            table, ResonanceParams(), [0.05, 0.075, 0.1, 0.15, 0.2])
        assert 1.3 <= slope <= 1.7
        assert r2 > 0.95


class TestDivisorMin:
    def test_zero_at_center(self, flat_2pi):
        center = epsilon_kj(2, 115, flat_2pi)
        m, j = divisor_min(center, 2, flat_2pi)
        assert m < 1e-12 and j == 115

    def test_positive_between_windows(self, flat_2pi):
        # eps = 0.015 sits between the (2,115) and (2,116) windows
        m, j = divisor_min(0.015, 2, flat_2pi)
        assert m > 0.0
        assert j in (115, 116)

    def test_scan_law_floor(self, flat_2pi):
        # 100 seeded non-resonant draws: min of m_k k^gamma / eps^(l-1) > 0
        params = ResonanceParams()
        table = DivisorTable.build(flat_2pi, K_max=3, J_max=4000)
        gen = np.random.default_rng(314159)
        consts = []
        n = 0
        while n < 100:
            eps = float(gen.uniform(0.03, 0.2))
            rep = is_resonant(eps, params, table, k_range=3)
            if rep.resonant:
                continue
            n += 1
            for k in (2, 3):
                m, _ = divisor_min(eps, k, flat_2pi)
                consts.append(m * k**params.gamma / eps ** (params.l - 1.0))
        floor = min(consts)
        assert floor > 0.05
