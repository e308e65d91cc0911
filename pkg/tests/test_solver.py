"""Residual/linearization assembly and the nested-truncation solver."""

import numpy as np
import pytest

from kgperiodic.divisors import (
    HillSpectrum,
    ResonanceError,
    ResonanceParams,
    epsilon_kj,
)
from kgperiodic.fourier import SpaceTimeField
from kgperiodic.normalform import projected_g
from kgperiodic.solver import (
    FITTED_C,
    NearSingularError,
    SolverConfig,
    _linear_symbol,
    _pack,
    _unpack,
    assemble_F,
    assemble_L,
    invert_L_N,
    nash_moser_solve,
    oracle_jacobian,
    oracle_newton_solve,
    resonance_gate,
    schedule_for,
    sigma_min_law_samples,
)

EPS = 0.1


@pytest.fixture(scope="module")
def traj(orbit09):
    return orbit09.trajectory(256)


def small_field(gen, period, N_tau=6, N_x=5, scale=1e-2):
    coeffs = scale * gen.standard_normal((N_tau + 1, N_x + 1))
    coeffs[:, :2] = 0.0
    return SpaceTimeField(period=period, coeffs=coeffs)


class TestAssembleF:
    def test_model_none_is_diagonal_symbol(self, traj):
        p = traj.period
        coeffs = np.zeros((5, 6))
        coeffs[2, 3] = 1.0
        w = SpaceTimeField(period=p, coeffs=coeffs)
        F = assemble_F(traj, w, EPS, None)
        expected = 1.0 / (1.0 + EPS**2) - 9.0 + EPS**2 * (4.0 * np.pi / p) ** 2
        assert F.coeffs[2, 3] == pytest.approx(expected, rel=1e-14)
        mask = np.ones_like(F.coeffs, dtype=bool)
        mask[2, 3] = False
        assert np.max(np.abs(F.coeffs[mask])) == 0.0

    def test_zero_field_model_none_is_zero(self, traj):
        w = SpaceTimeField(period=traj.period, coeffs=np.zeros((4, 5)))
        F = assemble_F(traj, w, EPS, None)
        assert np.max(np.abs(F.coeffs)) == 0.0

    def test_zero_field_gives_scaled_drive(self, traj, sine_gordon):
        # F(0) = eps^2 * g(v, 0): the linear part vanishes at w = 0
        N_tau, N_x = 8, 6
        w = SpaceTimeField(period=traj.period,
                           coeffs=np.zeros((N_tau + 1, N_x + 1)))
        F = assemble_F(traj, w, EPS, sine_gordon, M_tau=128, M_x=64)
        g = projected_g(traj, EPS, sine_gordon, N_x=N_x, N_tau=N_tau,
                        M_tau=128, M_x=64)
        assert np.max(np.abs(F.coeffs - EPS**2 * g.coeffs)) < 1e-15


class TestAssembleL:
    def test_symmetry(self, traj, sine_gordon, rng):
        w = small_field(rng, traj.period)
        L = assemble_L(traj, w, EPS, sine_gordon, N=5, N_tau=6)
        assert np.max(np.abs(L - L.T)) < 1e-13 * np.max(np.abs(L))

    def test_model_none_exactly_diagonal(self, traj):
        w = SpaceTimeField(period=traj.period, coeffs=np.zeros((7, 6)))
        L = assemble_L(traj, w, EPS, None, N=5)
        sym = _linear_symbol(traj.period, EPS, 6, 5)[:, 2:]
        assert np.array_equal(np.diag(L), sym.ravel())
        off = L - np.diag(np.diag(L))
        assert np.max(np.abs(off)) == 0.0

    def test_fd_linearization_quartic_decay(self, traj, sine_gordon, rng):
        # F(w0 + t h) - F(w0) - t L h = O(t^2): halving t quarters the error
        p = traj.period
        w0 = small_field(rng, p)
        h = small_field(rng, p)
        grids = dict(M_tau=256, M_x=64)
        F0 = assemble_F(traj, w0, EPS, sine_gordon, **grids)
        L = assemble_L(traj, w0, EPS, sine_gordon, N=5, N_tau=6, **grids)
        Lh = L @ _pack(h.coeffs, 5)

        def remainder(t):
            Ft = assemble_F(traj, w0 + t * h, EPS, sine_gordon, **grids)
            return np.linalg.norm(_pack(Ft.coeffs - F0.coeffs, 5) - t * Lh)

        ratio = remainder(1e-2) / remainder(5e-3)
        assert 3.5 < ratio < 4.5

    def test_matches_fd_jacobian(self, traj, sine_gordon, rng):
        p = traj.period
        N, J = 3, 4

        def F_vec(u):
            w = _unpack(u, p, N, J, N)
            F = assemble_F(traj, w, EPS, sine_gordon)
            return _pack(F.coeffs, N)

        u0 = 1e-2 * rng.standard_normal((J + 1) * (N - 1))
        J_fd = oracle_jacobian(F_vec, u0, h=1e-6)
        w0 = _unpack(u0, p, N, J, N)
        L = assemble_L(traj, w0, EPS, sine_gordon, N=N, N_tau=J)
        assert np.max(np.abs(J_fd - L)) < 1e-8


class TestInvertLN:
    def test_solves_and_reports(self, rng):
        A = rng.standard_normal((8, 8))
        L = A @ A.T + 8.0 * np.eye(8)
        rhs = rng.standard_normal(8)
        x, rep = invert_L_N(L, rhs, EPS, ResonanceParams())
        assert np.allclose(L @ x, rhs, atol=1e-12)
        assert rep.N == 8 and rep.size == 8
        params = ResonanceParams()
        expected = rep.sigma_min * 8.0**params.gamma / EPS ** (params.l - 1.0)
        assert rep.law_constant == pytest.approx(expected, rel=1e-14)
        assert rep.ratio_vs_fit == pytest.approx(rep.law_constant / FITTED_C)

    def test_near_singular_names_culprit(self):
        spec = HillSpectrum.flat(2.0 * np.pi, 200)
        center = epsilon_kj(2, 115, spec)
        L = np.diag([1.0, 1e-20])
        with pytest.raises(NearSingularError) as info:
            invert_L_N(L, np.ones(2), center, ResonanceParams(), N=2,
                       spectrum=spec)
        assert info.value.culprit == (2, 115)
        assert "(k, j)" in str(info.value)


class TestSchedule:
    def test_growth_and_cap(self):
        cfg = SolverConfig()
        req, eff = schedule_for(0.5, cfg)
        assert req == (3, 9, 81)
        assert eff == (3, 9, 64)
        req, eff = schedule_for(0.1, cfg)
        assert req[0] in (54, 55)            # floor((1/eps + 1/eps^2)/2)
        assert req[1] == req[0] ** 2
        assert eff[-1] == cfg.N_cap
        assert all(b > a for a, b in zip(eff, eff[1:]))
        assert all(n <= cfg.N_cap for n in eff)

    def test_explicit_passthrough(self):
        cfg = SolverConfig(schedule=(6, 12))
        assert schedule_for(0.07, cfg) == ((6, 12), (6, 12))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(sigma=2.0)          # needs sigma > gamma + l
        with pytest.raises(ValueError):
            SolverConfig(bar_s=6.0)          # needs bar_s > 4 gamma + 2 sigma
        with pytest.raises(ValueError):
            SolverConfig(schedule=(4, 4))
        with pytest.raises(ValueError):
            SolverConfig(schedule=(1, 8))

    def test_eps_domain(self, traj):
        cfg = SolverConfig(schedule=(3,), N_tau=2, check_resonance=False)
        with pytest.raises(ValueError):
            nash_moser_solve(traj, 1.5, cfg, None)


class TestSolveOracle:
    def test_miniature_truncation_matches_oracle(self, traj, sine_gordon):
        cfg = SolverConfig(schedule=(3,), N_tau=4, nf_steps=0,
                           check_resonance=False, residual_tol=1e-12)
        run = nash_moser_solve(traj, EPS, cfg, sine_gordon)
        ref = oracle_newton_solve(traj, EPS, N=3, J_max=4, model=sine_gordon,
                                  tol=1e-12)
        assert run.converged
        assert np.max(np.abs(run.w.coeffs - ref.coeffs)) < 1e-9

    def test_canonical_run_reports(self, closure01):
        run = closure01.run
        assert run.converged and run.resonance_checked
        assert run.residual_certificate < 1e-9
        assert run.effective_schedule[-1] == 64
        assert run.N_tau == 40
        # stage records carry the inverse-norm law constants
        for stage in run.stages:
            assert stage.law_constant >= FITTED_C
            assert stage.residual_s <= 1e-10
        # increments contract between nested truncations
        incs = [s.increment_norm_s for s in run.stages]
        assert incs[-1] < incs[0]

    def test_inverse_norm_law_floor(self, sine_gordon):
        reports = sigma_min_law_samples(sine_gordon, n_samples=4, seed=7)
        assert len(reports) == 4
        assert min(r.law_constant for r in reports) >= FITTED_C
        assert all(r.ratio_vs_fit >= 1.0 for r in reports)


class TestResonanceGateEndToEnd:
    def test_gate_passes_fixture_point(self, traj, sine_gordon):
        report, spectrum, table = resonance_gate(traj, EPS, sine_gordon, K=8,
                                                 params=ResonanceParams())
        assert not report.resonant
        assert spectrum.period == pytest.approx(traj.period)

    def test_gate_blocks_window_center(self, traj, sine_gordon):
        # eps sitting inside the (k=2, j=12) window of the a = 0.9 potential
        with pytest.raises(ResonanceError) as info:
            resonance_gate(traj, 0.1396532019663832, sine_gordon, K=8,
                           params=ResonanceParams())
        assert info.value.report is not None
        assert (info.value.report.nearest_k, info.value.report.nearest_j) == (2, 12)
