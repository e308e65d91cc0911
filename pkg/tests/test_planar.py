"""Limit-oscillator tests: orbits, energy, periods, monodromy."""

import numpy as np
import pytest

from kgperiodic.planar import (
    NoPeriodicOrbitError,
    PlanarState,
    find_orbit,
    h_star,
    limit_rhs,
    monodromy,
)

from oracles import duffing_period, fd_monodromy

# Period of the a = 1, f3 = 1 orbit by the energy quadrature oracle.
T_A1_ORACLE = 6.008794252858908


class TestRhsAndEnergy:
    def test_rhs_example(self):
        out = limit_rhs(PlanarState(1.0, 0.0), 1.0)
        assert (out.p, out.p_tau) == (0.0, -1.125)

    def test_equilibrium(self):
        out = limit_rhs(PlanarState(0.0, 0.0), 2.5)
        assert (out.p, out.p_tau) == (0.0, 0.0)

    def test_rhs_odd(self, rng):
        for _ in range(10):
            s = PlanarState(*rng.standard_normal(2))
            f = limit_rhs(s, 1.0)
            g = limit_rhs(PlanarState(-s.p, -s.p_tau), 1.0)
            assert (g.p, g.p_tau) == (-f.p, -f.p_tau)

    def test_h_star_values(self):
        assert h_star(PlanarState(1.0, 0.0), 1.0) == 0.53125
        assert h_star(PlanarState(0.0, 0.0), 1.0) == 0.0


class TestFindOrbit:
    def test_small_amplitude_period(self):
        orbit = find_orbit(1.0, 1e-4)
        assert orbit.period == pytest.approx(2 * np.pi, abs=1e-7)

    def test_period_matches_quadrature_oracle(self):
        orbit = find_orbit(1.0, 1.0)
        assert orbit.period == pytest.approx(T_A1_ORACLE, abs=1e-10)
        assert orbit.period == pytest.approx(duffing_period(1.0, 1.0), abs=1e-10)

    def test_period_decreasing_in_amplitude(self):
        periods = [duffing_period(a, 1.0) for a in (0.5, 1.0, 2.0)]
        found = [find_orbit(1.0, a).period for a in (0.5, 1.0, 2.0)]
        assert periods[0] > periods[1] > periods[2]
        assert np.allclose(found, periods, atol=1e-9)

    def test_energy_constant_on_samples(self):
        orbit = find_orbit(1.0, 0.9)
        energies = [h_star(PlanarState(p, q), 1.0)
                    for p, q in zip(orbit.p, orbit.p_tau)]
        assert np.max(np.abs(np.array(energies) - orbit.energy)) < 1e-10

    def test_time_reversal_symmetry(self):
        orbit = find_orbit(1.0, 0.9)
        traj = orbit.trajectory(128)
        taus = np.linspace(0.1, orbit.period / 2, 7)
        for t in taus:
            assert traj.v_at(t) == pytest.approx(traj.v_at(-t), abs=1e-10)

    def test_tangent_conormal_orthogonal(self):
        orbit = find_orbit(1.0, 1.0)
        v, vp = orbit.tangent, orbit.conormal
        assert abs(v.p * vp.p + v.p_tau * vp.p_tau) <= 1e-12

    def test_soft_potential_well_boundary(self):
        # f3 < 0: bounded orbits only below the saddle amplitude sqrt(-8/f3)
        assert find_orbit(-1.0, 0.5).period > 2 * np.pi
        with pytest.raises(NoPeriodicOrbitError):
            find_orbit(-1.0, 3.0)


class TestMonodromy:
    def test_isochronous_control(self):
        # f3 = 0 gives a linear center: M = I, degenerate by construction
        orbit = find_orbit(0.0, 1.0)
        rep = monodromy(orbit)
        assert np.allclose(rep.matrix, np.eye(2), atol=1e-9)
        assert rep.rank_deficiency_of_M_minus_I == 2
        assert not rep.nondegenerate

    def test_nondegenerate_at_a1(self):
        rep = monodromy(find_orbit(1.0, 1.0))
        for ev in rep.eigenvalues:
            assert abs(ev - 1.0) <= 1e-8
        assert rep.rank_deficiency_of_M_minus_I == 1
        assert rep.nondegenerate
        assert rep.det == pytest.approx(1.0, abs=1e-10)

    def test_matrix_against_flow_map_oracle(self):
        orbit = find_orbit(1.0, 1.0)
        rep = monodromy(orbit)
        fd = fd_monodromy(1.0, 1.0, orbit.period)
        assert np.max(np.abs(rep.matrix - fd)) < 1e-5

    def test_det_preserved_generic(self, rng):
        for a in rng.uniform(0.3, 1.5, 3):
            rep = monodromy(find_orbit(1.0, float(a)))
            assert rep.det == pytest.approx(1.0, abs=1e-10)


class TestTrajectory:
    def test_resample_consistency(self):
        orbit = find_orbit(1.0, 0.9)
        traj = orbit.trajectory(64)
        fine = traj.resample(256)
        grid = orbit.period * np.arange(256) / 256
        direct = np.array([traj.v_at(t) for t in grid])
        assert np.max(np.abs(fine - direct)) < 1e-10

    def test_export_shape(self):
        doc = find_orbit(1.0, 1.0).to_json_dict()
        assert set(doc) == {"f3", "amplitude", "period", "energy", "samples"}
        assert all(len(s) == 3 for s in doc["samples"])
