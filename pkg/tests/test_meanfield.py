import math

import numpy as np
import pytest

from drivenxy import oracle
from drivenxy.meanfield import (
    OscillationFit,
    ProductState,
    SweepSpec,
    critical_point,
    effective_driving,
    effective_driving_all,
    evolve_to_ness,
    fit_density_oscillations,
    local_liouvillian,
    sweep_detuning,
)
from drivenxy.model import (
    SIGMA_MINUS,
    LatticeSpec,
    ModelParams,
    single_site_steady_density,
)


class TestProductState:
    def test_random_states_are_valid(self):
        rng = np.random.default_rng(0)
        state = ProductState.random(10, rng)
        state.validate()
        assert np.allclose(np.abs(state.sigma_minus()) ** 2,
                           state.densities() * (1 - state.densities()), atol=1e-12)

    def test_all_down(self):
        s = ProductState.all_down(4)
        assert np.allclose(s.densities(), 0.0)
        s.validate()

    def test_matrix_roundtrip(self):
        rng = np.random.default_rng(1)
        s = ProductState.random(3, rng)
        again = ProductState.from_matrices(s.matrices())
        assert np.allclose(again.components, s.components)


class TestEffectiveDriving:
    def test_decoupled_limit(self):
        s = ProductState.random(5, np.random.default_rng(2))
        p = ModelParams(J=0.0, Omega=0.7, Delta=0.3)
        spec = LatticeSpec.chain(5)
        assert effective_driving(s, 2, p, spec) == pytest.approx(0.7)

    def test_bulk_site_real_neighbors(self):
        # both neighbors with <sigma-> = 0.1: Omega_j = 1 - 2*0.2 = 0.6
        comp = np.zeros((3, 4), dtype=complex)
        comp[:, 0], comp[:, 2] = 0.99, 0.01
        comp[:, 3] = 0.1  # <sigma->
        comp[:, 1] = 0.1
        s = ProductState(comp)
        p = ModelParams(J=2.0, Omega=1.0, Delta=0.0)
        assert effective_driving(s, 1, p, LatticeSpec.chain(3)) == pytest.approx(0.6)

    def test_edge_site_imaginary_neighbor(self):
        comp = np.zeros((2, 4), dtype=complex)
        comp[:, 0] = 1.0
        comp[1, 3] = 0.1j
        s = ProductState(comp)
        p = ModelParams(J=2.0, Omega=1.0, Delta=0.0)
        got = effective_driving(s, 0, p, LatticeSpec.chain(2))
        assert got == pytest.approx(1.0 - 0.2j)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        s = ProductState.random(6, rng)
        p = ModelParams(J=1.3, Omega=0.8, Delta=-0.2)
        spec = LatticeSpec.chain(6)
        batch = effective_driving_all(s, p, spec.adjacency())
        each = [effective_driving(s, j, p, spec) for j in range(6)]
        assert np.allclose(batch, each)


class TestLocalLiouvillian:
    def test_pure_decay_rows(self):
        lv = local_liouvillian(0.0, ModelParams(0.0, 0.0, 0.0))
        # component order (rho00, rho01, rho11, rho10)
        assert lv[0, 2] == pytest.approx(1.0)   # drho00/dt = +gamma rho11
        assert lv[2, 2] == pytest.approx(-1.0)  # drho11/dt = -gamma rho11
        assert lv[1, 1] == pytest.approx(-0.5)  # coherences at gamma/2
        assert lv[3, 3] == pytest.approx(-0.5)

    @pytest.mark.parametrize("omega,delta", [(0.3 + 0.4j, 0.7), (1.0, -1.2), (0.0, 0.0)])
    def test_trace_preservation(self, omega, delta):
        lv = local_liouvillian(omega, ModelParams(0.0, 0.0, delta))
        assert np.max(np.abs(lv[0] + lv[2])) < 1e-14

    def test_null_space_density(self):
        # analytic steady density at Omega_j = 0.6, Delta = 0.5
        lv = local_liouvillian(0.6, ModelParams(0.0, 0.0, 0.5))
        w, v = np.linalg.eig(lv)
        k = int(np.argmin(np.abs(w)))
        ss = v[:, k] / (v[0, k] + v[2, k])
        assert ss[2].real == pytest.approx(0.36 / (0.25 + 0.25 + 0.72), abs=1e-12)
        assert ss[2].real == pytest.approx(single_site_steady_density(0.6, 0.5), abs=1e-12)

    def test_matches_generic_superoperator(self):
        # same generator via lmul/rmul in the column-stacked basis, permuted
        from drivenxy.model import COMPONENT_PERM, lmul, rmul, sandwich
        from drivenxy.model import NUMBER, SIGMA_PLUS

        omega, delta, gamma = 0.4 - 0.2j, 0.9, 1.0
        h = (delta * NUMBER.matrix + omega * SIGMA_PLUS.matrix
             + np.conj(omega) * SIGMA_MINUS.matrix)
        generic = (-1j * (lmul(h) - rmul(h))
                   + gamma * (sandwich(SIGMA_MINUS.matrix)
                              - 0.5 * lmul(NUMBER.matrix)
                              - 0.5 * rmul(NUMBER.matrix)))
        permuted = generic[np.ix_(COMPONENT_PERM, COMPONENT_PERM)]
        assert np.allclose(local_liouvillian(omega, ModelParams(0, 0, delta)),
                           permuted, atol=1e-14)


class TestEvolveToNess:
    def test_decoupled_reaches_analytic_density(self):
        p = ModelParams(J=0.0, Omega=1.0, Delta=0.0)
        spec = LatticeSpec.chain(5)
        state0 = ProductState.random(5, np.random.default_rng(4))
        state, report = evolve_to_ness(state0, p, spec, dt=2e-3, tol=1e-9, t_max=100)
        assert report.converged
        assert np.max(np.abs(state.densities() - 4.0 / 9.0)) < 1e-6

    def test_undriven_empties(self):
        p = ModelParams(J=2.0, Omega=0.0, Delta=1.0)
        spec = LatticeSpec.chain(6)
        state0 = ProductState.random(6, np.random.default_rng(5))
        state, report = evolve_to_ness(state0, p, spec, dt=2e-3, tol=1e-10, t_max=100)
        assert np.max(state.densities()) < 1e-8

    def test_state_stays_physical_along_the_way(self):
        p = ModelParams(J=2.0, Omega=1.0, Delta=0.5)
        spec = LatticeSpec.chain(8)
        state = ProductState.random(8, np.random.default_rng(6))
        for _ in range(40):
            state, _ = evolve_to_ness(state, p, spec, dt=2e-3, tol=1e-15,
                                      t_max=0.05, check_interval=0.05)
            state.validate(atol=1e-9)

    def test_decoupled_equals_dense_oracle(self):
        # J = 0: the factorized evolution is exact
        p = ModelParams(J=0.0, Omega=0.8, Delta=-0.4)
        lv = oracle.liouvillian(LatticeSpec.chain(1), p)
        ss = oracle.steady_state(lv)
        state, _ = evolve_to_ness(ProductState.all_down(3), p,
                                  LatticeSpec.chain(3), dt=2e-3, tol=1e-10,
                                  t_max=120)
        assert np.max(np.abs(state.densities() - ss.densities[0])) < 1e-8

    def test_reflection_symmetry(self):
        p = ModelParams(J=2.0, Omega=1.0, Delta=0.6)
        spec = LatticeSpec.chain(9)
        state, _ = evolve_to_ness(ProductState.all_down(9), p, spec, dt=5e-3,
                                  tol=1e-9, t_max=200)
        n = state.densities()
        assert np.max(np.abs(n - n[::-1])) < 1e-8

    def test_non_convergence_is_reported_not_raised(self):
        p = ModelParams(J=2.0, Omega=1.0, Delta=0.5)
        spec = LatticeSpec.chain(5)
        state0 = ProductState.random(5, np.random.default_rng(7))
        _, report = evolve_to_ness(state0, p, spec, dt=2e-3, tol=1e-14, t_max=2.0)
        assert not report.converged
        assert report.residual > 0

    def test_dt_does_not_move_the_fixed_point(self):
        # the update is an exact exponential of the frozen generator, so the
        # stationary state is the same for any step size
        p = ModelParams(J=1.5, Omega=1.0, Delta=0.8)
        spec = LatticeSpec.chain(7)
        s_fine, _ = evolve_to_ness(ProductState.all_down(7), p, spec,
                                   dt=2e-3, tol=1e-11, t_max=300)
        s_coarse, _ = evolve_to_ness(ProductState.all_down(7), p, spec,
                                     dt=2e-2, tol=1e-11, t_max=300)
        assert np.max(np.abs(s_fine.densities() - s_coarse.densities())) < 1e-7


class TestSweep:
    def test_grid_direction_consistency(self):
        with pytest.raises(ValueError):
            SweepSpec(grid=(1.0, 2.0), direction="rl")
        with pytest.raises(ValueError):
            SweepSpec(grid=(2.0, 1.0), direction="lr")

    def test_from_range(self):
        sw = SweepSpec.from_range(3.0, 2.9, 0.02)
        assert sw.direction == "rl"
        assert sw.anchor == 3.0
        assert len(sw.grid) == 6

    def test_small_sweep_warm_start(self):
        p = ModelParams(J=1.0, Omega=1.0, Delta=0.0)
        spec = LatticeSpec.chain(5)
        sw = SweepSpec.from_range(2.0, 1.8, 0.1, n_seeds=2)
        res = sweep_detuning(sw, p, spec, dt=5e-3, tol=1e-7, t_max=150, seed=3)
        assert res.anchor_unique
        assert [p.delta for p in res.points] == pytest.approx([2.0, 1.9, 1.8])
        assert all(p.report.converged for p in res.points)


class TestCriticalPoint:
    def test_sharp_jump_located_at_midpoint(self):
        deltas = np.array([0.0, 0.1, 0.2, 0.3, 0.4])
        nc = np.array([0.1, 0.12, 0.13, 0.45, 0.47])
        d, jump = critical_point(deltas, nc)
        assert d == pytest.approx(0.25)
        assert jump == pytest.approx(0.32)

    def test_smooth_curve_refused(self):
        deltas = np.linspace(0, 1, 11)
        nc = np.linspace(0.1, 0.4, 11)
        d, jump = critical_point(deltas, nc)
        assert d is None
        assert jump < 0.1


class TestOscillationFit:
    def test_synthetic_recovery(self):
        rng = np.random.default_rng(7)
        n = 61
        j = np.arange(1, n + 1)
        a, r, k, phi, nbar = 0.09, 6.5, 1.6, 0.8, 0.12
        profile = nbar + a * np.exp(-j / r) * np.sin(k * j + phi)
        profile = profile + 1e-6 * rng.normal(size=n)
        fit = fit_density_oscillations(profile, window=(1, 45))
        assert fit.ok
        got_a, got_phi = fit.canonical()
        want_a, want_phi = OscillationFit(a, r, k, phi, nbar, 0, True).canonical()
        assert got_a == pytest.approx(want_a, abs=1e-3)
        assert fit.decay_length == pytest.approx(r, abs=1e-3 * r)
        assert fit.wavenumber == pytest.approx(k, abs=1e-3)
        assert abs(got_phi - want_phi) < 1e-3

    def test_flat_profile_flagged(self):
        fit = fit_density_oscillations(np.full(41, 0.3))
        assert not fit.ok

    def test_noise_profile_flagged(self):
        rng = np.random.default_rng(8)
        fit = fit_density_oscillations(0.3 + 0.05 * rng.normal(size=61))
        assert not fit.ok


@pytest.mark.slow
class TestSweepPhysics:
    """Checks against the converged production sweep (session fixture)."""

    def test_high_density_profile_is_flat(self, mf_sweeps_1d):
        point = mf_sweeps_1d["rl"].point_at(1.0)
        bulk = point.densities[20:41]
        assert point.n_center > 0.4
        assert np.std(bulk) < 1e-3

    def test_low_density_fit_parameters(self, mf_sweeps_1d):
        rl = mf_sweeps_1d["rl"]
        fit1 = fit_density_oscillations(rl.point_at(-0.5).densities)
        a1, phi1 = fit1.canonical()
        assert abs(a1 - 0.08) <= 0.02
        assert abs(phi1 - (-7.9 + 2 * np.pi)) <= 0.2
        assert abs(fit1.decay_length - 7.0) <= 0.8
        assert abs(fit1.wavenumber - 1.73) <= 0.02
        fit2 = fit_density_oscillations(rl.point_at(0.2).densities)
        a2, phi2 = fit2.canonical()
        assert abs(a2 - 0.11) <= 0.02
        want_phi2 = math.remainder(-12.6 + np.pi, 2 * np.pi)  # canonical of (-0.11, -12.6)
        assert abs(phi2 - want_phi2) <= 0.2
        assert abs(fit2.decay_length - 5.6) <= 0.3
        assert abs(fit2.wavenumber - 1.48) <= 0.01

    def test_anchor_states_unique(self, mf_sweeps_1d):
        assert mf_sweeps_1d["rl"].anchor_unique
        assert mf_sweeps_1d["lr"].anchor_unique
