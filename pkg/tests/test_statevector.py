import numpy as np
import pytest

from oracles import fd_derivative_states, fd_gradient, random_instance, ref_state
from qaoa_overparam.errors import DimensionMismatchError
from qaoa_overparam.problems import DiagonalHamiltonian, maxcut_hamiltonian, ring_graph
from qaoa_overparam.statevector import (
    ParameterVector,
    apply_layer,
    derivative_states,
    energy,
    energy_and_gradient,
    energy_and_gradient_batch,
    energy_gradient,
    expectation,
    ground_overlap,
    mixer_spectrum,
    phase_table,
    plus_state,
    qaoa_state,
    wht,
)
from qaoa_overparam.theory import ring_analytic_angles


class TestParameterVector:
    def test_flat_order(self):
        pv = ParameterVector([1.0, 2.0], [3.0, 4.0])
        assert pv.to_array().tolist() == [1.0, 3.0, 2.0, 4.0]
        assert ParameterVector.from_array(pv.to_array()).to_list() == pv.to_list()

    def test_canonical_domain(self):
        pv = ParameterVector([-1.0, 7.0], [4.0, -0.5]).canonical()
        assert np.all((pv.gammas >= 0) & (pv.gammas < 2 * np.pi))
        assert np.all((pv.betas >= 0) & (pv.betas < np.pi))

    def test_random_domain(self, rng):
        pv = ParameterVector.random(200, rng)
        assert pv.gammas.max() < 2 * np.pi and pv.betas.max() < np.pi
        assert pv.gammas.min() >= 0 and pv.betas.min() >= 0

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            ParameterVector([1.0], [1.0, 2.0])

    def test_odd_flat_array(self):
        with pytest.raises(ValueError):
            ParameterVector.from_array([1.0, 2.0, 3.0])

    def test_immutable(self):
        pv = ParameterVector([1.0], [2.0])
        with pytest.raises(ValueError):
            pv.gammas[0] = 0.0


class TestTransform:
    @pytest.mark.parametrize("n", [1, 3, 6, 7, 9, 12, 17])
    def test_self_inverse(self, n, rng):
        v = rng.normal(size=(1 << n, 2)) + 1j * rng.normal(size=(1 << n, 2))
        assert np.allclose(wht(wht(v, n), n), v)

    @pytest.mark.parametrize("n", [2, 5, 8, 10])
    def test_diagonalizes_mixer(self, n, rng):
        # W (sum_j X_j) W = diag(n - 2 popcount)
        v = rng.normal(size=1 << n) + 0j
        idx = np.arange(1 << n)
        hx_v = sum(v[idx ^ (1 << j)] for j in range(n))
        assert np.allclose(wht(hx_v, n), mixer_spectrum(n) * wht(v, n))

    def test_phase_table(self):
        vals = np.array([0.0, 1.0, 1.0, -2.0])
        ang = np.array([0.3, 1.1])
        assert np.allclose(phase_table(vals, ang), np.exp(-1j * np.outer(ang, vals)))


class TestQaoaState:
    def test_depth_zero_uniform(self):
        h = maxcut_hamiltonian(ring_graph(3))
        psi = qaoa_state(h, ParameterVector.empty())
        assert np.allclose(psi, 1 / np.sqrt(8))

    def test_zero_angles_identity(self, ring4):
        psi = qaoa_state(ring4, ParameterVector([0.0], [0.0]))
        assert np.allclose(psi, plus_state(4))

    def test_matches_rotation_reference(self, rng):
        for n in range(2, 7):
            h = random_instance(rng, n)
            pv = ParameterVector.random(3, rng)
            ref = ref_state(h.cost, n, pv.gammas, pv.betas)
            assert np.allclose(qaoa_state(h, pv), ref, atol=1e-12)

    def test_ring6_analytic_energy(self):
        h = maxcut_hamiltonian(ring_graph(6))
        psi = qaoa_state(h, ring_analytic_angles(6).params)
        assert abs(expectation(psi, h) + 6) < 1e-10

    def test_norm_preserved(self, rng):
        for n in (3, 7, 10):
            h = random_instance(rng, n)
            psi = qaoa_state(h, ParameterVector.random(5, rng))
            assert abs(np.vdot(psi, psi).real - 1) < 1e-12

    def test_gamma_periodicity(self, rng):
        h = random_instance(rng, 5)
        pv = ParameterVector.random(3, rng)
        shifted = ParameterVector(pv.gammas + 2 * np.pi, pv.betas)
        assert np.max(np.abs(qaoa_state(h, pv) - qaoa_state(h, shifted))) < 1e-12

    def test_layer_composability(self, rng):
        h = random_instance(rng, 5)
        pv = ParameterVector.random(4, rng)
        short = ParameterVector(pv.gammas[:3], pv.betas[:3])
        step = apply_layer(h, qaoa_state(h, short), pv.gammas[3], pv.betas[3])
        assert np.max(np.abs(step - qaoa_state(h, pv))) < 1e-12

    def test_dimension_mismatch(self, ring4):
        with pytest.raises(DimensionMismatchError):
            expectation(np.ones(8) / np.sqrt(8), ring4)
        with pytest.raises(DimensionMismatchError):
            apply_layer(ring4, np.ones(8), 0.1, 0.2)

    def test_state_read_only(self, ring4):
        psi = qaoa_state(ring4, ParameterVector([0.1], [0.2]))
        with pytest.raises(ValueError):
            psi[0] = 0


class TestExpectation:
    def test_uniform_ring4(self, ring4):
        assert abs(expectation(plus_state(4), ring4)) < 1e-15

    def test_ground_basis_state(self, ring4):
        e = np.zeros(16, dtype=complex)
        e[0b0101] = 1
        assert expectation(e, ring4) == -4

    def test_ring8_analytic(self):
        h = maxcut_hamiltonian(ring_graph(8))
        assert abs(expectation(qaoa_state(h, ring_analytic_angles(8).params), h) + 8) < 1e-10


class TestGroundOverlap:
    def test_uniform_ring4(self, ring4):
        assert abs(ground_overlap(plus_state(4), ring4) - 0.125) < 1e-15

    def test_outside_ground_space(self, ring4):
        e = np.zeros(16, dtype=complex)
        e[0] = 1
        assert ground_overlap(e, ring4) == 0

    def test_optimal_state_full_overlap(self):
        h = maxcut_hamiltonian(ring_graph(6))
        psi = qaoa_state(h, ring_analytic_angles(6).params)
        assert abs(ground_overlap(psi, h) - 1) < 1e-9


class TestGradient:
    def test_ring4_identity_beta_zero(self, ring4):
        g = energy_gradient(ring4, ParameterVector([0.0], [0.0]))
        fd = fd_gradient(ring4.cost, 4, [0.0, 0.0])
        assert abs(g[1]) < 1e-12
        assert np.allclose(g, fd, atol=1e-6)

    def test_fifty_random_pairs(self, rng):
        # h = 1e-4 truncation error grows like h^2 |H|^3 p, so keep spectra moderate
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(2, 6))
            h = random_instance(rng, n)
            theta = ParameterVector.random(int(rng.integers(1, 4)), rng).to_array()
            _, g = energy_and_gradient(h, theta)
            worst = max(worst, np.abs(g - fd_gradient(h.cost, n, theta)).max())
        assert worst <= 1e-6

    def test_wide_spectra_fine_step(self, rng):
        for _ in range(10):
            n = int(rng.integers(5, 8))
            h = random_instance(rng, n)
            theta = ParameterVector.random(5, rng).to_array()
            _, g = energy_and_gradient(h, theta)
            assert np.abs(g - fd_gradient(h.cost, n, theta, h=1e-5)).max() <= 1e-7

    def test_batch_matches_single(self, rng):
        h = random_instance(rng, 7)
        thetas = np.array([ParameterVector.random(6, rng).to_array() for _ in range(5)])
        e, g = energy_and_gradient_batch(h, thetas)
        for i in range(5):
            ei, gi = energy_and_gradient(h, thetas[i])
            assert abs(e[i] - ei) < 1e-12
            assert np.abs(g[i] - gi).max() < 1e-12
            assert abs(energy(h, thetas[i]) - ei) < 1e-12

    def test_large_register_butterfly_path(self, rng):
        h = random_instance(rng, 17)
        theta = ParameterVector.random(1, rng).to_array()
        e, g = energy_and_gradient(h, theta)
        step = 1e-5
        for j in range(2):
            d = np.zeros(2)
            d[j] = step
            fd = (energy(h, theta + d) - energy(h, theta - d)) / (2 * step)
            assert abs(fd - g[j]) < 1e-5

    def test_zero_hamiltonian(self):
        h = DiagonalHamiltonian(3, np.zeros(8))
        e, g = energy_and_gradient(h, np.array([0.4, 0.2, 1.0, 2.0]))
        assert e == 0 and np.all(g == 0)


class TestDerivativeStates:
    def test_gamma_derivative_at_identity(self, ring4):
        d = derivative_states(ring4, ParameterVector([0.0], [0.0]))
        assert np.allclose(d[0], -1j * ring4.cost * plus_state(4))

    def test_overlap_purely_imaginary(self, rng):
        h = random_instance(rng, 5)
        pv = ParameterVector.random(3, rng)
        ov = derivative_states(h, pv) @ qaoa_state(h, pv).conj()
        assert np.abs(ov.real).max() < 1e-10

    def test_matches_finite_differences(self, rng):
        h = maxcut_hamiltonian(ring_graph(6))
        pv = ParameterVector.random(3, rng)
        d = derivative_states(h, pv)
        fd = fd_derivative_states(h.cost, 6, pv.to_array())
        assert np.abs(d - fd).max() < 1e-6

    def test_shape(self, ring4):
        assert derivative_states(ring4, ParameterVector.random(3, np.random.default_rng(0))).shape == (6, 16)
