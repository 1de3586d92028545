import numpy as np
import pytest

from starkmagic.errors import ConfigError, ResourceError
from starkmagic.hamiltonian import (
    ChainSpec,
    InitialStateSpec,
    LongRangeSpec,
    build_hamiltonian,
    find_z_star,
    prepare_initial_state,
)
from starkmagic.states import SeededRng, StateVector, random_state

from .conftest import dense_chain_hamiltonian


class TestBuildHamiltonian:
    def test_tilt_only_diagonal_l2(self):
        # only site 1 contributes i*Z_i; Z|0> = +1
        ham = build_hamiltonian(ChainSpec(L=2, J=0.0, h=0.0, F=1.0))
        assert np.allclose(ham.diagonal, [1.0, 1.0, -1.0, -1.0])

    def test_h_zero_matrix_is_diagonal(self):
        ham = build_hamiltonian(ChainSpec(L=3, J=1.0, h=0.0, F=0.7))
        dense = ham.dense()
        assert np.allclose(dense, np.diag(np.diag(dense)))

    def test_ferromagnetic_bond_energy(self):
        ham = build_hamiltonian(ChainSpec(L=3, J=1.0, h=0.0, F=0.0))
        assert ham.diagonal[0] == pytest.approx(2.0)

    @pytest.mark.parametrize("L", [2, 3, 4])
    def test_matches_dense_kronecker_oracle(self, L):
        spec = ChainSpec(L=L, J=0.8, h=0.6, F=0.4)
        ham = build_hamiltonian(spec)
        oracle = dense_chain_hamiltonian(L, 0.8, 0.6, 0.4)
        assert np.max(np.abs(ham.dense() - oracle)) < 1e-12
        # matvec agrees with the dense action on random vectors
        gen = np.random.default_rng(L)
        v = gen.normal(size=1 << L) + 1j * gen.normal(size=1 << L)
        assert np.max(np.abs(ham.matvec(v) - oracle @ v)) < 1e-12

    @pytest.mark.parametrize("L", [3, 4])
    def test_long_range_matches_dense_oracle(self, L):
        gen = np.random.default_rng(L + 17)
        J = gen.normal(size=(L, L))
        J = (J + J.T) / 2
        np.fill_diagonal(J, 0.0)
        spec = LongRangeSpec(L, J, h=0.3, F=0.9)
        ham = build_hamiltonian(spec)
        oracle = dense_chain_hamiltonian(L, None, 0.3, 0.9, couplings=np.triu(J))
        assert np.max(np.abs(ham.dense() - oracle)) < 1e-12

    def test_hermiticity_on_random_vectors(self):
        ham = build_hamiltonian(ChainSpec(L=4, J=1.0, h=0.5, F=0.3))
        gen = np.random.default_rng(0)
        for _ in range(5):
            a = gen.normal(size=16) + 1j * gen.normal(size=16)
            b = gen.normal(size=16) + 1j * gen.normal(size=16)
            lhs = np.vdot(a, ham.matvec(b))
            rhs = np.conj(np.vdot(b, ham.matvec(a)))
            assert abs(lhs - rhs) < 1e-12

    def test_nearest_neighbor_equals_long_range_special_case(self):
        chain = ChainSpec(L=4, J=1.3, h=0.5, F=0.2)
        lr = LongRangeSpec(4, chain.coupling_matrix(), h=0.5, F=0.2)
        a = build_hamiltonian(chain)
        b = build_hamiltonian(lr)
        assert np.allclose(a.diagonal, b.diagonal)
        assert a.x_field == b.x_field

    def test_resource_guard(self):
        with pytest.raises(ResourceError):
            build_hamiltonian(ChainSpec(L=16, J=1.0, h=1.0, F=0.0), max_qubits=14)

    def test_long_range_validation(self):
        with pytest.raises(ConfigError):
            LongRangeSpec(2, np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(ConfigError):
            LongRangeSpec(2, np.array([[1.0, 0.5], [0.5, 0.0]]))

    def test_power_law_generator(self):
        spec = LongRangeSpec.power_law(4, J0=2.0, alpha=1.0)
        assert spec.couplings[0, 1] == pytest.approx(2.0)
        assert spec.couplings[0, 2] == pytest.approx(1.0)
        assert spec.couplings[0, 3] == pytest.approx(2.0 / 3.0)
        capped = LongRangeSpec.power_law(4, J0=2.0, alpha=1.0, cutoff=1)
        assert capped.couplings[0, 2] == 0.0


class TestFindZStar:
    def test_tie_break_smallest_index_f0(self):
        # |01>,|10> give ZZ energy -1, |00>,|11> give +1: all |E| = 1 -> index 0
        star = find_z_star(ChainSpec(L=2, J=1.0, h=0.4, F=0.0))
        assert star.value == 0

    def test_tilt_only_l2(self):
        star = find_z_star(ChainSpec(L=2, J=0.0, h=0.3, F=1.0))
        assert star.value == 0

    @pytest.mark.parametrize("L", [2, 4, 6, 8, 10])
    def test_argmin_property_exhaustive(self, L):
        spec = ChainSpec(L=L, J=1.0, h=0.9, F=0.31)
        star = find_z_star(spec)
        ham = build_hamiltonian(spec)
        energies = np.abs(ham.diagonal)
        assert energies[star.value] <= energies.min() + 1e-12


class TestPrepareInitialState:
    def test_x_polarized_amplitudes(self):
        (psi,) = prepare_initial_state(InitialStateSpec("x_polarized"), 2)
        assert np.allclose(psi.amplitudes, 0.5)

    def test_y_polarized_single_site(self):
        (psi,) = prepare_initial_state(InitialStateSpec("y_polarized"), 1)
        expected = np.array([1.0, 1.0j]) / np.sqrt(2)
        assert StateVector(1, expected).fidelity(psi) > 1 - 1e-12

    def test_z_polarized(self):
        (psi,) = prepare_initial_state(InitialStateSpec("z_polarized"), 3)
        assert np.argmax(np.abs(psi.amplitudes)) == 0

    def test_z_star_uses_model(self):
        spec = ChainSpec(L=3, J=1.0, h=0.2, F=0.5)
        (psi,) = prepare_initial_state(InitialStateSpec("z_star"), 3, model=spec)
        assert np.argmax(np.abs(psi.amplitudes)) == find_z_star(spec).value
        with pytest.raises(ConfigError):
            prepare_initial_state(InitialStateSpec("z_star"), 3)

    def test_random_bloch_mean_z_vanishes(self):
        # uniform-sphere moment oracle: E[<Z>] = E[cos theta] = 0
        states = prepare_initial_state(InitialStateSpec("random_bloch", 10_000, seed=3), 1)
        z_vals = [abs(s.amplitudes[0]) ** 2 - abs(s.amplitudes[1]) ** 2 for s in states]
        mean = np.mean(z_vals)
        sigma = np.std(z_vals) / np.sqrt(len(z_vals))
        assert abs(mean) < 3 * sigma

    def test_random_bloch_deterministic_by_seed(self):
        a = prepare_initial_state(InitialStateSpec("random_bloch", 3, seed=11), 4)
        b = prepare_initial_state(InitialStateSpec("random_bloch", 3, seed=11), 4)
        for s, t in zip(a, b):
            assert np.array_equal(s.amplitudes, t.amplitudes)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            InitialStateSpec("w_polarized")
