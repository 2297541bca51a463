import numpy as np
import pytest
import scipy.linalg as la

from bhlab.couplings import HOPPING, INTERACTION, CouplingMatrix, power_law_couplings
from bhlab.fock import (
    DimensionCapError,
    basis_vector,
    build_basis,
    diagonal_power,
    fixed_n_dimension,
    hamiltonian,
    hopping_operator,
    interaction_operator,
    interaction_operator_q,
    mott_state,
    number_operator,
    restrict_hamiltonian,
    shell_state,
    site_number_operator,
    state_from_json,
    state_to_json,
    truncated_dimension,
)
from bhlab.lattice import ball, chain, region


def unit_bond(lat, i, j):
    m = np.zeros((len(lat), len(lat)), dtype=complex)
    m[i, j] = m[j, i] = 1.0
    return CouplingMatrix(lat, HOPPING, m)


class TestBasis:
    def test_three_sites_two_bosons(self):
        b = build_basis(chain(3), ("fixed_n", 2))
        assert b.dim == 6 == fixed_n_dimension(3, 2)

    def test_one_site_truncated(self):
        b = build_basis(chain(1), ("truncated", 3))
        assert b.dim == 4 == truncated_dimension(1, 3)

    def test_four_sites_three_bosons(self):
        b = build_basis(chain(4), ("fixed_n", 3))
        assert b.dim == 20
        # stars-and-bars oracle: enumerate directly
        from itertools import product

        count = sum(1 for occ in product(range(4), repeat=4) if sum(occ) == 3)
        assert b.dim == count

    def test_dimension_cap(self):
        with pytest.raises(DimensionCapError):
            build_basis(chain(30), ("fixed_n", 15))

    def test_index_round_trip(self):
        b = build_basis(chain(4), ("truncated", 2))
        for k in range(b.dim):
            assert b.state_index(b.states[k]) == k

    def test_truncated_ordered_by_total(self):
        b = build_basis(chain(3), ("truncated", 2))
        assert np.all(np.diff(b.totals) >= 0)


class TestNumberOperator:
    def test_subset_entry(self):
        b = build_basis(chain(3), ("fixed_n", 3))
        op = number_operator(b, region(b.lattice, [0, 2]))
        k = b.state_index((2, 0, 1))
        assert op.diagonal()[k] == 3

    def test_empty_region_zero(self):
        b = build_basis(chain(3), ("fixed_n", 1))
        op = number_operator(b, region(b.lattice, []))
        assert op.matrix.nnz == 0

    def test_full_region_is_n_identity(self):
        b = build_basis(chain(4), ("fixed_n", 3))
        op = number_operator(b, b.lattice.full_region())
        assert np.allclose(op.diagonal(), 3.0)


class TestHopping:
    def test_single_particle_bond(self):
        lat = chain(2)
        b = build_basis(lat, ("fixed_n", 1))
        H = hopping_operator(b, unit_bond(lat, 0, 1))
        src = b.state_index((0, 1))
        dst = b.state_index((1, 0))
        assert H.matrix[dst, src] == pytest.approx(1.0)

    def test_sqrt_two_amplitude(self):
        lat = chain(3)
        b = build_basis(lat, ("fixed_n", 2))
        H = hopping_operator(b, unit_bond(lat, 0, 2))
        src = b.state_index((1, 0, 1))
        dst = b.state_index((2, 0, 0))
        assert H.matrix[dst, src] == pytest.approx(np.sqrt(2.0))

    def test_two_boson_spectrum(self):
        lat = chain(2)
        b = build_basis(lat, ("fixed_n", 2))
        H = hopping_operator(b, unit_bond(lat, 0, 1))
        w = np.sort(la.eigvalsh(H.matrix.toarray()))
        assert np.allclose(w, [-2.0, 0.0, 2.0], atol=1e-12)

    def test_hermitian_within_tolerance(self):
        lat = chain(4)
        b = build_basis(lat, ("fixed_n", 2))
        J = power_law_couplings(lat, HOPPING, 2.0, 1.3)
        H = hopping_operator(b, J)
        dev = abs(H.matrix - H.matrix.getH())
        assert dev.nnz == 0 or dev.max() <= 1e-14

    def test_wrong_kind_rejected(self):
        lat = chain(2)
        b = build_basis(lat, ("fixed_n", 1))
        V = power_law_couplings(lat, INTERACTION, 2.0, 1.0)
        with pytest.raises(ValueError):
            hopping_operator(b, V)


class TestInteraction:
    def test_onsite_pair(self):
        lat = chain(2)
        b = build_basis(lat, ("fixed_n", 2))
        m = np.zeros((2, 2))
        m[0, 0] = 3.5  # Hubbard U
        V = CouplingMatrix(lat, INTERACTION, m)
        k = b.state_index((2, 0))
        assert interaction_operator(b, V).diagonal()[k] == pytest.approx(3.5)

    def test_cross_pair(self):
        lat = chain(2)
        b = build_basis(lat, ("fixed_n", 2))
        m = np.array([[0.0, 0.7], [0.7, 0.0]])
        V = CouplingMatrix(lat, INTERACTION, m)
        k = b.state_index((1, 1))
        assert interaction_operator(b, V).diagonal()[k] == pytest.approx(0.7)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        lat = chain(4)
        b = build_basis(lat, ("fixed_n", 3))
        m = rng.normal(size=(4, 4))
        m = (m + m.T) / 2
        V = CouplingMatrix(lat, INTERACTION, m)
        diag = interaction_operator(b, V).diagonal().real
        for k in range(b.dim):
            occ = b.states[k].astype(float)
            want = 0.5 * sum(
                m[x, y] * occ[x] * occ[y] for x in range(4) for y in range(4) if x != y
            ) + 0.5 * sum(m[x, x] * occ[x] * (occ[x] - 1) for x in range(4))
            assert diag[k] == pytest.approx(want, abs=1e-12)

    def test_q_term_example(self):
        lat = chain(2)
        b = build_basis(lat, ("fixed_n", 3))
        m = np.array([[0.0, 1.0], [1.0, 0.0]])
        V = CouplingMatrix(lat, INTERACTION, m)
        k = b.state_index((2, 1))
        assert interaction_operator_q(b, V, 2).diagonal()[k] == pytest.approx(2.0)

    def test_q_term_brute_force(self):
        rng = np.random.default_rng(11)
        lat = chain(3)
        b = build_basis(lat, ("fixed_n", 2))
        m = rng.normal(size=(3, 3))
        m = (m + m.T) / 2
        V = CouplingMatrix(lat, INTERACTION, m)
        q = 3
        diag = interaction_operator_q(b, V, q).diagonal().real
        for k in range(b.dim):
            occ = b.states[k].astype(float)
            want = 0.5 * sum(
                m[x, y] * occ[x] ** (q / 2) * occ[y] ** (q / 2)
                for x in range(3)
                for y in range(3)
            )
            assert diag[k] == pytest.approx(want, abs=1e-12)


class TestHamiltonianAssembly:
    def test_restrict_full_is_identity(self):
        lat = chain(4)
        b = build_basis(lat, ("fixed_n", 2))
        J = power_law_couplings(lat, HOPPING, 2.0, 1.0)
        V = power_law_couplings(lat, INTERACTION, 2.0, 0.5, onsite=1.0)
        full = hamiltonian(b, J, V)
        restr = restrict_hamiltonian(J, V, lat.full_region(), b)
        assert abs(full.matrix - restr.matrix).max() <= 1e-14

    def test_restrict_singleton_no_hopping(self):
        lat = chain(4)
        b = build_basis(lat, ("fixed_n", 2))
        J = power_law_couplings(lat, HOPPING, 2.0, 1.0)
        H = restrict_hamiltonian(J, None, region(lat, [1]), b)
        assert H.matrix.nnz == 0

    def test_restrict_half_chain_oracle(self):
        lat = chain(6)
        b = build_basis(lat, ("fixed_n", 2))
        J = power_law_couplings(lat, HOPPING, 2.0, 1.0)
        V = power_law_couplings(lat, INTERACTION, 2.0, 0.5)
        got = restrict_hamiltonian(J, V, region(lat, [0, 1, 2]), b)
        want = hamiltonian(b, J.masked([0, 1, 2]), V.masked([0, 1, 2]))
        assert abs(got.matrix - want.matrix).max() <= 1e-14

    def test_block_diagonal_in_total_number(self):
        lat = chain(3)
        b = build_basis(lat, ("truncated", 3))
        J = power_law_couplings(lat, HOPPING, 2.0, 1.0)
        V = power_law_couplings(lat, INTERACTION, 2.0, 0.5, onsite=1.0)
        H = hamiltonian(b, J, V).matrix.tocoo()
        assert np.all(b.totals[H.row] == b.totals[H.col])


class TestStates:
    def test_mott_vector(self):
        b = build_basis(chain(3), ("fixed_n", 3))
        psi = mott_state(b, 1)
        assert psi.amplitudes[b.state_index((1, 1, 1))] == 1.0
        assert psi.norm() == 1.0

    def test_mott_ball_moments_deterministic(self):
        b = build_basis(chain(5), ("fixed_n", 5))
        psi = mott_state(b, 1)
        for r in (0, 1, 2):
            B = ball(b.lattice, [2], r)
            for p in (1, 2, 3):
                op = diagonal_power(number_operator(b, B), p)
                assert op.expectation(psi).real == pytest.approx(float(len(B)) ** p)

    def test_mott_hop_expectation_zero(self):
        lat = chain(3)
        b = build_basis(lat, ("fixed_n", 3))
        J = power_law_couplings(lat, HOPPING, 2.0, 1.0)
        psi = mott_state(b, 1)
        assert abs(hopping_operator(b, J).expectation(psi)) <= 1e-14

    def test_mott_sector_mismatch(self):
        b = build_basis(chain(3), ("fixed_n", 2))
        with pytest.raises(ValueError):
            mott_state(b, 1)

    def test_shell_state_valid(self):
        lat = chain(9)
        b = build_basis(lat, ("truncated", 2))
        X = region(lat, [0])
        psi = shell_state(b, X, 1.5, [1, 0, 0, 0, 0, 0, 0, 0, 1])
        shell = region(lat, [1, 2, 3])
        assert number_operator(b, shell).expectation(psi).real == pytest.approx(0.0)

    def test_shell_state_populated_shell_errors(self):
        lat = chain(9)
        b = build_basis(lat, ("truncated", 2))
        X = region(lat, [0])
        with pytest.raises(ValueError):
            shell_state(b, X, 1.5, [1, 0, 1, 0, 0, 0, 0, 0, 0])

    def test_all_particles_inside_x(self):
        lat = chain(6)
        b = build_basis(lat, ("truncated", 2))
        X = region(lat, [0, 1])
        psi = shell_state(b, X, 2.0, [1, 1, 0, 0, 0, 0])
        assert psi.norm() == 1.0

    def test_json_round_trip(self):
        b = build_basis(chain(3), ("fixed_n", 2))
        rng = np.random.default_rng(3)
        v = rng.normal(size=b.dim) + 1j * rng.normal(size=b.dim)
        from bhlab.fock import QuantumState

        psi = QuantumState(b, v)
        back = state_from_json(b, state_to_json(psi))
        assert np.allclose(back.amplitudes, psi.amplitudes)

    def test_site_number_matches_region(self):
        b = build_basis(chain(4), ("fixed_n", 2))
        a = site_number_operator(b, 2).diagonal()
        c = number_operator(b, region(b.lattice, [2])).diagonal()
        assert np.array_equal(a, c)
