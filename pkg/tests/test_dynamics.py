import numpy as np
import pytest
import scipy.linalg as la

from bhlab.couplings import HOPPING, INTERACTION, CouplingMatrix, power_law_couplings
from bhlab.dynamics import (
    Propagator,
    Trajectory,
    evolve,
    heisenberg_expectation,
    localized_heisenberg,
    one_body_density_oracle,
    operator_support_violation,
    remainder_pairings,
)
from bhlab.fock import (
    QuantumState,
    basis_vector,
    build_basis,
    hamiltonian,
    number_operator,
    restrict_hamiltonian,
    shell_state,
    site_number_operator,
)
from bhlab.lattice import centered_chain, chain, fatten, region


def unit_bond(lat, i, j):
    m = np.zeros((len(lat), len(lat)), dtype=complex)
    m[i, j] = m[j, i] = 1.0
    return CouplingMatrix(lat, HOPPING, m)


def two_site_rabi():
    lat = chain(2)
    b = build_basis(lat, ("fixed_n", 1))
    H = hamiltonian(b, unit_bond(lat, 0, 1))
    return b, Propagator(H)


class TestEvolve:
    def test_t_zero_identity(self):
        b, prop = two_site_rabi()
        psi = basis_vector(b, (1, 0))
        out = evolve(prop, psi, 0.0)
        assert np.array_equal(out.amplitudes, psi.amplitudes)

    def test_rabi_quarter_period(self):
        b, prop = two_site_rabi()
        psi = basis_vector(b, (1, 0))
        n0 = site_number_operator(b, 0)
        out = evolve(prop, psi, np.pi / 2)
        assert abs(n0.expectation(out).real) < 1e-10

    def test_rabi_analytic_curve(self):
        b, prop = two_site_rabi()
        psi = basis_vector(b, (1, 0))
        n0 = site_number_operator(b, 0)
        for t in np.linspace(0, 3, 13):
            got = n0.expectation(evolve(prop, psi, t)).real
            assert got == pytest.approx(np.cos(t) ** 2, abs=1e-10)

    def test_diagonal_flow_phases_only(self):
        lat = chain(3)
        b = build_basis(lat, ("fixed_n", 2))
        V = power_law_couplings(lat, INTERACTION, 2.0, 1.0, onsite=2.0)
        prop = Propagator(hamiltonian(b, None, V))
        rng = np.random.default_rng(0)
        v = rng.normal(size=b.dim) + 1j * rng.normal(size=b.dim)
        psi = QuantumState(b, v / np.linalg.norm(v))
        out = evolve(prop, psi, 0.8)
        assert np.allclose(np.abs(out.amplitudes), np.abs(psi.amplitudes), atol=1e-12)

    def test_infinite_time_rejected(self):
        b, prop = two_site_rabi()
        with pytest.raises(ValueError):
            evolve(prop, basis_vector(b, (1, 0)), np.inf)

    def test_unitarity_and_time_reversal(self):
        lat = chain(5)
        b = build_basis(lat, ("fixed_n", 2))
        J = power_law_couplings(lat, HOPPING, 2.5, 1.0)
        V = power_law_couplings(lat, INTERACTION, 2.5, 0.5, onsite=1.0)
        prop = Propagator(hamiltonian(b, J, V))
        psi = basis_vector(b, (1, 0, 0, 1, 0))
        fwd = evolve(prop, psi, 1.7)
        assert abs(fwd.norm() - 1.0) < 1e-9
        back = evolve(prop, fwd, -1.7)
        assert np.abs(back.amplitudes - psi.amplitudes).max() < 1e-8


class TestKrylov:
    def test_matches_dense(self):
        lat = chain(6)
        b = build_basis(lat, ("fixed_n", 3))  # dim 56
        J = power_law_couplings(lat, HOPPING, 2.5, 1.0)
        V = power_law_couplings(lat, INTERACTION, 2.5, 0.5, onsite=1.0)
        H = hamiltonian(b, J, V)
        psi = basis_vector(b, (1, 1, 1, 0, 0, 0))
        for t in (0.3, 1.1, 2.4):
            a = evolve(Propagator(H, method="dense_eigen"), psi, t)
            c = evolve(Propagator(H, method="krylov"), psi, t)
            assert np.abs(a.amplitudes - c.amplitudes).max() < 1e-8

    def test_auto_selects_dense_below_threshold(self):
        b, prop = two_site_rabi()
        assert prop.method == "dense_eigen"

    def test_non_hermitian_rejected(self):
        import scipy.sparse as sp

        from bhlab.fock import SparseOperator

        b = build_basis(chain(2), ("fixed_n", 1))
        m = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
        A = SparseOperator(b, m, hermitian=False)
        with pytest.raises(ValueError):
            Propagator(A)


class TestTrajectory:
    def test_strictly_increasing_required(self):
        with pytest.raises(ValueError):
            Trajectory(np.array([0.0, 0.0, 1.0]), {})

    def test_conserved_quantities(self):
        lat = chain(4)
        b = build_basis(lat, ("fixed_n", 2))
        J = power_law_couplings(lat, HOPPING, 2.5, 1.0)
        V = power_law_couplings(lat, INTERACTION, 2.5, 0.5, onsite=1.0)
        H = hamiltonian(b, J, V)
        prop = Propagator(H)
        psi = basis_vector(b, (1, 1, 0, 0))
        times = np.linspace(0, 2, 9)
        N = number_operator(b, lat.full_region())
        traj = heisenberg_expectation(prop, {"N": N, "H": H}, psi, times)
        assert np.allclose(traj.real("N"), 2.0, atol=1e-9)
        e0 = traj.real("H")[0]
        assert np.allclose(traj.real("H"), e0, atol=1e-8 * max(1.0, abs(e0)))

    def test_rabi_cos_squared(self):
        b, prop = two_site_rabi()
        psi = basis_vector(b, (1, 0))
        times = np.linspace(0, np.pi, 17)
        traj = heisenberg_expectation(prop, site_number_operator(b, 0), psi, times)
        assert np.allclose(traj.real("A"), np.cos(times) ** 2, atol=1e-10)


class TestLocalizedHeisenberg:
    def setup_method(self):
        self.lat = chain(6)
        self.b = build_basis(self.lat, ("fixed_n", 2))
        self.J = power_law_couplings(self.lat, HOPPING, 3.0, 1.0)
        self.V = power_law_couplings(self.lat, INTERACTION, 3.0, 0.5, onsite=1.0)
        self.psi = basis_vector(self.b, (1, 0, 0, 0, 0, 1))
        self.A = site_number_operator(self.b, 0)

    def test_saturated_equals_full(self):
        X = region(self.lat, [0])
        S = fatten(X, 10.0)
        propS = Propagator(restrict_hamiltonian(self.J, self.V, S, self.b))
        prop = Propagator(hamiltonian(self.b, self.J, self.V))
        s = 0.9
        loc = localized_heisenberg(propS, self.A, self.psi, s)
        full = self.A.expectation(evolve(prop, self.psi, s))
        assert abs(loc - full) < 1e-10

    def test_s_zero(self):
        S = fatten(region(self.lat, [0]), 2.0)
        propS = Propagator(restrict_hamiltonian(self.J, self.V, S, self.b))
        got = localized_heisenberg(propS, self.A, self.psi, 0.0)
        assert got == pytest.approx(self.A.expectation(self.psi))

    def test_against_dense_expm_oracle(self):
        S = fatten(region(self.lat, [0]), 2.0)
        HS = restrict_hamiltonian(self.J, self.V, S, self.b)
        propS = Propagator(HS)
        s = 0.6
        got = localized_heisenberg(propS, self.A, self.psi, s)
        U = la.expm(-1j * HS.matrix.toarray() * s)
        v = U @ self.psi.amplitudes
        want = np.vdot(v, self.A.matrix @ v)
        assert abs(got - want) < 1e-10

    def test_support_violation_detected(self):
        S = region(self.lat, [0, 1])
        propS = Propagator(restrict_hamiltonian(self.J, self.V, S, self.b))
        leaky = site_number_operator(self.b, 4)
        with pytest.raises(ValueError):
            localized_heisenberg(propS, leaky, self.psi, 0.5, support=S)

    def test_support_checker_clean_for_local_ops(self):
        X = region(self.lat, [0, 1])
        hop = unit_bond(self.lat, 0, 1)
        from bhlab.fock import hopping_operator

        A = hopping_operator(self.b, hop)
        assert operator_support_violation(A, X) <= 1e-14


class TestRemainderPairings:
    def setup_method(self):
        self.lat = centered_chain(9)
        self.b = build_basis(self.lat, ("truncated", 2))
        self.J = power_law_couplings(self.lat, HOPPING, 6.0, 64.0)
        self.V = power_law_couplings(self.lat, INTERACTION, 6.0, 32.0, onsite=1.0)
        self.X = region(self.lat, [0])
        self.Y = region(self.lat, [7, 8])
        self.A = site_number_operator(self.b, 0)
        from bhlab.fock import hopping_operator

        self.B = hopping_operator(self.b, unit_bond(self.lat, 7, 8))
        self.psi = shell_state(self.b, self.X, 1.0, [1, 0, 0, 0, 0, 0, 0, 0, 1])

    def test_t_zero_all_zero(self):
        out = remainder_pairings(
            self.b, self.J, self.V, self.A, self.X, self.B, self.Y, 1.0, 0.0, self.psi
        )
        assert abs(out["commutator"]) == 0.0
        assert abs(out["bRem"]) == 0.0 and abs(out["remB"]) == 0.0

    def test_saturated_rem_zero(self):
        out = remainder_pairings(
            self.b, self.J, self.V, self.A, self.X, self.B, self.Y, 10.0, 0.5, self.psi
        )
        assert abs(out["bRem"]) < 1e-10 and abs(out["remB"]) < 1e-10

    def test_identity_holds(self):
        out = remainder_pairings(
            self.b, self.J, self.V, self.A, self.X, self.B, self.Y, 2.0, 0.5, self.psi
        )
        assert abs(out["commutator"] - (out["remB"] - out["bRem"])) <= 1e-12

    def test_distance_precondition(self):
        Ynear = region(self.lat, [2])
        Bnear = site_number_operator(self.b, 2)
        with pytest.raises(ValueError):
            remainder_pairings(
                self.b, self.J, self.V, self.A, self.X, Bnear, Ynear, 3.0, 0.5, self.psi
            )

    def test_against_dense_expm_oracle(self):
        lat = chain(8)
        b = build_basis(lat, ("fixed_n", 2))
        J = power_law_couplings(lat, HOPPING, 4.0, 1.0)
        X = region(lat, [0])
        Y = region(lat, [7])
        A = site_number_operator(b, 0)
        from bhlab.fock import hopping_operator

        B = hopping_operator(b, unit_bond(lat, 6, 7))
        Yb = region(lat, [6, 7])
        psi = basis_vector(b, (1, 0, 0, 0, 0, 0, 0, 1))
        t = 0.5
        for xi in (1.0, 2.0, 3.0):
            out = remainder_pairings(b, J, None, A, X, B, Yb, xi, t, psi)
            H = hamiltonian(b, J).matrix.toarray()
            HS = restrict_hamiltonian(J, None, fatten(X, xi), b).matrix.toarray()
            U = la.expm(-1j * H * t)
            US = la.expm(-1j * HS * t)
            At = U.conj().T @ A.matrix.toarray() @ U
            AtS = US.conj().T @ A.matrix.toarray() @ US
            Rem = At - AtS
            v = psi.amplitudes
            Bm = B.matrix.toarray()
            assert abs(out["bRem"] - np.vdot(v, Bm @ Rem @ v)) < 1e-10
            assert abs(out["remB"] - np.vdot(v, Rem @ Bm @ v)) < 1e-10
            comm = np.vdot(v, (At @ Bm - Bm @ At) @ v)
            assert abs(out["commutator"] - comm) < 1e-10


class TestFreeFieldOracle:
    def test_t_zero(self):
        lat = chain(4)
        J = power_law_couplings(lat, HOPPING, 2.0, 1.0)
        occ = [2, 0, 1, 0]
        assert np.allclose(one_body_density_oracle(J, occ, 0.0), occ)

    def test_two_site_swap(self):
        lat = chain(2)
        J = unit_bond(lat, 0, 1)
        out = one_body_density_oracle(J, [1, 0], np.pi / 2)
        assert np.allclose(out, [0.0, 1.0], atol=1e-12)

    def test_matches_many_body(self):
        lat = chain(6)
        J = power_law_couplings(lat, HOPPING, 2.5, 1.0)
        b = build_basis(lat, ("fixed_n", 3))
        occ = [0, 2, 0, 1, 0, 0]
        psi = basis_vector(b, occ)
        prop = Propagator(hamiltonian(b, J, None))
        t = 0.9
        out = evolve(prop, psi, t)
        dens = np.array(
            [site_number_operator(b, x).expectation(out).real for x in range(6)]
        )
        assert np.abs(dens - one_body_density_oracle(J, occ, t)).max() < 1e-8
