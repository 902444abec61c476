import numpy as np
import pytest
import scipy.sparse.linalg as spla

from qgreen.models import (
    HamiltonianTerms,
    HubbardSpec,
    SpinChainSpec,
    TrotterPlan,
    build_heisenberg_terms,
    build_hubbard_terms_jw,
    chain_bonds,
    ground_state_exact,
    hubbard_ground_state,
    jw_annihilation,
    jw_creation,
    lehmann_overlaps,
    parity_operator,
    sector_ground_state,
)
from qgreen.oracle import fermion_annihilation_matrix, hubbard_hamiltonian_occupation
from qgreen.pauli import PauliString

from conftest import pauli_matrix


def pauli_sum_matrix(pairs):
    out = 0
    for c, p in pairs:
        out = out + c * p.matrix()
    return out


class TestHeisenbergTerms:
    def test_smallest_chain(self):
        terms = build_heisenberg_terms(SpinChainSpec(2, boundary="open"))
        labels = sorted(p.label() for _, p in terms.terms)
        assert labels == ["XX", "YY", "ZZ"]
        assert all(c == 1.0 for c, _ in terms.terms)

    def test_ring_term_count_and_wrap(self):
        terms = build_heisenberg_terms(SpinChainSpec(10))
        assert len(terms.terms) == 30
        wrap = [p for _, p in terms.terms if p.support == (0, 9)]
        assert len(wrap) == 3

    def test_open_chain_count(self):
        terms = build_heisenberg_terms(SpinChainSpec(5, boundary="open"))
        assert len(terms.terms) == 3 * 4

    def test_dense_matches_kron_assembly(self):
        spec = SpinChainSpec(3)
        H = build_heisenberg_terms(spec).dense()
        ref = np.zeros((8, 8), dtype=complex)
        for r in range(3):
            s = (r + 1) % 3
            for ax in "XYZ":
                label = ["I"] * 3
                label[r] = ax
                label[s] = ax
                ref += pauli_matrix("".join(label))
        assert np.allclose(H, ref)

    def test_hermiticity(self):
        for spec in (SpinChainSpec(4), SpinChainSpec(5, jx=0.3, jy=1.2, jz=0.7)):
            H = build_heisenberg_terms(spec).dense()
            assert np.allclose(H, H.conj().T, atol=1e-12)

    def test_l2_periodic_deduplicates(self):
        with pytest.warns(UserWarning):
            terms = build_heisenberg_terms(SpinChainSpec(2, boundary="periodic"))
        assert len(terms.terms) == 3

    def test_even_odd_ordering(self):
        bonds = chain_bonds(6, "periodic")
        assert bonds == [(0, 1), (2, 3), (4, 5), (1, 2), (3, 4), (5, 0)]

    def test_length_validation(self):
        with pytest.raises(ValueError):
            SpinChainSpec(1)


class TestHubbardTerms:
    def test_qubit_count(self):
        for m in (2, 3, 4):
            assert HubbardSpec(m).n_qubits == 2 * m

    def test_two_site_half_filled_energy(self):
        spec = HubbardSpec(2, hopping=1.0, interaction=5.0, boundary="open")
        terms = build_hubbard_terms_jw(spec)
        _, energy = sector_ground_state(terms, 2)
        expected = 5.0 / 2 - np.sqrt((5.0 / 2) ** 2 + 4.0)
        assert energy == pytest.approx(expected, abs=1e-10)

    def test_global_minimum_below_half_filling(self):
        # the repulsive model's Fock-space minimum is the single-particle -J
        spec = HubbardSpec(2, hopping=1.0, interaction=5.0, boundary="open")
        terms = build_hubbard_terms_jw(spec)
        _, data = ground_state_exact(terms)
        assert data.ground_energy == pytest.approx(-1.0, abs=1e-10)

    def test_matches_occupation_basis_oracle(self):
        spec = HubbardSpec(4, hopping=1.0, interaction=5.0, boundary="periodic")
        Hjw = build_hubbard_terms_jw(spec).dense()
        Hocc = hubbard_hamiltonian_occupation(spec)
        assert np.allclose(Hjw, Hocc, atol=1e-10)

    def test_open_matches_occupation_oracle(self):
        spec = HubbardSpec(3, hopping=0.7, interaction=2.5, boundary="open")
        assert np.allclose(
            build_hubbard_terms_jw(spec).dense(),
            hubbard_hamiltonian_occupation(spec),
            atol=1e-10,
        )

    def test_hermitian(self):
        H = build_hubbard_terms_jw(HubbardSpec(3, interaction=4.0)).dense()
        assert np.allclose(H, H.conj().T, atol=1e-12)

    def test_sites_validation(self):
        with pytest.raises(ValueError):
            HubbardSpec(1)


class TestJordanWigner:
    @pytest.mark.parametrize("n_modes", [2, 4, 8])
    def test_car_anticommutation(self, n_modes):
        def dense(pairs):
            return pauli_sum_matrix(pairs)

        a = [dense(jw_annihilation(n_modes, m)) for m in range(n_modes)]
        ad = [dense(jw_creation(n_modes, m)) for m in range(n_modes)]
        for r in range(n_modes):
            for s in range(n_modes):
                anti = a[r] @ ad[s] + ad[s] @ a[r]
                expect = np.eye(1 << n_modes) if r == s else 0
                assert np.allclose(anti, expect, atol=1e-12)
                assert np.allclose(a[r] @ a[s] + a[s] @ a[r], 0, atol=1e-12)

    def test_jw_matches_occupation_matrices(self):
        n = 4
        for m in range(n):
            jw = pauli_sum_matrix(jw_annihilation(n, m))
            occ = fermion_annihilation_matrix(n, m)
            assert np.allclose(jw, occ, atol=1e-12)

    def test_number_operator(self):
        n = 3
        for m in range(n):
            ad = pauli_sum_matrix(jw_creation(n, m))
            a = pauli_sum_matrix(jw_annihilation(n, m))
            num = ad @ a
            z = PauliString.single(n, m, "Z").matrix()
            assert np.allclose(num, (np.eye(1 << n) + z) / 2, atol=1e-12)


class TestGroundState:
    def test_two_spin_singlet(self):
        terms = build_heisenberg_terms(SpinChainSpec(2, boundary="open"))
        state, data = ground_state_exact(terms)
        assert data.ground_energy == pytest.approx(-3.0, abs=1e-10)
        assert abs(state.norm() - 1.0) < 1e-12

    def test_eigenpair_residual(self):
        for spec in (SpinChainSpec(4), SpinChainSpec(3, boundary="open")):
            terms = build_heisenberg_terms(spec)
            state, data = ground_state_exact(terms)
            H = terms.dense()
            res = H @ state.amplitudes - data.ground_energy * state.amplitudes
            assert np.linalg.norm(res) < 1e-8

    def test_ten_spin_ring_vs_iterative_solver(self):
        terms = build_heisenberg_terms(SpinChainSpec(10))
        _, data = ground_state_exact(terms)
        op = spla.LinearOperator(
            (1 << 10, 1 << 10), matvec=terms.apply, dtype=complex
        )
        w = spla.eigsh(op, k=1, which="SA", return_eigenvectors=False, tol=1e-10)
        assert data.ground_energy == pytest.approx(float(w[0]), abs=1e-7)

    def test_eigenvectors_orthonormal_and_reconstruct(self):
        terms = build_heisenberg_terms(SpinChainSpec(3))
        _, data = ground_state_exact(terms)
        V = data.eigenvectors
        assert np.allclose(V.conj().T @ V, np.eye(8), atol=1e-8)
        H = terms.dense()
        assert np.allclose(V @ np.diag(data.eigenvalues) @ V.conj().T, H, atol=1e-8)

    def test_budget_enforced(self):
        terms = HamiltonianTerms(15)
        with pytest.raises(ValueError):
            ground_state_exact(terms)

    def test_translational_invariance_two_point(self):
        terms = build_heisenberg_terms(SpinChainSpec(6))
        state, _ = ground_state_exact(terms)
        L = 6
        corr = {}
        for d in range(1, L):
            vals = []
            for r in range(L):
                p = PauliString.from_axes(L, {r: "Z", (r + d) % L: "Z"})
                vals.append(np.vdot(state.amplitudes, p.apply(state.amplitudes)).real)
            corr[d] = vals
            assert np.allclose(vals, vals[0], atol=1e-8)

    def test_hubbard_parity(self):
        state, energy, lam = hubbard_ground_state(HubbardSpec(2, interaction=5.0, boundary="open"))
        assert lam in (-1, 1)
        par = parity_operator(4)
        val = np.vdot(state.amplitudes, par.apply(state.amplitudes)).real
        assert val == pytest.approx(lam, abs=1e-10)


class TestLehmann:
    def test_identity_ops(self):
        terms = build_heisenberg_terms(SpinChainSpec(3))
        _, data = ground_state_exact(terms)
        ident = PauliString.identity(3)
        ov = lehmann_overlaps(data, ident, ident)
        # single nonzero contribution, at omega = 0 with weight 1
        nz = np.abs(ov.a) > 1e-12
        assert np.isclose(ov.a[nz].sum(), 1.0)
        assert np.allclose(ov.omegas[nz], 0.0, atol=1e-10)
        assert np.allclose(ov.b, 0.0, atol=1e-12)

    def test_heisenberg_overlaps_real(self):
        terms = build_heisenberg_terms(SpinChainSpec(4))
        _, data = ground_state_exact(terms)
        for alpha in "XYZ":
            ov = lehmann_overlaps(
                data,
                PauliString.single(4, 2, alpha),
                PauliString.single(4, 0, alpha),
            )
            assert np.allclose(ov.b, 0.0, atol=1e-9)

    def test_three_spin_matches_dense_products(self):
        terms = build_heisenberg_terms(SpinChainSpec(3))
        _, data = ground_state_exact(terms)
        A = PauliString.single(3, 1, "X")
        B = PauliString.single(3, 0, "X")
        ov = lehmann_overlaps(data, A, B)
        psi0 = data.ground_vector
        for e in range(8):
            vec = data.eigenvectors[:, e]
            ref = np.vdot(psi0, A.matrix() @ vec) * np.vdot(vec, B.matrix() @ psi0)
            assert ov.a[e] == pytest.approx(ref.real, abs=1e-10)
            assert ov.b[e] == pytest.approx(ref.imag, abs=1e-10)


class TestTrotterPlan:
    def test_grid(self):
        plan = TrotterPlan(2 * np.pi, 100)
        assert plan.tau * plan.steps == pytest.approx(plan.total_time, rel=1e-15)
        assert len(plan.times()) == 100

    def test_validation(self):
        with pytest.raises(ValueError):
            TrotterPlan(1.0, 0)
