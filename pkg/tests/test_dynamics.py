import numpy as np
import pytest

from scarsim.errors import CapacityError
from scarsim import analysis, dynamics, hamiltonian, hilbert, model

from conftest import chain_with_cross

RAD = hamiltonian.MHZ_TO_RAD_PER_NS
W_A = 2 * np.pi * 9e-3  # |omega_a| for f_a = -9 MHz


def two_level():
    g = model.build_chain(2, "open", -9.0, -6.0)
    sec = hilbert.enumerate_sector(2, 1)
    return g, sec, hamiltonian.assemble(g, sec)


class TestEvolveKrylov:
    def test_two_level_closed_form(self, times400):
        _, sec, H = two_level()
        psi0 = dynamics.basis_vector(sec, 0b01)
        traj = dynamics.evolve_krylov(H, psi0, times400, tol=1e-10)
        pops = dynamics.site_populations(traj)
        assert np.max(np.abs(pops[:, 0] - np.cos(W_A * times400) ** 2)) < 1e-10

    def test_matches_dense_oracle(self, times400):
        g = chain_with_cross(12, -9, -6)
        sec = hilbert.enumerate_sector(12, 6)
        H = hamiltonian.assemble(g, sec)
        word, _ = analysis.pi_states(g.dimers)
        psi0 = dynamics.basis_vector(sec, word)
        tk = dynamics.evolve_krylov(H, psi0, times400, tol=1e-10)
        td = dynamics.evolve_dense(H, psi0, times400)
        assert np.max(np.linalg.norm(tk.states - td.states, axis=1)) < 1e-8

    def test_norm_preserved(self, times400):
        g = chain_with_cross(10, -9, -6)
        sec = hilbert.enumerate_sector(10, 5)
        H = hamiltonian.assemble(g, sec)
        traj = dynamics.evolve_krylov(
            H, dynamics.basis_vector(sec, int(sec.states[7])), times400
        )
        norms = np.linalg.norm(traj.states, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-8

    def test_energy_conservation(self, times400):
        g = chain_with_cross(10, -9, -6)
        sec = hilbert.enumerate_sector(10, 5)
        H = hamiltonian.assemble(g, sec)
        word, _ = analysis.pi_states(g.dimers)
        traj = dynamics.evolve_krylov(H, dynamics.basis_vector(sec, word), times400)
        assert dynamics.energy_drift(H, traj) < 1e-8

    def test_input_validation(self):
        _, sec, H = two_level()
        psi0 = dynamics.basis_vector(sec, 0b01)
        with pytest.raises(ValueError):
            dynamics.evolve_krylov(H, psi0, np.array([1.0, 0.5]))
        with pytest.raises(ValueError):
            dynamics.evolve_krylov(H, psi0, np.array([-1.0, 0.0]))
        with pytest.raises(ValueError):
            dynamics.evolve_krylov(H, 2.0 * psi0, np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            dynamics.evolve_krylov(H, psi0[:1], np.array([0.0, 1.0]))

    def test_deterministic(self, times400):
        g = chain_with_cross(8, -9, -6)
        sec = hilbert.enumerate_sector(8, 4)
        H = hamiltonian.assemble(g, sec)
        psi0 = dynamics.basis_vector(sec, int(sec.states[3]))
        a = dynamics.evolve_krylov(H, psi0, times400[:100])
        b = dynamics.evolve_krylov(H, psi0, times400[:100])
        assert np.array_equal(a.states, b.states)


class TestEvolveDense:
    def test_identity_at_time_zero(self):
        _, sec, H = two_level()
        psi0 = dynamics.basis_vector(sec, 0b10)
        traj = dynamics.evolve_dense(H, psi0, np.array([0.0, 5.0]))
        assert np.array_equal(traj.states[0], psi0)

    def test_unitarity(self, times400):
        g = chain_with_cross(8, -9, -6)
        sec = hilbert.enumerate_sector(8, 4)
        H = hamiltonian.assemble(g, sec)
        traj = dynamics.evolve_dense(
            H, dynamics.basis_vector(sec, int(sec.states[0])), times400
        )
        norms = np.linalg.norm(traj.states, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-12

    def test_fidelity_two_path_consistency(self, times400):
        # |<psi0|psi(t)>|^2 must equal |sum_n |c_n|^2 e^{-i E_n t}|^2
        from scarsim import spectral

        g = chain_with_cross(10, -9, -6)
        sec = hilbert.enumerate_sector(10, 5)
        H = hamiltonian.assemble(g, sec)
        es = spectral.diagonalize(H)
        word, _ = analysis.pi_states(g.dimers)
        psi0 = dynamics.basis_vector(sec, word)
        traj = dynamics.evolve_dense(H, psi0, times400, eigsys=es)
        f_traj = dynamics.global_fidelity(traj)
        ov = spectral.overlaps(es, word)
        phases = np.exp(-1j * np.outer(times400, es.energies))
        f_spec = np.abs(phases @ ov) ** 2
        assert np.max(np.abs(f_traj - f_spec)) < 1e-10

    def test_capacity(self):
        sec = hilbert.enumerate_sector(24, 12)
        H = hamiltonian.assemble(model.build_chain(24, "open", -9, -6), sec,
                                 mode="matrix-free")
        with pytest.raises(CapacityError):
            dynamics.evolve_dense(H, np.zeros(sec.dim, dtype=complex),
                                  np.array([0.0, 1.0]))


class TestObservables:
    def test_population_sum_conserved(self, times400):
        g = chain_with_cross(10, -9, -6)
        sec = hilbert.enumerate_sector(10, 5)
        H = hamiltonian.assemble(g, sec)
        word, _ = analysis.pi_states(g.dimers)
        traj = dynamics.evolve_krylov(H, dynamics.basis_vector(sec, word), times400)
        pops = dynamics.site_populations(traj)
        assert np.allclose(pops.sum(axis=1), sec.N, atol=1e-9)
        assert np.all((pops >= -1e-12) & (pops <= 1 + 1e-12))

    def test_two_level_population_and_imbalance(self, times400):
        _, sec, H = two_level()
        psi0 = dynamics.basis_vector(sec, 0b01)
        traj = dynamics.evolve_krylov(H, psi0, times400, tol=1e-10)
        pops = dynamics.site_populations(traj)
        imb = dynamics.imbalance(traj)
        assert np.max(np.abs(pops[:, 0] - np.cos(W_A * times400) ** 2)) < 1e-9
        assert np.max(np.abs(imb - np.cos(2 * W_A * times400))) < 1e-9
        fid = dynamics.global_fidelity(traj)
        assert np.max(np.abs(fid - np.cos(W_A * times400) ** 2)) < 1e-9
        assert fid[0] == pytest.approx(1.0)
        assert imb[0] == pytest.approx(1.0)

    def test_imbalance_requires_basis_state(self, times400):
        g = chain_with_cross(8, -9, -6)
        sec = hilbert.enumerate_sector(8, 4)
        H = hamiltonian.assemble(g, sec)
        psi0 = np.full(sec.dim, 1.0 / np.sqrt(sec.dim), dtype=complex)
        traj = dynamics.evolve_krylov(H, psi0, times400[:10])
        with pytest.raises(ValueError):
            dynamics.imbalance(traj)

    def test_thermal_state_populations_settle_at_half(self):
        sec = hilbert.enumerate_sector(14, 7)
        g = chain_with_cross(14, -9, -6)
        H = hamiltonian.assemble(g, sec)
        rng = np.random.default_rng(1)
        word = int(sec.states[rng.integers(sec.dim)])
        times = np.arange(0.0, 201.0, 1.0)
        tab = dynamics.quench_observables(H, word, times, subsystem=None)
        early = np.abs(tab.populations[30:60].mean(axis=0) - 0.5)
        late = np.abs(tab.populations[100:].mean(axis=0) - 0.5)
        assert np.mean(early) < 0.2
        assert np.mean(late) < 0.08
        assert np.max(late) < 0.1

    def test_scarred_vs_random_fidelity(self, times400):
        sec = hilbert.enumerate_sector(14, 7)
        g = chain_with_cross(14, -9, -6)
        H = hamiltonian.assemble(g, sec)
        word, _ = analysis.pi_states(g.dimers)
        tab = dynamics.quench_observables(H, word, times400, subsystem=None)
        rv = dynamics.find_first_revival(times400, tab.fidelity)
        assert rv is not None
        t1, peak = rv
        assert 40 <= t1 <= 60
        assert peak > 0.3
        rng = np.random.default_rng(2)
        rand_word = int(sec.states[rng.integers(sec.dim)])
        tab_r = dynamics.quench_observables(H, rand_word, times400, subsystem=None)
        assert np.max(tab_r.fidelity[30:]) < 1e-2

    def test_uniform_onsite_is_gauge(self, times400):
        # a constant frequency offset only rotates the global phase
        g0 = chain_with_cross(8, -9, -6)
        g1 = model.set_onsite(g0, "uniform", 3.7)
        sec = hilbert.enumerate_sector(8, 4)
        word = int(sec.states[11])
        t0 = dynamics.quench_observables(
            hamiltonian.assemble(g0, sec), word, times400[:80]
        )
        t1 = dynamics.quench_observables(
            hamiltonian.assemble(g1, sec), word, times400[:80]
        )
        assert np.allclose(t0.populations, t1.populations, atol=1e-8)
        assert np.allclose(t0.fidelity, t1.fidelity, atol=1e-8)
        assert np.allclose(t0.entropy, t1.entropy, atol=1e-8)


class TestReducedDensityMatrix:
    def test_product_state_is_rank_one(self):
        sec = hilbert.enumerate_sector(6, 3)
        smap = hilbert.subsystem_maps(sec, (0, 1, 2))
        psi = dynamics.basis_vector(sec, 0b000111)
        rho = dynamics.reduced_density_matrix(psi, smap)
        rho.validate()
        evals = np.linalg.eigvalsh(rho.matrix)
        assert evals[-1] == pytest.approx(1.0)
        assert np.sum(evals > 1e-12) == 1

    def test_bell_pair(self):
        sec = hilbert.enumerate_sector(2, 1)
        smap = hilbert.subsystem_maps(sec, (0,))
        psi = (dynamics.basis_vector(sec, 0b01) + dynamics.basis_vector(sec, 0b10))
        psi /= np.sqrt(2)
        rho = dynamics.reduced_density_matrix(psi, smap)
        assert np.allclose(rho.matrix, np.eye(2) / 2)
        assert dynamics.entropy_vn(rho) == pytest.approx(np.log(2))

    def test_against_full_space_partial_trace(self):
        # oracle: embed into the unrestricted 2^L space, trace by reshaping
        L, N = 8, 4
        A = (0, 1, 2, 3)
        sec = hilbert.enumerate_sector(L, N)
        smap = hilbert.subsystem_maps(sec, A)
        rng = np.random.default_rng(9)
        psi = rng.normal(size=sec.dim) + 1j * rng.normal(size=sec.dim)
        psi /= np.linalg.norm(psi)
        rho = dynamics.reduced_density_matrix(psi, smap)
        rho.validate()
        assert np.trace(rho.matrix).real == pytest.approx(1.0)

        full = np.zeros(1 << L, dtype=complex)
        full[sec.states] = psi
        # bit i of the word indexes site i; reorder to (A bits, B bits)
        tensor = full.reshape([2] * L, order="F")  # axis i = site i
        perm = list(A) + [s for s in range(L) if s not in A]
        tensor = np.transpose(tensor, perm).reshape(1 << len(A), -1, order="F")
        rho_oracle = tensor @ tensor.conj().T
        assert np.allclose(rho.matrix, rho_oracle, atol=1e-12)

    def test_purity_matches_schmidt_oracle(self):
        L, N = 10, 5
        A = (1, 3, 4, 8)
        sec = hilbert.enumerate_sector(L, N)
        smap = hilbert.subsystem_maps(sec, A)
        rng = np.random.default_rng(11)
        psi = rng.normal(size=sec.dim) + 1j * rng.normal(size=sec.dim)
        psi /= np.linalg.norm(psi)
        purity = float(
            np.trace(dynamics.reduced_density_matrix(psi, smap).matrix @
                     dynamics.reduced_density_matrix(psi, smap).matrix).real
        )
        full = np.zeros(1 << L, dtype=complex)
        full[sec.states] = psi
        tensor = full.reshape([2] * L, order="F")
        perm = list(A) + [s for s in range(L) if s not in A]
        mat = np.transpose(tensor, perm).reshape(1 << len(A), -1, order="F")
        schmidt = np.linalg.svd(mat, compute_uv=False)
        assert purity == pytest.approx(float(np.sum(schmidt**4)), abs=1e-12)

    def test_entropy_values(self):
        rho = dynamics.DensityMatrix(sites=(0, 1, 2, 3), matrix=np.eye(16) / 16)
        assert dynamics.entropy_vn(rho) == pytest.approx(4 * np.log(2))
        assert dynamics.entropy_vn(np.diag([0.5, 0.5])) == pytest.approx(np.log(2))
        pure = np.zeros((4, 4))
        pure[2, 2] = 1.0
        assert dynamics.entropy_vn(pure) == 0.0

    def test_block_entropy_shortcut_agrees(self):
        sec = hilbert.enumerate_sector(10, 5)
        smap = hilbert.subsystem_maps(sec, (0, 1, 2, 3, 4))
        rng = np.random.default_rng(13)
        psi = rng.normal(size=sec.dim) + 1j * rng.normal(size=sec.dim)
        psi /= np.linalg.norm(psi)
        rho = dynamics.reduced_density_matrix(psi, smap)
        assert dynamics.entanglement_entropy(psi, smap) == pytest.approx(
            dynamics.entropy_vn(rho), abs=1e-10
        )


class TestSubsystemFidelity:
    def test_initial_value_is_one(self, times400):
        sec = hilbert.enumerate_sector(8, 4)
        g = chain_with_cross(8, -9, -6)
        H = hamiltonian.assemble(g, sec)
        word, _ = analysis.pi_states(g.dimers)
        tab = dynamics.quench_observables(H, word, times400[:50], subsystem=(0, 1, 2, 3))
        assert tab.subsystem_fid[0] == pytest.approx(1.0, abs=1e-10)

    def test_maximally_mixed_value(self):
        rho = dynamics.DensityMatrix(sites=(0, 1, 2, 3), matrix=np.eye(16) / 16)
        assert dynamics.subsystem_fidelity(rho, 0b0101) == pytest.approx(1 / 16)
        phi = np.zeros(16, dtype=complex)
        phi[5] = 1.0
        assert dynamics.subsystem_fidelity(rho, phi) == pytest.approx(1 / 16)

    def test_peaks_colocate_with_global_fidelity(self, times400):
        # subsystem revivals mirror the global ones at matching times
        sec = hilbert.enumerate_sector(12, 6)
        g = chain_with_cross(12, -9, -6)
        H = hamiltonian.assemble(g, sec)
        word, _ = analysis.pi_states(g.dimers)
        tab = dynamics.quench_observables(H, word, times400, subsystem=(0, 1, 2, 3))
        t_f = dynamics.find_first_revival(times400, tab.fidelity)
        t_fa = dynamics.find_first_revival(times400, tab.subsystem_fid)
        assert t_f is not None and t_fa is not None
        assert abs(t_f[0] - t_fa[0]) <= times400[1] - times400[0]


class TestQuenchTable:
    def test_streaming_matches_trajectory_route(self, times400):
        sec = hilbert.enumerate_sector(8, 4)
        g = chain_with_cross(8, -9, -6)
        H = hamiltonian.assemble(g, sec)
        word, _ = analysis.pi_states(g.dimers)
        times = times400[:120]
        tab = dynamics.quench_observables(H, word, times, subsystem=(0, 1, 2, 3))
        traj = dynamics.evolve_krylov(H, dynamics.basis_vector(sec, word), times)
        assert np.allclose(tab.populations, dynamics.site_populations(traj), atol=1e-12)
        assert np.allclose(tab.imbalance, dynamics.imbalance(traj), atol=1e-12)
        assert np.allclose(tab.fidelity, dynamics.global_fidelity(traj), atol=1e-12)
        smap = hilbert.subsystem_maps(sec, (0, 1, 2, 3))
        rho_mid = dynamics.reduced_density_matrix(traj.states[60], smap)
        assert tab.entropy[60] == pytest.approx(dynamics.entropy_vn(rho_mid), abs=1e-9)
