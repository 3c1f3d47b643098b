import numpy as np
import pytest

from scarsim.errors import CapacityError, DispersiveRegimeError
from scarsim import model


def edge_set(graph):
    return {e.key(): e.f_MHz for e in graph.edges}


class TestBuildChain:
    def test_open_four_sites(self):
        g = model.build_chain(4, "open", -9, -6)
        assert edge_set(g) == {(0, 1): -9, (1, 2): -6, (2, 3): -9}
        assert g.dimers == ((0, 1), (2, 3))

    def test_periodic_adds_wrap_bond(self):
        g = model.build_chain(4, "periodic", -9, -6)
        assert edge_set(g)[(0, 3)] == -6

    def test_device_scale_chain(self):
        g = model.build_chain(30, "open", -9, -6)
        assert len(g.edges) == 29
        assert len(g.dimers) == 15
        assert sum(1 for e in g.edges if e.f_MHz == -9) == 15
        assert sum(1 for e in g.edges if e.f_MHz == -6) == 14

    def test_odd_length_rejected(self):
        with pytest.raises(ValueError):
            model.build_chain(5, "open", -9, -6)


class TestBuildComb:
    def test_ten_dimers(self):
        g = model.build_comb(10, -9, -6)
        assert g.L == 20
        intra = [e for e in g.edges if e.kind == "intra"]
        back = [e for e in g.edges if e.kind == "inter"]
        assert len(intra) == 10 and all(e.f_MHz == -9 for e in intra)
        assert len(back) == 9 and all(e.f_MHz == -6 for e in back)

    def test_smallest_comb_is_a_path(self):
        g = model.build_comb(2, -9, -6)
        # relabel along the path tooth-backbone-backbone-tooth
        path = [1, 0, 2, 3]
        ew = edge_set(g)
        seq = [ew[tuple(sorted((path[i], path[i + 1])))] for i in range(3)]
        assert seq == [-9, -6, -9]

    def test_eighteen_sites(self):
        assert model.build_comb(9, -9, -6).L == 18

    def test_too_few_dimers(self):
        with pytest.raises(ValueError):
            model.build_comb(1, -9, -6)


class TestSnakeEmbedding:
    def test_two_by_two(self):
        assert model.snake_grid_embedding(4, 2, 2) == ((0, 0), (0, 1), (1, 1), (1, 0))

    def test_device_grid(self):
        emb = model.snake_grid_embedding(30, 6, 6)
        rows = [set() for _ in range(5)]
        for k, (r, c) in enumerate(emb):
            assert r == k // 6
            rows[r].add(c)
        assert all(row == set(range(6)) for row in rows)

    @pytest.mark.parametrize("L,rows,cols", [(4, 2, 2), (12, 2, 6), (30, 6, 6), (17, 3, 6)])
    def test_consecutive_sites_grid_adjacent(self, L, rows, cols):
        emb = model.snake_grid_embedding(L, rows, cols)
        for k in range(L - 1):
            dr = abs(emb[k][0] - emb[k + 1][0])
            dc = abs(emb[k][1] - emb[k + 1][1])
            assert max(dr, dc) == 1

    def test_overflow(self):
        with pytest.raises(CapacityError):
            model.snake_grid_embedding(5, 2, 2)


class TestCrossCouplings:
    def test_two_by_two_has_two_diagonals(self):
        g = model.with_embedding(model.build_chain(4, "open", -9, -6), 2, 2)
        g = model.add_cross_couplings(g, (0.3, 1.2), seed=7)
        cross = [e for e in g.edges if e.kind == "cross"]
        assert len(cross) == 2
        assert all(0.3 <= e.f_MHz <= 1.2 for e in cross)

    def test_deterministic_for_fixed_seed(self):
        def build():
            g = model.with_embedding(model.build_chain(12, "open", -9, -6), 2, 6)
            return model.add_cross_couplings(g, (0.3, 1.2), seed=7)

        assert edge_set(build()) == edge_set(build())

    def test_seed_changes_values(self):
        g = model.with_embedding(model.build_chain(12, "open", -9, -6), 2, 6)
        a = model.add_cross_couplings(g, (0.3, 1.2), seed=1)
        b = model.add_cross_couplings(g, (0.3, 1.2), seed=2)
        assert edge_set(a) != edge_set(b)

    def test_missing_embedding(self):
        g = model.build_chain(4, "open", -9, -6)
        with pytest.raises(ValueError):
            model.add_cross_couplings(g, (0.3, 1.2), seed=7)

    @pytest.mark.parametrize("L", [8, 12, 16, 20])
    def test_cross_edges_are_never_chain_or_dimer_bonds(self, L):
        g = model.with_embedding(model.build_chain(L, "open", -9, -6), (L + 5) // 6, 6)
        g = model.add_cross_couplings(g, (0.3, 1.2), seed=7)
        dimer_of = {}
        for k, (a, b) in enumerate(g.dimers):
            dimer_of[a] = dimer_of[b] = k
        for e in g.edges:
            if e.kind != "cross":
                continue
            assert abs(e.i - e.j) != 1
            assert dimer_of[e.i] != dimer_of[e.j]


class TestNnnCouplings:
    def test_six_site_chain(self):
        g = model.add_nnn_couplings(model.build_chain(6, "open", -9, -6), 0.72)
        nnn = {e.key(): e.f_MHz for e in g.edges if e.kind == "nnn"}
        assert nnn == {(0, 3): 0.72, (1, 4): 0.72, (2, 5): 0.72}

    def test_regular_perturbation_setup(self):
        g = model.add_nnn_couplings(model.build_chain(18, "open", -6, -4), 0.72)
        nnn = [e for e in g.edges if e.kind == "nnn"]
        assert len(nnn) == 15
        assert all(e.f_MHz == 0.72 for e in nnn)

    def test_non_chain_rejected(self):
        with pytest.raises(ValueError):
            model.add_nnn_couplings(model.build_comb(3, -9, -6), 0.72)


class TestOnsite:
    def test_end_impurity(self):
        g = model.set_onsite(model.build_chain(18, "open", -6, -4), "end_impurity", 3.0)
        assert g.onsite[16] == 3.0 and g.onsite[17] == 3.0
        assert all(v == 0.0 for v in g.onsite[:16])

    def test_staircase(self):
        g = model.set_onsite(model.build_chain(6, "open", -9, -6), "staircase", 0.8)
        assert g.onsite == pytest.approx((0.8, 0.8, 1.6, 1.6, 2.4, 2.4))

    def test_explicit_wrong_length(self):
        with pytest.raises(ValueError):
            model.set_onsite(model.build_chain(4, "open", -9, -6), "explicit", [1.0])

    def test_unknown_pattern(self):
        with pytest.raises(ValueError):
            model.set_onsite(model.build_chain(4, "open", -9, -6), "sawtooth", 1.0)


class TestCircuitReduction:
    def test_single_coupler_arithmetic(self):
        params = model.CircuitParams(
            qubit_freqs_GHz=(4.4, 4.4),
            couplers=(model.Coupler(0, 1, 5.0, 100.0, 100.0),),
            direct_MHz={(0, 1): 2.0},
        )
        g = model.effective_from_circuit(params)
        # detunings are both -600 MHz
        assert edge_set(g)[(0, 1)] == pytest.approx(2.0 + 100.0 * 100.0 * (2 / -600.0))

    def test_no_couplers_is_identity(self):
        params = model.CircuitParams(
            qubit_freqs_GHz=(4.4, 4.5),
            couplers=(),
            direct_MHz={(0, 1): 2.0},
        )
        g = model.effective_from_circuit(params)
        assert edge_set(g) == {(0, 1): 2.0}
        assert g.onsite == (4400.0, 4500.0)

    def test_coupler_sweep_spans_tunability_range(self):
        # sweeping the coupler through its band must change the sign of the
        # net coupling and bracket roughly [-15, 1] MHz
        vals = []
        for wc in np.linspace(4.9, 6.0, 23):
            params = model.CircuitParams(
                qubit_freqs_GHz=(4.375, 4.375),
                couplers=(model.Coupler(0, 1, float(wc), 78.8, 78.8),),
                direct_MHz={(0, 1): 8.6},
            )
            g = model.effective_from_circuit(params)
            vals.append(edge_set(g)[(0, 1)])
        assert min(vals) < -14.0
        assert max(vals) > 0.5

    def test_dispersive_violation(self):
        params = model.CircuitParams(
            qubit_freqs_GHz=(4.4, 4.4),
            couplers=(model.Coupler(0, 1, 4.45, 100.0, 100.0),),
        )
        with pytest.raises(DispersiveRegimeError):
            model.effective_from_circuit(params)

    def test_scaling_exponents(self):
        # J is linear in the direct coupling and quadratic in the
        # qubit-coupler coupling (finite-difference exponent check)
        def j(direct, g):
            params = model.CircuitParams(
                qubit_freqs_GHz=(4.4, 4.4),
                couplers=(model.Coupler(0, 1, 5.0, g, g),),
                direct_MHz={(0, 1): direct},
            )
            return edge_set(model.effective_from_circuit(params))[(0, 1)]

        base_direct = j(2.0, 0.0)
        assert j(4.0, 0.0) / base_direct == pytest.approx(2.0)
        mediated = j(0.0, 50.0)
        assert j(0.0, 100.0) / mediated == pytest.approx(4.0)


class TestCsvInterfaces:
    def test_edge_csv_roundtrip(self, tmp_path):
        edges = (model.Edge(0, 5, 0.7312345678901234, "cross"),
                 model.Edge(2, 3, -9.0, "cross"))
        path = tmp_path / "edges.csv"
        model.write_edge_csv(path, edges)
        back = model.load_edge_csv(path)
        assert [(e.i, e.j) for e in back] == [(0, 5), (2, 3)]
        assert back[0].f_MHz == edges[0].f_MHz

    def test_device_csv(self, tmp_path):
        qcsv = tmp_path / "qubits.csv"
        qcsv.write_text(
            "qubit_label,omega0_GHz,omega_idle_GHz,e_sq_pct,T1_us,T2star_us\n"
            "Q1,4.826,4.795,0.26,71.5,2.2\n"
            "Q2,4.880,4.420,0.18,75.5,2.3\n"
        )
        ccsv = tmp_path / "couplers.csv"
        ccsv.write_text(
            "coupler_label,qubit_a,qubit_b,omega_c_GHz,g_ac_MHz,g_bc_MHz,g_ab_MHz\n"
            "C1,Q1,Q2,5.9,80.0,80.0,8.6\n"
        )
        params = model.load_device_csv(qcsv, ccsv)
        assert params.qubit_freqs_GHz == (4.795, 4.420)
        assert params.couplers[0].qubit_a == 0
        assert params.direct_MHz[(0, 1)] == 8.6
        fixed = model.load_device_csv(qcsv, ccsv, interaction_frequency_GHz=4.375)
        assert fixed.qubit_freqs_GHz == (4.375, 4.375)


class TestGraphInvariants:
    def test_duplicate_edges_rejected(self):
        with pytest.raises(ValueError):
            model.CouplingGraph(
                L=2,
                edges=(model.Edge(0, 1, 1.0), model.Edge(1, 0, 2.0)),
                onsite=(0.0, 0.0),
            )

    def test_self_edge_rejected(self):
        with pytest.raises(ValueError):
            model.CouplingGraph(L=2, edges=(model.Edge(1, 1, 1.0),), onsite=(0.0, 0.0))

    def test_dimer_cover(self):
        with pytest.raises(ValueError):
            model.CouplingGraph(
                L=4, edges=(), onsite=(0.0,) * 4, dimers=((0, 1), (1, 2)),
            )
