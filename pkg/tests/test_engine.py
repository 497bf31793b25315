import numpy as np
import pytest

from dmps.channels import noisy_gate_superop, unitary_superop
from dmps.circuits import LatticeSpec, build_circuit
from dmps.engine import (
    DensityMPS,
    SiteMap,
    TraceFloorError,
    init_density_mps,
    load_state,
    run_circuit,
    save_state,
)
from dmps.observables import depth_record, operator_ee_at_cut
from dmps.oracle import (
    evolve_exact,
    exact_operator_ee,
    exact_purity,
)

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
BELL_U = CNOT @ np.kron(H, np.eye(2))  # |00> -> (|00> + |11>)/sqrt(2)
IDENTITY_OP = unitary_superop(np.eye(4))


def observables_of(state):
    rec = depth_record(state, 0)
    return np.array([rec.trace, rec.purity, rec.second_renyi,
                     rec.s_max_over_cuts, *rec.ee_per_cut])


class TestSiteMap:
    def test_column_snake(self):
        smap = SiteMap(LatticeSpec(3, 3))
        # column 0 top-down, column 1 bottom-up, column 2 top-down
        assert [smap.position((r, 0)) for r in range(3)] == [0, 1, 2]
        assert [smap.position((r, 1)) for r in range(3)] == [5, 4, 3]
        assert [smap.position((r, 2)) for r in range(3)] == [6, 7, 8]

    def test_roundtrip(self):
        lat = LatticeSpec(3, 5)
        smap = SiteMap(lat)
        for pos in range(lat.n_qubits):
            assert smap.position(smap.site(pos)) == pos

    def test_cut_bonds_are_column_boundaries(self):
        smap = SiteMap(LatticeSpec(2, 4))
        assert smap.cut_bonds() == [2, 4, 6]
        with pytest.raises(ValueError):
            smap.cut_bond(4)


class TestInitialState:
    def test_zero_state_observables(self):
        state = init_density_mps(LatticeSpec(2, 3), chi_max=8)
        rec = depth_record(state, 0)
        assert rec.trace == pytest.approx(1.0, abs=1e-12)
        assert rec.purity == pytest.approx(1.0, abs=1e-12)
        assert all(e == pytest.approx(0.0, abs=1e-12) for e in rec.ee_per_cut)
        assert state.max_bond == 1

    def test_infinite_temperature_observables(self):
        state = DensityMPS.infinite_temperature(LatticeSpec(2, 2), chi_max=4)
        rec = depth_record(state, 0)
        assert rec.trace == pytest.approx(1.0, abs=1e-12)
        assert rec.purity == pytest.approx(2.0**-4, abs=1e-12)
        assert rec.second_renyi == pytest.approx(4.0, abs=1e-10)
        assert rec.s_max_over_cuts == pytest.approx(0.0, abs=1e-10)


class TestAdjacentChannel:
    def test_identity_channel_is_a_no_op(self):
        lat = LatticeSpec(2, 2)
        inst = build_circuit(lat, 3, master_seed=2)
        state, _ = run_circuit(inst, 0.1, chi_max=16)
        before = observables_of(state)
        state.apply_adjacent_channel(1, IDENTITY_OP)
        np.testing.assert_allclose(observables_of(state), before, atol=1e-10)

    def test_complete_depolarization_of_one_pair(self):
        # (I/4) on the gated pair times |00><00| elsewhere:
        # purity 2^-2 and S2 = 2 regardless of the unitary
        state = init_density_mps(LatticeSpec(2, 2), chi_max=16)
        state.apply_adjacent_channel(0, noisy_gate_superop(BELL_U, 15 / 16))
        rec = depth_record(state, 0)
        assert rec.trace == pytest.approx(1.0, abs=1e-12)
        assert rec.purity == pytest.approx(0.25, abs=1e-12)
        assert rec.second_renyi == pytest.approx(2.0, abs=1e-10)
        assert rec.s_max_over_cuts == pytest.approx(0.0, abs=1e-10)

    def test_bell_pair_operator_ee_is_two(self):
        # entangle across the column cut; operator EE = 2 * (1 bit of von
        # Neumann entropy) for a globally pure state
        state = init_density_mps(LatticeSpec(2, 2), chi_max=16)
        pos = (state.sitemap.position((0, 0)), state.sitemap.position((0, 1)))
        state.apply_long_range_channel(min(pos), max(pos),
                                       unitary_superop(BELL_U))
        assert operator_ee_at_cut(state, 1) == pytest.approx(2.0, abs=1e-10)


class TestSwap:
    def test_product_state_swap_is_exact(self):
        state = init_density_mps(LatticeSpec(2, 2), chi_max=4)
        one = np.zeros((1, 4, 1), dtype=complex)
        one[0, 3, 0] = 1.0  # vec(|1><1|)
        state.tensors[1] = one
        report = state.swap_adjacent(0)
        assert report.discarded_weight == pytest.approx(0.0, abs=1e-28)
        dense = state.to_dense_matrix()
        expected = np.zeros(16, dtype=complex)
        expected[0b1000] = 1.0  # |1000><1000| after the exchange
        np.testing.assert_allclose(dense, np.outer(expected, expected), atol=1e-12)

    def test_double_swap_restores_observables(self):
        inst = build_circuit(LatticeSpec(2, 3), 4, master_seed=3)
        state, _ = run_circuit(inst, 0.1, chi_max=64)
        before = observables_of(state)
        tr0 = state.trace()
        state.swap_adjacent(2)
        assert state.trace() == pytest.approx(tr0, abs=1e-12)
        state.swap_adjacent(2)
        np.testing.assert_allclose(observables_of(state), before, atol=1e-10)


class TestLongRange:
    def test_distance_one_equals_adjacent(self):
        a = init_density_mps(LatticeSpec(2, 2), chi_max=16)
        b = init_density_mps(LatticeSpec(2, 2), chi_max=16)
        op = noisy_gate_superop(BELL_U, 0.1)
        a.apply_adjacent_channel(1, op)
        b.apply_long_range_channel(1, 2, op)
        np.testing.assert_allclose(observables_of(a), observables_of(b), atol=1e-12)

    def test_identity_channel_far_apart_is_a_no_op(self):
        inst = build_circuit(LatticeSpec(2, 3), 4, master_seed=4)
        state, _ = run_circuit(inst, 0.05, chi_max=64)
        before = observables_of(state)
        state.apply_long_range_channel(0, 4, IDENTITY_OP)
        np.testing.assert_allclose(observables_of(state), before, atol=1e-9)

    def test_long_range_gate_matches_dense_oracle(self):
        # single far gate on the zero state, checked against Kraus evolution
        from dmps.oracle import apply_noisy_gate

        lat = LatticeSpec(2, 2)
        state = init_density_mps(lat, chi_max=16)
        u = BELL_U
        p = 0.2
        state.apply_long_range_channel(0, 3, noisy_gate_superop(u, p))
        n = 4
        t = np.zeros((2,) * (2 * n), dtype=complex)
        t[(0,) * (2 * n)] = 1.0
        t = apply_noisy_gate(t, u, 0, 3, n, p)
        np.testing.assert_allclose(
            state.to_dense_matrix(), t.reshape(2**n, 2**n), atol=1e-10
        )


class TestRunCircuit:
    def test_depth_zero_observes_initial_state(self):
        seen = []
        run_circuit(build_circuit(LatticeSpec(2, 2), 0, 7), 0.1, 4,
                    observer=lambda d, s: seen.append(d))
        assert seen == [0]

    def test_untruncated_evolution_keeps_trace_one(self):
        inst = build_circuit(LatticeSpec(2, 3), 6, master_seed=8)
        traces = []
        run_circuit(inst, 0.1, chi_max=64,
                    observer=lambda d, s: traces.append(s.trace()))
        assert all(abs(t - 1.0) < 1e-10 for t in traces)

    def test_matches_oracle_through_depth(self):
        # swap-network consistency: every observable vs dense Kraus evolution
        lat = LatticeSpec(2, 3)
        inst = build_circuit(lat, 8, master_seed=42)
        exact = {}
        evolve_exact(inst, 0.1, observer=lambda d, s: exact.__setitem__(d, s),
                     observe_every=2)
        recs = []
        run_circuit(inst, 0.1, chi_max=64, observe_every=2,
                    observer=lambda d, s: recs.append(depth_record(s, d)))
        for rec in recs:
            ds = exact[rec.depth]
            assert rec.trace == pytest.approx(np.trace(ds.matrix).real, abs=1e-8)
            assert rec.purity == pytest.approx(exact_purity(ds), abs=1e-8)
            for l in (1, 2):
                assert rec.ee_per_cut[l - 1] == pytest.approx(
                    exact_operator_ee(ds, l), abs=1e-8
                )

    def test_trace_floor_abort(self):
        inst = build_circuit(LatticeSpec(2, 3), 16, master_seed=9)
        with pytest.raises(TraceFloorError) as err:
            run_circuit(inst, 0.0, chi_max=1)
        assert err.value.trace < 0.5

    def test_gauge_moves_do_not_change_observables(self):
        inst = build_circuit(LatticeSpec(2, 3), 6, master_seed=10)
        state, _ = run_circuit(inst, 0.1, chi_max=64)
        before = observables_of(state)
        for target in (0, state.n - 1, 2):
            state.move_center(target)
            np.testing.assert_allclose(observables_of(state), before, atol=1e-10)

    def test_cum_discarded_monotone(self):
        inst = build_circuit(LatticeSpec(2, 3), 10, master_seed=11)
        seen = []
        run_circuit(inst, 0.05, chi_max=8, trace_floor=0.0,
                    observer=lambda d, s: seen.append(s.cum_discarded))
        assert all(b >= a for a, b in zip(seen, seen[1:]))
        assert seen[-1] > 0  # chi=8 must actually truncate


class TestCheckpoint:
    def test_bit_exact_roundtrip_and_resume(self, tmp_path):
        lat = LatticeSpec(2, 3)
        full = build_circuit(lat, 8, master_seed=12)
        half = build_circuit(lat, 4, master_seed=12)

        state, _ = run_circuit(half, 0.1, chi_max=64)
        path = tmp_path / "ckpt.npz"
        save_state(state, path, metadata={"seed": 12, "depth": 4})
        loaded, meta = load_state(path)
        assert meta == {"seed": 12, "depth": 4}
        assert loaded.center == state.center
        assert loaded.cum_discarded == state.cum_discarded
        for a, b in zip(loaded.tensors, state.tensors):
            assert np.array_equal(a, b)

        # resuming the remaining layers matches the uninterrupted run bit-for-bit
        for k in range(4, 8):
            for st in (state, loaded):
                for edge, u in sorted(
                    full.layers[k],
                    key=lambda g: min(st.sitemap.position(g[0].site_a),
                                      st.sitemap.position(g[0].site_b)),
                ):
                    pa = st.sitemap.position(edge.site_a)
                    pb = st.sitemap.position(edge.site_b)
                    op = noisy_gate_superop(u, 0.1)
                    if pa > pb:
                        op = op.swapped_sites()
                    st.apply_long_range_channel(min(pa, pb), max(pa, pb), op)
        for a, b in zip(loaded.tensors, state.tensors):
            assert np.array_equal(a, b)
