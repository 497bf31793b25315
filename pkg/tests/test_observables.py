import numpy as np
import pytest

from dmps.channels import unitary_superop
from dmps.circuits import LatticeSpec, build_circuit
from dmps.engine import DensityMPS, init_density_mps, run_circuit
from dmps.observables import (
    CutIndex,
    InvalidStateError,
    depth_record,
    max_operator_ee,
    operator_ee_at_cut,
    purity_of,
    record_csv_header,
    record_csv_row,
    second_renyi,
    singular_spectrum,
    trace_of,
)
from dmps.oracle import evolve_exact, exact_operator_ee, exact_purity

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
BELL_U = CNOT @ np.kron(H, np.eye(2))


def bell_across_columns():
    """2x2 lattice, pure Bell pair spanning the single column cut."""
    state = init_density_mps(LatticeSpec(2, 2), chi_max=16)
    state.apply_long_range_channel(0, 3, unitary_superop(BELL_U))
    return state


class TestOperatorEE:
    def test_product_pure_state_is_zero(self):
        state = init_density_mps(LatticeSpec(2, 3), 4)
        assert operator_ee_at_cut(state, 1) == pytest.approx(0.0, abs=1e-12)
        assert operator_ee_at_cut(state, 2) == pytest.approx(0.0, abs=1e-12)

    def test_maximally_mixed_state_is_zero(self):
        # the defining feature: EE vanishes for the maximally mixed state too
        state = DensityMPS.infinite_temperature(LatticeSpec(2, 3), 4)
        assert operator_ee_at_cut(state, 1) == pytest.approx(0.0, abs=1e-12)

    def test_bell_pair_gives_two_bits(self):
        assert operator_ee_at_cut(bell_across_columns(), 1) == pytest.approx(
            2.0, abs=1e-10
        )

    def test_cut_bounds(self):
        state = init_density_mps(LatticeSpec(2, 3), 4)
        with pytest.raises(ValueError):
            operator_ee_at_cut(state, 0)
        with pytest.raises(ValueError):
            operator_ee_at_cut(state, 3)

    def test_matches_exact_oracle_on_random_instance(self):
        lat = LatticeSpec(2, 3)
        inst = build_circuit(lat, 6, master_seed=21)
        state, _ = run_circuit(inst, 0.1, chi_max=64)
        exact = evolve_exact(inst, 0.1)
        for l in (1, 2):
            assert operator_ee_at_cut(state, l) == pytest.approx(
                exact_operator_ee(exact, l), abs=1e-8
            )


class TestMaxOperatorEE:
    def test_product_state_ties_break_to_first_cut(self):
        value, cut = max_operator_ee(init_density_mps(LatticeSpec(2, 4), 4))
        assert value == pytest.approx(0.0, abs=1e-12)
        assert cut == 1

    def test_entanglement_only_across_last_cut(self):
        # Bell pair between columns 1 and 2 of a 2x3 lattice: chain-adjacent
        # sites (3, 4); only the second column cut sees it
        state = init_density_mps(LatticeSpec(2, 3), chi_max=16)
        state.apply_adjacent_channel(3, unitary_superop(BELL_U))
        value, cut = max_operator_ee(state)
        assert cut == 2
        assert value == pytest.approx(2.0, abs=1e-10)
        assert operator_ee_at_cut(state, 1) == pytest.approx(0.0, abs=1e-10)

    def test_matches_exhaustive_oracle_cuts(self):
        lat = LatticeSpec(2, 3)
        inst = build_circuit(lat, 8, master_seed=22)
        state, _ = run_circuit(inst, 0.05, chi_max=64)
        exact = evolve_exact(inst, 0.05)
        value, cut = max_operator_ee(state)
        oracle = [exact_operator_ee(exact, l) for l in (1, 2)]
        assert value == pytest.approx(max(oracle), abs=1e-8)
        assert cut == int(np.argmax(oracle)) + 1


class TestScalarObservables:
    def test_trace_purity_renyi_of_initial_state(self):
        state = init_density_mps(LatticeSpec(2, 2), 4)
        assert trace_of(state) == pytest.approx(1.0, abs=1e-12)
        assert purity_of(state) == pytest.approx(1.0, abs=1e-12)
        assert second_renyi(state) == pytest.approx(0.0, abs=1e-10)

    def test_renyi_of_maximally_mixed_is_n(self):
        state = DensityMPS.infinite_temperature(LatticeSpec(2, 3), 4)
        assert second_renyi(state) == pytest.approx(6.0, abs=1e-10)

    def test_purity_matches_oracle(self):
        lat = LatticeSpec(2, 3)
        inst = build_circuit(lat, 6, master_seed=23)
        state, _ = run_circuit(inst, 0.12, chi_max=64)
        exact = evolve_exact(inst, 0.12)
        assert purity_of(state) == pytest.approx(exact_purity(exact), abs=1e-8)

    def test_renyi_invariant_under_swaps_and_gauge(self):
        inst = build_circuit(LatticeSpec(2, 3), 6, master_seed=24)
        state, _ = run_circuit(inst, 0.1, chi_max=64)
        s2 = second_renyi(state)
        state.swap_adjacent(1)
        state.move_center(0)
        assert second_renyi(state) == pytest.approx(s2, abs=1e-8)


class TestSpectrum:
    def test_product_state_spectrum(self):
        spec = singular_spectrum(init_density_mps(LatticeSpec(2, 2), 4), 1)
        np.testing.assert_allclose(spec, [1.0], atol=1e-12)

    def test_bell_spectrum_is_flat(self):
        # vectorized Bell pair: four equal Schmidt values 1/2 across the cut
        # (squares sum to 1; entropy 2 bits, consistent with the EE test)
        spec = singular_spectrum(bell_across_columns(), 1)
        np.testing.assert_allclose(spec, [0.5, 0.5, 0.5, 0.5], atol=1e-10)

    def test_squares_sum_to_one_and_descending(self):
        inst = build_circuit(LatticeSpec(2, 3), 8, master_seed=25)
        state, _ = run_circuit(inst, 0.1, chi_max=16, trace_floor=0.0)
        spec = singular_spectrum(state, 1)
        assert np.sum(spec**2) == pytest.approx(1.0, abs=1e-10)
        assert np.all(np.diff(spec) <= 1e-15)
        assert len(spec) <= 16  # capped at the stored bond, no zero padding


class TestInvariants:
    def test_ee_bounded_by_sites_and_bond(self):
        inst = build_circuit(LatticeSpec(2, 3), 8, master_seed=26)
        state, _ = run_circuit(inst, 0.08, chi_max=16, trace_floor=0.0)
        for l in (1, 2):
            ee = operator_ee_at_cut(state, l)
            sites_bound = 2 * min(l * 2, (3 - l) * 2)
            bond = state.bond_dims[CutIndex.for_lattice(state.lattice, l).bond]
            assert ee <= sites_bound + 1e-9
            assert ee <= np.log2(bond) + 1e-9

    def test_pure_state_rule_small_lattice(self):
        # operator EE of a globally pure state = 2x von Neumann EE
        from dmps.oracle import exact_von_neumann_ee

        lat = LatticeSpec(2, 3)
        inst = build_circuit(lat, 6, master_seed=27)
        state, _ = run_circuit(inst, 0.0, chi_max=64)
        exact = evolve_exact(inst, 0.0)
        for l in (1, 2):
            assert operator_ee_at_cut(state, l) == pytest.approx(
                2.0 * exact_von_neumann_ee(exact, l), abs=1e-8
            )

    def test_invalid_state_detected(self):
        state = init_density_mps(LatticeSpec(2, 2), 4)
        state.tensors[0] = np.zeros_like(state.tensors[0])
        with pytest.raises(InvalidStateError):
            operator_ee_at_cut(state, 1)


class TestCsvSchema:
    def test_header_and_row_shape(self):
        lat = LatticeSpec(2, 3)
        state = init_density_mps(lat, 4)
        rec = depth_record(state, 0)
        header = record_csv_header(lat.L2)
        row = record_csv_row(rec, "run0", 123, lat, 0.1, 4)
        assert header.split(",")[:7] == ["run_id", "seed", "L1", "L2", "p", "chi", "depth"]
        assert len(header.split(",")) == len(row.split(","))
        assert "ee_cut_1" in header and "ee_cut_2" in header
        parts = row.split(",")
        assert parts[0] == "run0" and parts[1] == "123"
        assert float(parts[7]) == pytest.approx(1.0)  # trace
