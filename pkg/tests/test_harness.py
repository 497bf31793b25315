import json

import numpy as np
import pytest

from dmps.circuits import LatticeSpec
from dmps.harness import (
    ConfigError,
    GridResult,
    SweepConfig,
    _aggregate,
    config_from_dict,
    derive_instance_seed,
    extract_s_max,
    load_sweep_result,
    run_instance,
    run_sweep,
    validate_against_oracle,
)
from dmps.observables import DepthRecord


def small_config(**overrides):
    doc = {
        "schema_version": 1,
        "lattices": [[2, 3]],
        "p_values": [0.1],
        "chi": 16,
        "depth_max": 4,
        "master_seed": 7,
        "instances": 2,
        "observe_every": 2,
        "trace_floor": 0.0,
    }
    doc.update(overrides)
    return config_from_dict(doc)


def make_record(depth, s_max, **overrides):
    kwargs = dict(depth=depth, trace=1.0, purity=0.5, second_renyi=1.0,
                  ee_per_cut=(s_max, s_max / 2), s_max_over_cuts=s_max,
                  argmax_cut=1, max_bond=4, cum_discarded=0.0)
    kwargs.update(overrides)
    return DepthRecord(**kwargs)


class TestConfig:
    def test_missing_field_reports_path(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({"schema_version": 1, "lattices": [[2, 2]]})
        assert err.value.path in ("p_values", "chi", "depth_max", "master_seed")

    def test_bad_lattice_entry_path(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({
                "schema_version": 1, "lattices": [[2, 1]], "p_values": [0.1],
                "chi": 4, "depth_max": 2, "master_seed": 0,
            })
        assert err.value.path == "lattices[0][1]"

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({
                "schema_version": 1, "lattices": [[2, 2]], "p_values": [0.1],
                "chi": 4, "depth_max": 2, "master_seed": 0, "chi_max": 4,
            })
        assert err.value.path == "chi_max"

    def test_p_range_enforced(self):
        with pytest.raises(ConfigError) as err:
            small_config(p_values=[0.1, 0.0])
        assert err.value.path == "p_values[1]"

    def test_observed_depths_include_endpoints(self):
        config = small_config(depth_max=5, observe_every=2)
        assert config.observed_depths() == [0, 2, 4, 5]

    def test_roundtrip_through_dict(self):
        config = small_config()
        assert config_from_dict(config.to_json_dict()) == config


class TestSeeds:
    def test_derived_seeds_distinct_and_stable(self):
        seeds = {derive_instance_seed(7, g, i) for g in range(3) for i in range(10)}
        assert len(seeds) == 30
        assert derive_instance_seed(7, 1, 2) == derive_instance_seed(7, 1, 2)


class TestRunSweep:
    def test_depth_zero_row_equals_init_observables(self):
        result = run_sweep(small_config(instances=1))
        rec = result.grids[0].records[0][0]
        assert rec.depth == 0
        assert rec.trace == pytest.approx(1.0, abs=1e-12)
        assert rec.purity == pytest.approx(1.0, abs=1e-12)
        assert rec.s_max_over_cuts == pytest.approx(0.0, abs=1e-10)

    def test_byte_identical_reruns(self, tmp_path):
        config = small_config()
        run_sweep(config, output_dir=tmp_path / "a")
        run_sweep(config, output_dir=tmp_path / "b")
        raw = "raw_2x3_p0p1.csv"
        assert (tmp_path / "a" / raw).read_bytes() == (tmp_path / "b" / raw).read_bytes()

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        config = small_config()
        run_sweep(config, output_dir=tmp_path / "w1")
        from dataclasses import replace

        run_sweep(replace(config, workers=2), output_dir=tmp_path / "w2")
        raw = "raw_2x3_p0p1.csv"
        assert (tmp_path / "w1" / raw).read_bytes() == (tmp_path / "w2" / raw).read_bytes()

    def test_jensen_ordering_of_conventions(self):
        result = run_sweep(small_config(depth_max=6, instances=3))
        grid = result.grids[0]
        assert grid.s_max_of_mean_curve <= grid.mean_of_instance_max + 1e-9

    def test_instance_rows_rerunnable_standalone(self):
        config = small_config()
        result = run_sweep(config)
        grid = result.grids[0]
        records, _, flag = run_instance(
            grid.lattice, grid.p, config.chi, config.depth_max,
            grid.instance_seeds[1], observe_every=config.observe_every,
            trace_floor=config.trace_floor,
        )
        assert flag is None
        assert records == grid.records[1]

    def test_all_flagged_marks_grid_failed(self):
        config = small_config(chi=1, depth_max=10, trace_floor=0.5)
        result = run_sweep(config)
        grid = result.grids[0]
        assert grid.failed is not None
        assert set(grid.flagged) == {0, 1}
        assert extract_s_max(result) == []

    def test_hard_failure_marks_grid_but_others_proceed(self, monkeypatch):
        import dmps.harness as hq

        real = hq.run_instance

        def sometimes_broken(lattice, p, *args, **kwargs):
            if p == 0.2:
                raise RuntimeError("synthetic failure")
            return real(lattice, p, *args, **kwargs)

        monkeypatch.setattr(hq, "run_instance", sometimes_broken)
        result = run_sweep(small_config(p_values=[0.1, 0.2]))
        ok = [g for g in result.grids if not g.failed]
        bad = [g for g in result.grids if g.failed]
        assert len(ok) == 1 and ok[0].p == 0.1
        assert len(bad) == 1 and "synthetic failure" in bad[0].failed

    def test_persist_and_reload(self, tmp_path):
        config = small_config(depth_max=6, instances=3)
        result = run_sweep(config, output_dir=tmp_path / "out")
        loaded = load_sweep_result(tmp_path / "out")
        for a, b in zip(result.grids, loaded.grids):
            assert a.instance_seeds == b.instance_seeds
            assert a.records == b.records
            assert a.t_peak == b.t_peak
            assert a.s_max_of_mean_curve == pytest.approx(b.s_max_of_mean_curve)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["master_seed"] == 7


class TestAggregation:
    def grid_with_records(self, per_instance, flagged=()):
        lat = LatticeSpec(2, 3)
        grid = GridResult(
            lattice=lat, p=0.1, run_id="g", depths=[0, 2, 4],
            instance_seeds=list(range(len(per_instance))),
            records=[[make_record(d, s) for d, s in zip([0, 2, 4], curve)]
                     for curve in per_instance],
            flagged={i: "trace floor" for i in flagged},
        )
        _aggregate(grid)
        return grid

    def test_flagged_instances_excluded_from_means_but_kept(self):
        grid = self.grid_with_records([[0, 1, 2], [0, 3, 4], [0, 100, 100]],
                                      flagged=(2,))
        np.testing.assert_allclose(grid.s_max_mean, [0, 2, 3])
        assert grid.n_kept == 2
        assert 2 in grid.flagged
        assert len(grid.records[2]) == 3  # still present in raw records

    def test_unimodal_peak_extraction(self):
        grid = self.grid_with_records([[0, 5, 1], [0, 7, 1]])
        assert grid.t_peak == 2
        assert grid.s_max_of_mean_curve == pytest.approx(6.0)
        assert grid.peak_bracketed is True
        assert grid.mean_of_instance_max == pytest.approx(6.0)

    def test_monotone_curve_flagged_unbracketed(self):
        grid = self.grid_with_records([[0, 1, 2], [0, 2, 3]])
        assert grid.t_peak == 4
        assert grid.peak_bracketed is False

    def test_peak_tie_takes_smaller_depth(self):
        grid = self.grid_with_records([[0, 2, 2]])
        assert grid.t_peak == 2


class TestValidateAgainstOracle:
    def test_full_rank_is_exact(self):
        report = validate_against_oracle(LatticeSpec(2, 2), 0.1, 4, [4, 16], seed=3)
        by_chi = {r.chi: r for r in report.rows}
        assert by_chi[16].trace == pytest.approx(1.0, abs=1e-8)
        assert by_chi[16].fidelity == pytest.approx(1.0, abs=1e-8)
        assert by_chi[4].fidelity <= by_chi[16].fidelity + 1e-9
        assert 0.0 <= by_chi[4].fidelity <= 1.0 + 1e-9

    def test_size_cap(self):
        with pytest.raises(ValueError, match="9 qubits"):
            validate_against_oracle(LatticeSpec(4, 4), 0.1, 2, [4], seed=0)
