"""Config parsing: defaults, broadcasting, and path-addressed errors."""
import copy
import json

import numpy as np
import pytest

from lossysched import ConfigError, load_config, parse_config

from .conftest import BENCH_CONFIG


def doc():
    return copy.deepcopy(BENCH_CONFIG)


class TestParse:
    def test_benchmark_round_trip(self):
        cfg = parse_config(doc())
        assert cfg.plant.num_queries == 2
        assert cfg.net.num_states == 1
        np.testing.assert_allclose(cfg.net.loss, [[0.10, 0.15]])
        np.testing.assert_allclose(cfg.net.net_cost, [[1.0, 0.5]])
        assert cfg.solver.dedup_tol == 1e-3
        assert cfg.sim.replications == 3

    def test_defaults_filled(self):
        d = doc()
        # default B = 0 needs a stable plant to pass stabilizability
        d["plant"]["A"] = [[0.5]]
        del d["plant"]["B"], d["plant"]["R"], d["plant"]["M"]
        del d["network"]["net_cost"], d["solver"], d["sim"]
        cfg = parse_config(d)
        np.testing.assert_allclose(cfg.plant.B, [[0.0]])
        np.testing.assert_allclose(np.asarray(cfg.plant.R), [[1.0]])
        np.testing.assert_allclose(cfg.net.net_cost, 0.0)
        assert cfg.solver.alpha == 1.0
        assert cfg.sim.T == 5000

    def test_scalar_entries_promoted(self):
        d = doc()
        d["plant"]["A"] = 2.0  # bare scalar becomes a 1x1 matrix
        cfg = parse_config(d)
        assert cfg.plant.A.shape == (1, 1)

    def test_sensor_table_broadcast_across_states(self):
        d = doc()
        d["network"]["N"] = 2
        d["network"]["P"] = [
            [[0.5, 0.5], [0.5, 0.5]],
            [[0.5, 0.5], [0.5, 0.5]],
        ]
        # C/F given once per query are shared by both network states;
        # per-state tables broadcast likewise
        cfg = parse_config(d)
        assert len(cfg.plant.C[0]) == 2
        assert cfg.net.loss.shape == (2, 2)

    def test_missing_plant_block(self):
        d = doc()
        del d["plant"]
        with pytest.raises(ConfigError, match="plant"):
            parse_config(d)

    def test_missing_lambda(self):
        d = doc()
        del d["network"]["lambda"]
        with pytest.raises(ConfigError, match="lambda"):
            parse_config(d)

    def test_nonfinite_entry_addressed(self):
        d = doc()
        d["plant"]["A"] = [[float("nan")]]
        with pytest.raises(ConfigError, match="plant.A"):
            parse_config(d)

    def test_bad_sensor_count(self):
        d = doc()
        d["plant"]["C"] = [[[[1.0]]]]  # one sensor for a two-query network
        with pytest.raises(ConfigError, match="plant.C"):
            parse_config(d)

    def test_validation_errors_are_addressed(self):
        d = doc()
        d["network"]["N"] = 2
        d["network"]["P"] = [
            [[0.5, 0.47], [0.5, 0.5]],
            [[0.5, 0.5], [0.5, 0.5]],
        ]
        with pytest.raises(ConfigError, match=r"network\.P\[0\] row 0 sums to 0.97"):
            parse_config(d)

    def test_loss_out_of_range_addressed(self):
        d = doc()
        d["network"]["lambda"] = [[0.1, 1.0]]
        with pytest.raises(ConfigError, match="network.loss"):
            parse_config(d)

    def test_assumption_violation_rejected(self):
        d = doc()
        d["plant"]["F"] = [[[[1.0, 0.0]]], [[[0.0, 1.5]]]]  # overlaps D
        with pytest.raises(ConfigError, match=r"F\[0\]\[0\]"):
            parse_config(d)

    def test_top_level_not_object(self):
        with pytest.raises(ConfigError):
            parse_config([1, 2, 3])


class TestLoad:
    def test_load_from_file(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps(doc()))
        cfg = load_config(path)
        assert cfg.plant.dim == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)
