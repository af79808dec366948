import json

import numpy as np
import pytest

from slar.dist import paper_distribution, sample
from slar.game import GameConfig, run_standard
from slar.report import (
    fmt,
    render_acc_figure,
    render_deltaw_figure,
    render_weights_figure,
    summary_entry,
    write_json,
    write_trajectory_csv,
)
from slar.solve import OptimizerConfig, Stochastic


@pytest.fixture(scope="module")
def small_traj():
    spec = paper_distribution(8, 0.7, 0.02, 0.05)
    data = sample(spec, 200, seed=2)
    test = sample(spec, 80, seed=3)
    cfg = GameConfig(eps=0.04, rounds=4,
                     solver=OptimizerConfig(method=Stochastic(batch_size=50, seed=1), lam=0.01))
    return spec, run_standard(data, spec, cfg, test=test)


class TestTrajectoryCsv:
    def test_rows_and_snapshots(self, small_traj, tmp_path):
        _, traj = small_traj
        path = tmp_path / "traj.csv"
        snaps = tmp_path / "snaps"
        write_trajectory_csv(traj, path, snapshot_dir=snaps)
        lines = path.read_text().splitlines()
        assert len(lines) == 5
        assert lines[1].split(",")[0] == "1"
        for t in range(1, 5):
            snap = snaps / f"w_t{t}.csv"
            assert snap.exists()
            body = snap.read_text().splitlines()
            assert body[0] == "index,w"
            assert len(body) == 10  # header + 9 coordinates

    def test_values_roundtrip_at_full_precision(self, small_traj, tmp_path):
        _, traj = small_traj
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        row = path.read_text().splitlines()[1].split(",")
        assert float(row[1]) == traj.records[0].delta_w_norm
        assert float(row[7]) == traj.records[0].objective


class TestSummary:
    def test_entry_keys_and_tail_stats(self, small_traj):
        _, traj = small_traj
        entry = summary_entry(traj, condition_report=None)
        deltas = [r.delta_w_norm for r in traj.records]
        assert entry["deltaw_mean_tail"] == pytest.approx(np.mean(deltas[2:]))
        assert entry["deltaw_min_tail"] == pytest.approx(np.min(deltas[2:]))
        assert entry["condition_report"] is None


class TestJson:
    def test_seventeen_significant_digits(self, tmp_path):
        path = tmp_path / "x.json"
        write_json(path, {"value": 1.0 / 3.0})
        assert "0.33333333333333331" in path.read_text()

    def test_nan_becomes_null(self, tmp_path):
        path = tmp_path / "n.json"
        write_json(path, {"value": float("nan"), "inf": float("inf")})
        loaded = json.load(open(path))
        assert loaded["value"] is None
        assert loaded["inf"] == "inf"

    def test_nested_structures(self, tmp_path):
        path = tmp_path / "s.json"
        obj = [{"a": [1, 2.5, True]}, {"b": {"c": None, "d": "text\"quoted\""}}]
        write_json(path, obj)
        assert json.load(open(path)) == [{"a": [1, 2.5, True]},
                                         {"b": {"c": None, "d": 'text"quoted"'}}]

    def test_fmt_roundtrips_exactly(self):
        for x in (0.1, 1.0 / 3.0, 1e-300, -2.5e16, 0.0):
            assert float(fmt(x)) == x


class TestFigures:
    def test_figures_render_and_reproduce(self, small_traj, tmp_path):
        spec, traj = small_traj
        mask = np.abs(spec.mu) <= 0.04
        a = tmp_path / "a.svg"
        b = tmp_path / "b.svg"
        render_deltaw_figure([traj], a)
        render_deltaw_figure([traj], b)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes().startswith(b"<?xml")

        render_acc_figure([traj], tmp_path / "acc.svg")
        render_weights_figure([traj], mask, tmp_path / "w.svg")
        assert (tmp_path / "acc.svg").stat().st_size > 1000
        assert (tmp_path / "w.svg").stat().st_size > 1000

    def test_no_timestamp_in_svg(self, small_traj, tmp_path):
        _, traj = small_traj
        path = tmp_path / "d.svg"
        render_deltaw_figure([traj], path)
        assert b"<dc:date>" not in path.read_bytes()
