"""Curve aggregation and figure/table generation from metrics CSVs."""

import numpy as np
import pytest

from cavernrl.metrics import MetricsWriter
from cavernrl.plots import aggregate_runs, plot_groups, summary_table


def _write_run(path, steps, values):
    with MetricsWriter(path) as w:
        for s, v in zip(steps, values):
            w.write_row({"step": s, "success_rate": v})
    return path


def test_aggregate_single_run(tmp_path):
    p = _write_run(tmp_path / "a.csv", [100, 200, 300], [0.1, 0.2, 0.3])
    steps, mean, stderr = aggregate_runs([p], "success_rate")
    np.testing.assert_array_equal(steps, [100, 200, 300])
    np.testing.assert_allclose(mean, [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(stderr, np.zeros(3))


def test_aggregate_mean_and_stderr(tmp_path):
    a = _write_run(tmp_path / "a.csv", [1, 2], [0.0, 1.0])
    b = _write_run(tmp_path / "b.csv", [1, 2], [1.0, 3.0])
    c = _write_run(tmp_path / "c.csv", [1, 2], [2.0, 5.0])
    steps, mean, stderr = aggregate_runs([a, b, c], "success_rate")
    np.testing.assert_allclose(mean, [1.0, 3.0])
    # sample std with ddof=1 over {0,1,2} is 1, over {1,3,5} is 2
    np.testing.assert_allclose(stderr, [1.0 / np.sqrt(3), 2.0 / np.sqrt(3)])


def test_aggregate_inner_join_on_step(tmp_path, caplog):
    a = _write_run(tmp_path / "a.csv", [1, 2, 3], [10.0, 20.0, 30.0])
    b = _write_run(tmp_path / "b.csv", [2, 3, 4], [200.0, 300.0, 400.0])
    with caplog.at_level("WARNING", logger="cavernrl"):
        steps, mean, _ = aggregate_runs([a, b], "success_rate")
    np.testing.assert_array_equal(steps, [2, 3])
    np.testing.assert_allclose(mean, [110.0, 165.0])
    assert any("inner-join" in r.message for r in caplog.records)


def test_aggregate_no_common_steps(tmp_path):
    a = _write_run(tmp_path / "a.csv", [1], [0.0])
    b = _write_run(tmp_path / "b.csv", [2], [0.0])
    with pytest.raises(ValueError, match="common"):
        aggregate_runs([a, b], "success_rate")


def test_aggregate_missing_field(tmp_path):
    a = _write_run(tmp_path / "a.csv", [1], [0.0])
    with pytest.raises(ValueError, match="no column"):
        aggregate_runs([a], "not_a_field")


def test_aggregate_empty_list():
    with pytest.raises(ValueError, match="no metrics files"):
        aggregate_runs([], "success_rate")


def test_plot_groups_writes_figure(tmp_path):
    a = _write_run(tmp_path / "a.csv", [1, 2, 3], [0.1, 0.5, 0.7])
    b = _write_run(tmp_path / "b.csv", [1, 2, 3], [0.2, 0.4, 0.8])
    c = _write_run(tmp_path / "c.csv", [1, 2, 3], [0.0, 0.1, 0.2])
    out = plot_groups({"treated": [a, b], "control": [c]}, "success_rate",
                      tmp_path / "fig" / "curve.png", title="demo")
    assert out.exists()
    assert out.stat().st_size > 1000  # a real PNG, not an empty stub
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_summary_table_layout(tmp_path):
    a = _write_run(tmp_path / "a.csv", [1, 2], [0.0, 0.4])
    b = _write_run(tmp_path / "b.csv", [1, 2], [0.0, 0.6])
    text = summary_table({"mech": [a, b]}, ["success_rate"])
    lines = text.splitlines()
    assert lines[0].split() == ["group", "seeds", "success_rate"]
    assert set(lines[1]) <= {"-", " "}
    assert "mech" in lines[2] and "2" in lines[2].split()
    assert "0.5" in lines[2] and "±" in lines[2]
