"""Tests pour export/artifact_exporter.py."""

import math

import matplotlib.pyplot as plt
import pytest

from core.errors import InvalidArgumentError
from export.artifact_exporter import (
    CONVERGENCE_COLUMNS,
    EFFICIENCY_COLUMNS,
    TRAJECTORY_COLUMNS,
    emit_csv,
    emit_svg_lineplot,
    export_table_csv,
    lineplot_figure,
    read_csv,
    trajectory_rows,
)
from harness.experiments import ConvergenceRow, EfficiencyRow
from integrators.driver import integrate


class TestCsv:
    def test_empty_table_has_header_only(self):
        assert export_table_csv([], CONVERGENCE_COLUMNS) == "method,h,error,observed_order\n"

    def test_round_trip(self, tmp_path):
        rows = [
            ConvergenceRow("seisav", 0.03125, 1.2345678901234567e-4),
            ConvergenceRow("seisav", 0.015625, 3.0864197530864197e-05, 2.0000000000000004),
        ]
        path = emit_csv(rows, str(tmp_path / "out" / "convergence.csv"), CONVERGENCE_COLUMNS)
        parsed = read_csv(path)
        assert parsed[0] == {"method": "seisav", "h": 0.03125, "error": 1.2345678901234567e-4, "observed_order": None}
        assert parsed[1]["error"] == rows[1].error
        assert parsed[1]["observed_order"] == rows[1].observed_order

    def test_integer_counters(self, tmp_path):
        row = EfficiencyRow("seilm", 0.0625, 1e-3, 0.25, 0, 48, 16, 0)
        parsed = read_csv(emit_csv([row], str(tmp_path / "eff.csv"), EFFICIENCY_COLUMNS))
        assert parsed[0]["newton_iters"] == 48
        assert isinstance(parsed[0]["iterative_solves"], int)

    def test_trajectory_rows(self, kg_system, tmp_path):
        traj = integrate(kg_system, "seavf", None, 0.125, 0.5)
        rows = trajectory_rows(traj)
        assert [r["step"] for r in rows] == [0, 1, 2, 3, 4]
        assert all(r["aux_energy"] is None for r in rows)
        parsed = read_csv(emit_csv(rows, str(tmp_path / "traj.csv"), TRAJECTORY_COLUMNS))
        assert parsed[-1]["H"] == traj.H[-1]


class TestSvg:
    def test_loglog_plot(self, tmp_path):
        path = emit_svg_lineplot(
            {"seisav": ([0.1, 0.05, 0.025], [1e-3, 2.5e-4, 6.25e-5]), "a&b": ([0.1, 0.05], [0.0, 1e-4])},
            str(tmp_path / "conv.svg"), axes="loglog", title="Convergence", xlabel="h", ylabel="erreur",
        )
        content = open(path, encoding="utf-8").read()
        assert "<svg" in content
        assert 'id="courbe_0"' in content
        assert 'id="courbe_1"' in content
        assert "a&amp;b" in content
        assert "Convergence" in content

    def test_loglog_scales_and_drops_nonpositive(self):
        fig, plotted = lineplot_figure({"a": ([1.0, 2.0, 4.0], [0.0, 1e-2, 2.5e-3])}, axes="loglog")
        ax = fig.axes[0]
        assert plotted == 1
        assert ax.get_xscale() == "log" and ax.get_yscale() == "log"
        assert list(ax.get_lines()[0].get_xdata()) == [2.0, 4.0]
        plt.close(fig)

    def test_linear_plot(self, tmp_path):
        fig, _ = lineplot_figure({"H": ([0.0, 1.0, 2.0], [1.0, 0.9, 0.85])}, axes="linear")
        assert fig.axes[0].get_yscale() == "linear"
        plt.close(fig)
        path = emit_svg_lineplot({"H": ([0.0, 1.0, 2.0], [1.0, 0.9, 0.85])}, str(tmp_path / "h.svg"), axes="linear")
        assert 'id="courbe_0"' in open(path, encoding="utf-8").read()

    def test_unknown_axes(self, tmp_path):
        with pytest.raises(InvalidArgumentError, match="Axes inconnus"):
            emit_svg_lineplot({}, str(tmp_path / "x.svg"), axes="semilog")

    def test_no_plottable_data(self, tmp_path, caplog):
        path = emit_svg_lineplot({"zero": ([1.0], [math.nan])}, str(tmp_path / "empty.svg"))
        assert "Aucune donnée" in caplog.text
        assert "courbe_0" not in open(path, encoding="utf-8").read()
