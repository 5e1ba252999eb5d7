import csv
import json

import numpy as np
import pytest

from thinphase.boundaries.analytic import ConstantBoundary
from thinphase.config import DiagnosticsOptions
from thinphase.diagnostics import extract_free_boundary
from thinphase.extension import trivial_solution
from thinphase.grid import GridSpec, ScalarField, build_grid
from thinphase.reports import (
    beta_rows, diagnostic_report, energy_report, provenance, read_csv,
    strata_rows, write_csv, write_json
)
from thinphase.solver import minimize
from thinphase.version import __version__

RADII = (0.125, 0.25)


def test_provenance(tiny_grid):
    meta = provenance(tiny_grid.spec, seed=4, digest="f00")
    assert meta == {
        "tool": "thinphase",
        "version": __version__,
        "scenario_hash": "f00",
        "seed": 4,
        "grid": tiny_grid.spec.as_dict(),
    }


def test_write_json_handles_numpy(tmp_path):
    path = tmp_path / "nested" / "report.json"
    write_json(path, {"array": np.arange(3), "scalar": np.float64(0.5), "flag": np.bool_(True)})
    assert json.loads(path.read_text()) == {"array": [0, 1, 2], "scalar": 0.5, "flag": True}


def test_write_csv(tmp_path):
    path = tmp_path / "rows.csv"
    write_csv(path, ["a", "b"], [{"a": 1, "b": 2.5}, {"a": 2, "b": ""}])
    with path.open() as handle:
        rows = list(csv.DictReader(handle))
    assert rows == [{"a": "1", "b": "2.5"}, {"a": "2", "b": ""}]
    assert read_csv(path) == (None, rows)


def test_csv_carries_provenance(tiny_grid, tmp_path):
    path = tmp_path / "rows.csv"
    meta = provenance(tiny_grid.spec, seed=2, digest="abc")
    write_csv(path, ["a"], [{"a": np.float64(0.5)}], meta)
    first = path.read_text().splitlines()[0]
    assert first.startswith("# ")
    assert json.loads(first[2:]) == meta
    assert read_csv(path) == (meta, [{"a": "0.5"}])


def test_energy_report(tiny_grid):
    result = minimize(tiny_grid, ConstantBoundary(value=0.0).generate(tiny_grid))
    meta = provenance(tiny_grid.spec)
    report = energy_report(result, meta)
    assert report["provenance"] is meta
    assert report["energy"]["total"] == 0.0
    assert report["zero_nodes"] == 9
    assert set(report) >= {"created", "iterations", "converged", "method", "flips"}


class TestDiagnosticReport:
    def test_sections(self, trivial_line):
        report, profile = diagnostic_report(
            trivial_line, {"tool": "thinphase"}, DiagnosticsOptions(radii=RADII),
        )
        assert report["free_boundary"]["count"] == 2
        assert not report["free_boundary"]["empty"]
        origin, shifted = report["free_boundary"]["per_point"]
        assert origin["flatness"] == 0.0
        assert origin["psi0"] == pytest.approx(1.0, rel=0.05)
        assert origin["class"] == "REGULAR"
        assert shifted["point"][0] == pytest.approx(1.0 / 32)
        assert shifted["flatness"] == 0.0
        assert report["weiss"]["radii"] == list(RADII)
        assert profile.radii == RADII
        assert report["origin"]["psi0"] == pytest.approx(1.0, rel=0.1)
        assert report["origin"]["class"] is not None
        assert [row[0] for row in report["lambda"]["growth"]] == list(RADII)
        assert report["growth"]["holder_constant"] >= report["growth"]["nondegeneracy_constant"]
        assert report["geometry"]["perimeter"] == pytest.approx(1.0)
        assert report["geometry"]["corkscrew"]["exterior"] > 0.0
        assert "strata" not in report

    def test_toggles(self, trivial_line):
        options = DiagnosticsOptions(weiss=False, lambda_=False, radii=RADII)
        report, profile = diagnostic_report(trivial_line, {}, options)
        assert profile is None
        assert "weiss" not in report
        assert "lambda" not in report

    def test_out_of_grid_sections_are_skipped(self, trivial_line):
        report, profile = diagnostic_report(
            trivial_line, {}, DiagnosticsOptions(radii=RADII), center=(0.9,),
        )
        assert profile is None
        assert report["weiss"] is None
        assert report["origin"]["psi0"] is None
        assert report["origin"]["homogeneity_deviation"] is None

    def test_empty_free_boundary(self, tiny_grid):
        ones = ScalarField(tiny_grid, np.ones(tiny_grid.shape))
        report, _ = diagnostic_report(ones, {}, DiagnosticsOptions(weiss=False, radii=RADII))
        assert report["free_boundary"]["empty"]
        assert report["free_boundary"]["per_point"] == []
        assert "geometry" not in report
        assert report["growth"]["holder_constant"] is None

    def test_strata_section(self):
        field = trivial_solution(build_grid(GridSpec(1, 0.5, 1.0, 1.0 / 16)))
        report, _ = diagnostic_report(field, {}, DiagnosticsOptions(weiss=False, lambda_=False, strata=True, radii=RADII))
        assert len(report["strata"]) == 2
        assert {row["k"] for row in report["strata"]} == {0}


def test_strata_and_beta_rows():
    field = trivial_solution(build_grid(GridSpec(1, 0.5, 1.0, 1.0 / 16)))
    free_boundary = extract_free_boundary(field)
    rows = strata_rows(field, free_boundary)
    assert [row["point"] for row in rows] == ["0", "0.0625"]
    assert all(row["min_distance"] > 0.0 for row in rows)
    beta = beta_rows(field, free_boundary, RADII, 0)
    assert len(beta) == 4
    assert all(row["mass"] == 2.0 for row in beta)
    assert beta_rows(field, extract_free_boundary(ScalarField(field.grid, np.ones(field.grid.shape))), RADII, 0) == []
