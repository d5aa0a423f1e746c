import csv
import json

import pytest

from crackfield.core.analysis import shell_decay
from crackfield.core.lattice import LatticeDomain, ScalarField
from crackfield.utils.report import read_report, write_decay_reports, write_field_csv, write_rows_csv


@pytest.fixture(scope="module")
def report():
    domain = LatticeDomain(64)
    return shell_decay(ScalarField(domain, domain.r ** -2.0), (8, 16), "synthetic", meta={"K": 0.4, "order": 0})


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_report_files_read_back(tmp_path, report, fmt):
    (path,) = write_decay_reports({"synthetic": report}, tmp_path, fmt)
    assert path.suffix == f".{fmt}"
    restored = read_report(path)
    assert restored.label == "synthetic"
    assert restored.slope == pytest.approx(report.slope, rel=1e-12)
    assert restored.window == pytest.approx(report.window)
    assert [s.count for s in restored.shells] == [s.count for s in report.shells]


def test_json_schema(tmp_path, report):
    (path,) = write_decay_reports({"synthetic": report}, tmp_path)
    data = json.loads(path.read_text(encoding="utf-8"))
    assert set(data) == {"meta", "shells", "slope", "window"}
    assert set(data["shells"][0]) == {"r_mid", "max", "mean", "count"}
    assert data["meta"]["R"] == 64 and data["meta"]["K"] == 0.4


def test_unknown_format_rejected(tmp_path, report):
    with pytest.raises(ValueError):
        write_decay_reports({"synthetic": report}, tmp_path, "xml")
    with pytest.raises(ValueError):
        read_report(tmp_path / "report.txt")


def test_field_snapshot(tmp_path, small_domain):
    field = ScalarField.from_function(small_domain, lambda x1, x2: x1 + 10 * x2)
    path = write_field_csv(field, tmp_path / "field.csv")
    with open(path, encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["a", "b", "value"]
    assert len(rows) - 1 == small_domain.n_free
    a, b, value = rows[1]
    assert float(value) == pytest.approx(int(a) - 0.5 + 10 * (int(b) - 0.5))


def test_rows_csv(tmp_path):
    path = write_rows_csv([{"K": 0.1, "lambda_min": 0.9}, {"K": 0.2, "lambda_min": 0.8}], tmp_path / "rows.csv")
    with open(path, encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [float(r["K"]) for r in rows] == [0.1, 0.2]
