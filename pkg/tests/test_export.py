import numpy as np
import orjson

from models.circuit import CountsHistogram
from models.records import CheckResult
from services import export


def test_format_value():
    assert export.format_value(0.1) == "0.10000000000000001"
    assert export.format_value(np.float64(2.0)) == "2"
    assert export.format_value(True) == "true"
    assert export.format_value(3) == "3"


def test_dotted_names_keep_their_stem(tmp_path):
    path = export.write_rows(tmp_path / "demon_unitary_beta0.5", [{"x": 1.0}], {"beta": 0.5})
    assert path.name == "demon_unitary_beta0.5.csv"
    assert (tmp_path / "demon_unitary_beta0.5.meta.json").exists()


def test_json_is_sorted_and_handles_numpy(tmp_path):
    path = export.write_json(tmp_path / "payload.json", {"b": np.arange(3), "a": (1, 2), "c": 1 + 2j})
    text = path.read_bytes()
    assert text.index(b'"a"') < text.index(b'"b"') < text.index(b'"c"')
    assert orjson.loads(text) == {"a": [1, 2], "b": [0, 1, 2], "c": [1.0, 2.0]}


def test_empty_rows_write_an_empty_table(tmp_path):
    path = export.write_rows(tmp_path / "empty", [], {})
    assert path.read_text() == "\n"


def test_counts_one_file_per_replicate(tmp_path):
    histogram = CountsHistogram(bitstrings=["0", "1"], counts=[[3, 1], [2, 2]], shots_per_rep=4)
    paths = export.write_counts(tmp_path, "prep", histogram, {"seed": 1})
    assert [p.name for p in paths] == ["prep_rep0.csv", "prep_rep1.csv"]
    assert export.read_csv(paths[1]) == [{"bitstring": "0", "count": "2"}, {"bitstring": "1", "count": "2"}]
    meta = orjson.loads((tmp_path / "prep_rep1.meta.json").read_bytes())
    assert meta == {"rep": 1, "seed": 1, "shots_per_rep": 4}


def test_checks_summary(tmp_path):
    checks = [
        CheckResult(name="ok", worst_defect=0.0, tolerance=1e-9, instances=1, passed=True),
        CheckResult(name="bad", worst_defect=1.0, tolerance=1e-9, instances=1, passed=False),
    ]
    payload = orjson.loads(export.write_checks(tmp_path / "verify", checks, {}).read_bytes())
    assert payload["passed"] is False
    assert [c["name"] for c in payload["checks"]] == ["ok", "bad"]
