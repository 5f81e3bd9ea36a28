import json
import math

from bmkam.artifacts import SCHEMA_VERSION, dumps, write_csv, write_json, write_jsonl


def test_json_cleaning(tmp_path):
    p = write_json(tmp_path / "a.json", {"x": math.nan, "y": math.inf, "z": [1.5]})
    doc = json.loads(p.read_text())
    assert doc == {"schema_version": SCHEMA_VERSION, "x": None, "y": "inf", "z": [1.5]}
    assert json.loads(dumps({}))["schema_version"] == SCHEMA_VERSION


def test_jsonl_and_csv(tmp_path):
    write_jsonl(tmp_path / "r.jsonl", [{"q": 1}, {"q": 2}])
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    assert [json.loads(s)["q"] for s in lines] == [1, 2]
    write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 2.5], [3, 4]])
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "a,b"
