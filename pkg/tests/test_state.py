# Standard library imports
import csv
import math
from fractions import Fraction
from types import SimpleNamespace
from unittest.mock import patch

# Related third-party imports
import numpy as np
import orjson
import pytest

# Local application/library specific imports
from muskatcorner.errors import MuskatError
from muskatcorner.geometry import DomainSpec, MeshSpec, build_domain
from muskatcorner.spectral import CornerParams, corner_spectrum
from muskatcorner.state import (
    FileUtility,
    ManifestUtility,
    aggregate_report,
    to_jsonable,
    write_mesh,
    write_residual_csv,
    write_trajectory_csv,
    write_zero_csv,
)


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as file:
        return list(csv.reader(file))


def test_file_read_success(tmpdir):
    """Test reading a file's content successfully."""
    file_path = tmpdir.join("sample.txt")
    file_path.write("Sample Content")
    content = FileUtility.read_file(str(file_path))
    assert content == "Sample Content"


def test_file_read_failure():
    """Test reading a non-existent file should fail."""
    with pytest.raises(MuskatError, match="Error reading the file"):
        FileUtility.read_file("non_existent_file.txt")


def test_file_write_success(tmpdir):
    """Test writing content to a file successfully, creating the directory."""
    file_path = tmpdir.join("nested", "sample_write.txt")
    FileUtility.write_file(str(file_path), "Sample Write Content")
    assert file_path.read() == "Sample Write Content"


def test_file_write_failure():
    """Test writing to a file should fail when an IOError occurs."""
    with patch("builtins.open", side_effect=IOError):
        with pytest.raises(MuskatError, match="Error writing to the file"):
            FileUtility.write_file("sample_write_fail.txt", "content")


def test_file_hash_calculation(tmpdir):
    file_path = tmpdir.join("sample_hash.txt")
    file_path.write("Sample Hash Content")
    file_hash = FileUtility.calculate_file_hash(str(file_path))
    assert len(file_hash) == 64  # SHA-256 hash has 64 characters
    assert file_hash == FileUtility.calculate_file_hash(str(file_path))


def test_file_hash_missing_file():
    with pytest.raises(MuskatError, match="File missing.txt not found."):
        FileUtility.calculate_file_hash("missing.txt")


def test_read_json_decode_error(tmpdir):
    file_path = tmpdir.join("broken.json")
    file_path.write("{not json")
    with pytest.raises(MuskatError, match="Error decoding JSON from"):
        FileUtility.read_json(str(file_path))


def test_to_jsonable():
    record = {
        "inf": math.inf,
        "ninf": -math.inf,
        "nan": math.nan,
        "z": 1.5 - 2j,
        "exact": Fraction(13, 4),
        "array": np.array([1.0, np.inf]),
        "scalar": np.float64(0.5),
        "flag": np.bool_(True),
        1: (None, "text"),
    }
    assert to_jsonable(record) == {
        "inf": "inf",
        "ninf": "-inf",
        "nan": "nan",
        "z": [1.5, -2.0],
        "exact": 3.25,
        "array": [1.0, "inf"],
        "scalar": 0.5,
        "flag": True,
        "1": [None, "text"],
    }


def test_write_json_sorted_and_stable(tmpdir):
    path = str(tmpdir.join("out", "record.json"))
    FileUtility.write_json(path, {"b": 1, "a": math.inf})
    first = FileUtility.read_file(path)
    FileUtility.write_json(path, {"a": math.inf, "b": 1})
    assert FileUtility.read_file(path) == first
    assert list(orjson.loads(first)) == ["a", "b"]


def test_write_zero_csv(tmpdir):
    spectrum = corner_spectrum(CornerParams(a2=1.0, a3=0.0, k=0.5, q=1, p=4))
    path = write_zero_csv(str(tmpdir.join("zeros.csv")), [spectrum.zeros_plus, spectrum.zeros_minus])
    rows = _read_rows(path)
    assert rows[0] == ["kind", "index", "location", "multiplicity", "residual"]
    assert len(rows) == 1 + spectrum.zeros_plus.count + spectrum.zeros_minus.count
    kinds = {row[0] for row in rows[1:]}
    assert len(kinds) == 2


def test_write_residual_csv_non_finite(tmpdir):
    rows = [{"nu": 0.1 + 0.2j, "mu": 1.0, "residual": math.inf, "truncation": 50, "tail": True}]
    path = write_residual_csv(str(tmpdir.join("residuals.csv")), rows)
    header, row = _read_rows(path)
    assert header == ["nu", "mu", "residual", "truncation", "tail"]
    assert row[2] == "inf"
    assert complex(row[0]) == 0.1 + 0.2j


def test_write_mesh_sections(tmpdir):
    mesh = build_domain(DomainSpec(), MeshSpec(rows=4, inner_columns=2, outer_columns=4)).mesh
    path = write_mesh(mesh, str(tmpdir.join("mesh.txt")))
    lines = FileUtility.read_file(path).splitlines()
    nodes_at, triangles_at = lines.index("nodes"), lines.index("triangles")
    assert triangles_at - nodes_at - 1 == mesh.nodes.shape[0]
    assert len(lines) - triangles_at - 1 == mesh.triangles.shape[0]
    assert lines[1] == f"# nodes {mesh.nodes.shape[0]} triangles {mesh.triangles.shape[0]}"


def test_write_trajectory_csv(tmpdir):
    omega = np.linspace(0.0, 1.0, 3)
    states = [
        SimpleNamespace(t=0.0, omega=omega, s_values=np.zeros(3), s_t=None),
        SimpleNamespace(t=0.1, omega=omega, s_values=np.full(3, 0.01), s_t=np.full(3, 0.1)),
    ]
    trajectory = SimpleNamespace(states=states, diagnostics=[SimpleNamespace(branch_residual=1e-3)])
    rows = _read_rows(write_trajectory_csv(str(tmpdir.join("trajectory.csv")), trajectory))
    assert rows[0] == ["t", "omega", "s", "s_t", "branch_residual"]
    assert len(rows) == 7
    assert rows[1][3] == "nan" and rows[1][4] == "nan"
    assert float(rows[4][4]) == pytest.approx(1e-3)


def test_generate_manifest_content():
    content = ManifestUtility.generate_manifest_content(
        "weights", {"seed": 0}, [{"name": "geometry", "passed": True}], {"s": 0.5}, ["/tmp/x/b.json", "/tmp/x/a.csv"]
    )
    entry = content["weights"]
    assert entry["files"] == ["a.csv", "b.json"]
    assert entry["summary"] == {"s": 0.5}
    assert "version" in entry


def test_save_manifest_content_merges(tmpdir):
    out = str(tmpdir)
    ManifestUtility.save_manifest_content(out, {"spectrum": {"summary": {}}})
    path = ManifestUtility.save_manifest_content(out, {"weights": {"summary": {"s": math.nan}}})
    manifest = FileUtility.read_json(path)
    assert set(manifest) == {"spectrum", "weights"}
    assert manifest["weights"]["summary"]["s"] == "nan"


def test_save_manifest_content_empty_file(tmpdir, caplog):
    tmpdir.join("manifest.json").write("")
    ManifestUtility.save_manifest_content(str(tmpdir), {"report": {}})
    assert "is empty" in caplog.text
    assert FileUtility.read_json(str(tmpdir.join("manifest.json"))) == {"report": {}}


def test_aggregate_report_is_idempotent(tmpdir):
    out = str(tmpdir)
    FileUtility.write_json(str(tmpdir.join("weights.json")), {"s": 0.5})
    FileUtility.write_json(str(tmpdir.join("spectrum.json")), {"A0": {"q2": 1.0}})
    tmpdir.join("zeros.csv").write("kind\n")
    path = aggregate_report(out)
    first = FileUtility.read_file(path)
    assert orjson.loads(first) == {"spectrum": {"A0": {"q2": 1.0}}, "weights": {"s": 0.5}}
    aggregate_report(out)
    assert FileUtility.read_file(path) == first


def test_aggregate_report_missing_directory():
    with pytest.raises(MuskatError, match="not found"):
        aggregate_report("no_such_output_directory")
