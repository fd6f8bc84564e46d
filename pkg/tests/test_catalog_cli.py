import csv
import io
import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from varigeom import cli
from varigeom.catalog import CatalogError, catalog_build, catalog_entry, catalog_list, load_catalog

SMALL = ["run", "--surfaces", "flat_disk", "unit_sphere", "--theorems", "li_yau", "isoperimetric",
         "--resolutions", "8", "12"]

BAD_CATALOG = """
version: 1
surfaces:
  - name: big_pinch
    kind: round_sphere
    parameters: {R: 1.0}
    b: 0.0
    base_point: {param: [0.0, 0.0]}
    theorems: [diameter_pinching, isoperimetric]
    options:
      diameter_pinching: {b: 1.0}
      isoperimetric: {b: 1.0}
    known: {}
"""


def _main(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_catalog_examples():
    V = catalog_build("unit_sphere", 64)
    assert abs(V.atoms.weights.sum() - 4 * math.pi) < 1e-10
    D = catalog_build("flat_disk", 32)
    assert abs(D.boundary.weights.sum() - 2 * math.pi) < 1e-10
    with pytest.raises(CatalogError) as exc:
        catalog_build("no_such_surface", 16)
    for name in ("unit_sphere", "flat_disk", "clifford_torus"):
        assert name in str(exc.value)


def test_catalog_known_values_carry_provenance():
    for e in catalog_list():
        assert e.known, e.name
        for kv in e.known.values():
            assert isinstance(kv.provenance, str) and kv.provenance.strip()


@pytest.mark.parametrize("kind,params,b", [
    ("round_sphere", {"R": -1.0}, 0.0),
    ("torus_of_revolution", {"R": 1.0, "r": 2.0}, 0.0),
    ("clifford_torus", {"R": 1.0}, 0.0),
    ("geodesic_sphere", {"rho": 4.0}, 1.0),
    ("warped_blob", {"R": 1.0}, 0.0),
])
def test_invalid_catalog_parameters(tmp_path, kind, params, b):
    text = f"version: 1\nsurfaces:\n  - name: x\n    kind: {kind}\n    parameters: {json.dumps(params)}\n" \
           f"    b: {b}\n    base_point: {{origin: true}}\n    theorems: [li_yau]\n    known: {{}}\n"
    f = tmp_path / "c.yaml"
    f.write_text(text)
    with pytest.raises(CatalogError):
        load_catalog(f)


def test_build_is_bit_identical():
    a, b = catalog_build("torus_of_revolution", 16), catalog_build("torus_of_revolution", 16)
    assert a.to_csv() == b.to_csv()
    assert catalog_entry("unit_sphere").kind == "round_sphere"


@pytest.fixture(scope="module")
def small_bundle():
    spec = cli.RunSpec(["flat_disk", "unit_sphere"], ["li_yau", "isoperimetric"], (8, 12))
    return cli.run(spec)


def test_run_is_deterministic_and_schema_valid(small_bundle, monkeypatch):
    again = cli.run(cli.RunSpec(["flat_disk", "unit_sphere"], ["li_yau", "isoperimetric"], (8, 12)))
    assert cli.to_json(again) == cli.to_json(small_bundle)
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    threaded = cli.run(cli.RunSpec(["flat_disk", "unit_sphere"], ["li_yau", "isoperimetric"], (8, 12),
                                   threads=cli._threads()))
    assert cli.to_json(threaded) == cli.to_json(small_bundle)
    doc = json.loads(cli.to_json(small_bundle))
    jsonschema.validate(doc, cli.load_schema())


def test_output_ordering_and_csv_rows(small_bundle):
    keys = [(r["surface"], r["theorem"], r["resolution"]) for r in small_bundle["reports"]]
    assert keys == [(s, t, n) for s in ("flat_disk", "unit_sphere")
                    for t in ("li_yau", "isoperimetric") for n in (8, 12)]
    rows = list(csv.DictReader(io.StringIO(cli.to_csv(small_bundle))))
    assert len(rows) == 2 * 2 * 2
    assert set(cli.CSV_FIELDS) <= set(rows[0])


def test_table_format(small_bundle):
    text = cli.to_table(small_bundle)
    head = text.splitlines()[0]
    assert "margin" in head and "tol" in head
    body = [ln for ln in text.splitlines()[1:] if "li_yau" in ln]
    assert body and all("e" in ln.split()[4] for ln in body)


def test_floats_round_trip_through_json(small_bundle):
    doc = json.loads(cli.to_json(small_bundle))
    for rec, orig in zip(doc["reports"], small_bundle["reports"]):
        assert rec["margin"] == orig["margin"]


def test_margins_stabilise_on_the_ladder(small_bundle):
    for rec in small_bundle["reports"]:
        if rec["resolution"] == 12:
            assert "margin_drift" in rec["diagnostics"]


def test_cli_run_writes_files_and_report_reads_them(tmp_path, capsys):
    out = tmp_path / "out"
    code, _, _ = _main(SMALL + ["--out", str(out), "--format", "csv"], capsys)
    assert code == 0
    assert (out / cli.BUNDLE_FILE).exists() and (out / "reports.csv").exists()
    code, text, _ = _main(["report", "--in", str(out), "--format", "table"], capsys)
    assert code == 0 and "holds" in text
    code, text, _ = _main(["report", "--in", str(out), "--format", "json"], capsys)
    jsonschema.validate(json.loads(text), cli.load_schema())


def test_catalog_list_command(capsys):
    code, text, _ = _main(["catalog", "list"], capsys)
    assert code == 0 and "unit_sphere" in text and "clifford_torus" in text
    code, text, _ = _main(["catalog", "list", "--format", "json"], capsys)
    assert {e["name"] for e in json.loads(text)} == {e.name for e in catalog_list()}


def test_exit_code_for_hypothesis_failed_fixture(tmp_path, capsys):
    f = tmp_path / "c.yaml"
    f.write_text(BAD_CATALOG)
    code, text, _ = _main(["--catalog", str(f), "run", "--resolutions", "8", "--format", "json"], capsys)
    assert code == 0
    verdicts = {r["verdict"] for r in json.loads(text)["reports"]}
    assert verdicts == {"hypothesis-failed"}


def test_exit_code_for_violation(tmp_path, small_bundle, capsys):
    bad = json.loads(cli.to_json(small_bundle))
    bad["reports"][0]["verdict"] = "violated-within-tolerance"
    bad["reports"][0]["margin"] = -1.0
    assert cli.exit_status(bad) == 1
    d = tmp_path / "viol"
    d.mkdir()
    (d / cli.BUNDLE_FILE).write_text(json.dumps(bad))
    code, _, _ = _main(["report", "--in", str(d)], capsys)
    assert code == 1


@pytest.mark.parametrize("argv", [
    ["run", "--resolutions", "16", "16"],
    ["run", "--resolutions", "32", "16"],
    ["run", "--surfaces", "nope"],
    ["run", "--theorems", "fermat"],
    ["run", "--format", "xml"],
    ["report", "--in", "/nonexistent/dir"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = _main(argv, capsys)
    assert code == 2
    assert err


def test_unknown_surface_error_lists_names(capsys):
    _, _, err = _main(["run", "--surfaces", "nope"], capsys)
    assert "unit_sphere" in err


def test_unwritable_output_is_an_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, _ = _main(SMALL[:5] + ["--resolutions", "8", "--out", str(blocker / "sub")], capsys)
    assert code == 2


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "varigeom.cli", "catalog", "list"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0 and "flat_disk" in proc.stdout
