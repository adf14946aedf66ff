import io
import json
import os
import shutil
import subprocess
import sys

import pytest

from geopol.cli import main

from conftest import FIXTURES


@pytest.fixture
def work(tmp_path, monkeypatch):
    for p in FIXTURES.iterdir():
        shutil.copy(p, tmp_path / p.name)
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("GEOPOL_CONFIG", raising=False)
    return tmp_path


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def etl(work):
    code, out, err = run("etl", "--config", "fixture.cfg")
    assert code == 0, err
    return out


def test_etl_reports_and_writes_store(work):
    out = etl(work)
    assert out.splitlines() == ["states: 3 features, 0 skipped", "sites: 2 features, 0 skipped",
                                "wrote 5 features to store.nt"]
    assert (work / "store.nt").read_text().count("geosparql#Feature>") == 5


def test_etl_twice_is_byte_identical(work):
    etl(work)
    first = (work / "store.nt").read_bytes()
    etl(work)
    assert (work / "store.nt").read_bytes() == first


def test_etl_at_flag_overrides_config(work):
    code, _, _ = run("etl", "--config", "fixture.cfg", "--at", "2001-02-03T04:05:06Z",
                     "--out", "other.nt")
    assert code == 0
    assert '"2001-02-03T04:05:06Z"' in (work / "other.nt").read_text()


def test_evaluate_end_to_end(work):
    etl(work)
    code, out, err = run("evaluate", "--config", "fixture.cfg", "--request", "fairbanks.req")
    assert code == 0, err
    doc = json.loads(out)
    assert doc["memberships"] == ["CountryLocation", "US91Loc"]
    assert doc["provision_results"][0]["applicable"] is True
    assert doc["provision_results"][0]["effect"] == "Permit"


def test_multiple_requests_keep_input_order(work):
    etl(work)
    code, out, _ = run("explain", "--config", "fixture.cfg", "--request", "arizona.req",
                       "--request", "fairbanks.req")
    assert code == 0
    heads = [l for l in out.splitlines() if l.startswith("Decision for request")]
    assert heads == ["Decision for request r2", "Decision for request r1"]


def test_query_no_relations(work):
    etl(work)
    code, out, _ = run("query", "--config", "fixture.cfg", "--point", "POINT(50 50)")
    assert (code, out) == (0, "no relations\n")


def test_query_within_and_distance(work):
    etl(work)
    code, out, _ = run("query", "--config", "fixture.cfg", "--point", "POINT(0.5 0.5)",
                       "--distance-to", "ex:sites/CAMPPARKS")
    assert code == 0
    assert out.splitlines() == ["within ex:sites/FAIRBANKS", "within ex:states/A1",
                                "distance ex:sites/CAMPPARKS 211.262315 km"]


def test_validate_ok(work):
    etl(work)
    code, out, _ = run("validate", "--config", "fixture.cfg")
    assert (code, out) == (0, "ok: 2 classes, 1 provisions, 0 warnings\n")


def test_validate_dangling_class(work):
    (work / "bad.txt").write_text("class X = ref Nope\n")
    code, out, _ = run("validate", "--policy", "bad.txt")
    assert code == 1
    assert "DanglingClassRef" in out


def test_usage_errors_exit_1_with_help(work):
    code, _, err = run("evaluate")
    assert code == 1
    assert "usage: geopol evaluate" in err
    assert run("frobnicate")[0] == 1
    assert run()[0] == 1


def test_input_errors_exit_1(work):
    code, _, err = run("query", "--store", "missing.nt", "--point", "POINT(0 0)")
    assert code == 1 and "cannot read store" in err
    etl(work)
    code, _, err = run("query", "--config", "fixture.cfg", "--point", "POLYGON((0 0,0 1,1 1,1 0,0 0))")
    assert code == 1


def test_failed_etl_leaves_no_partial_file(work):
    (work / "states_mini.shp").write_bytes((work / "states_mini.shp").read_bytes()[:300])
    code, _, err = run("etl", "--config", "fixture.cfg")
    assert code == 1 and "Truncated" in err
    assert not (work / "store.nt").exists()
    assert [p.name for p in work.iterdir() if p.name.endswith(".tmp")] == []


def test_failed_etl_keeps_previous_store(work):
    etl(work)
    before = (work / "store.nt").read_bytes()
    (work / "sites_mini.dbf").write_bytes(b"\x05" + (work / "sites_mini.dbf").read_bytes()[1:])
    assert run("etl", "--config", "fixture.cfg")[0] == 1
    assert (work / "store.nt").read_bytes() == before


def test_config_from_environment(work, monkeypatch):
    etl(work)
    monkeypatch.setenv("GEOPOL_CONFIG", str(work / "fixture.cfg"))
    monkeypatch.chdir(work.parent)
    code, out, _ = run("validate")
    assert code == 0 and out.startswith("ok:")


def test_default_config_in_working_directory(work):
    shutil.copy(work / "fixture.cfg", work / "geopol.cfg")
    etl(work)
    assert run("validate")[0] == 0


def test_bad_config_exit_1(work):
    (work / "broken.cfg").write_text("dataset.x.shp = a.shp\nnonsense\n")
    code, _, err = run("etl", "--config", "broken.cfg")
    assert code == 1 and "ConfigError" in err


def test_module_entry_point(work):
    etl(work)
    proc = subprocess.run([sys.executable, "-m", "geopol", "query", "--config", "fixture.cfg",
                           "--point", "POINT(50 50)"], capture_output=True, text=True,
                          env={**os.environ, "PYTHONPATH": os.pathsep.join(sys.path)})
    assert (proc.returncode, proc.stdout) == (0, "no relations\n")
