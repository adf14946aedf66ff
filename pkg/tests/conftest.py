from pathlib import Path

import pytest

from geopol.policy import parse_policy_doc
from geopol.shapefile import FieldMapping, load_dataset
from geopol.store import build_store

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
ETL_AT = "2020-06-01T12:00:00Z"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


def read_fixture(name):
    return (FIXTURES / name).read_bytes()


@pytest.fixture(scope="session")
def states_raw():
    return load_dataset(read_fixture("states_mini.shp"), read_fixture("states_mini.dbf"),
                        FieldMapping("GEOID", "NAME"), source="states_mini.shp")


@pytest.fixture(scope="session")
def sites_raw():
    return load_dataset(read_fixture("sites_mini.shp"), read_fixture("sites_mini.dbf"),
                        FieldMapping("AREAID", "FULLNAME"), source="sites_mini.shp")


@pytest.fixture(scope="session")
def fixture_store(states_raw, sites_raw):
    return build_store([(states_raw, "ex:states/", "states"), (sites_raw, "ex:sites/", "sites")],
                       ETL_AT)


@pytest.fixture(scope="session")
def fixture_policy():
    return parse_policy_doc((FIXTURES / "policy.txt").read_text())


# -- acceptance reporting ----------------------------------------------------

_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        verdict = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _ACCEPTANCE.append((marker.args[0], verdict))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _ACCEPTANCE:
        terminalreporter.write_line("%s  %s" % (verdict, name))
