import numpy as np
import pytest

from rdsplit.spectral import make_grid


@pytest.fixture(autouse=True, scope="session")
def _reference_cache(tmp_path_factory):
    # keep reference solutions out of the user's cache
    mp = pytest.MonkeyPatch()
    mp.setenv("RDSPLIT_CACHE", str(tmp_path_factory.mktemp("refcache")))
    yield
    mp.undo()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid1024():
    return make_grid(1024, -np.pi, np.pi)


@pytest.fixture
def grid128():
    return make_grid(128, -np.pi, np.pi)


# one summary line per acceptance criterion
_CRITERIA = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _CRITERIA.setdefault(mark.args[0], {"title": mark.kwargs.get("title", ""), "items": {}})
            _CRITERIA[mark.args[0]]["items"][item.nodeid] = None


def pytest_runtest_logreport(report):
    for entry in _CRITERIA.values():
        if report.nodeid in entry["items"]:
            detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
            if report.when == "call" or report.failed or report.skipped:
                entry["items"][report.nodeid] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        entry = _CRITERIA[n]
        results = [r for r in entry["items"].values() if r is not None]
        ran = len(results)
        if not ran:
            tr.write_line(f"criterion {n} NOT RUN: {entry['title']}")
            continue
        status = "PASS" if ran == len(entry["items"]) and all(r[0] == "passed" for r in results) else "FAIL"
        tr.write_line(f"criterion {n} {status}: {entry['title']} "
                      f"({sum(r[0] == 'passed' for r in results)}/{len(entry['items'])} checks passed)")
        for outcome, detail in results:
            if detail:
                tr.write_line(f"    [{outcome}] {detail}")
