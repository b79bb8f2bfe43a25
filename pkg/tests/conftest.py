import numpy as np
import pytest

from edusort import fixtures
from edusort.ingest import IncomeModel, SynthSpec, generate_synthetic
from edusort.tables import ContingencyTable

EDU_SHARES = np.array([0.3, 0.3, 0.25, 0.15])


def mixed_table(alpha, shares=EDU_SHARES):
    """Blend of the independence table and a purely diagonal one."""
    cells = (1 - alpha) * np.outer(shares, shares) + alpha * np.diag(shares)
    return ContingencyTable.from_array(cells, labels=("LP", "P", "S", "U"), normalize=True)


def synth(table, n=20_000, seed=1, **kw):
    model = IncomeModel.education_premium(len(table.schema))
    return generate_synthetic(SynthSpec(table, model, n, seed=seed, **kw))


@pytest.fixture(scope="session")
def brazil():
    return fixtures.panels("brazil")


@pytest.fixture(scope="session")
def all_panels():
    return {c: fixtures.panels(c) for c in fixtures.COUNTRIES}


# acceptance reporting: one PASS/FAIL line per criterion at the end of the run

_CRITERIA = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "failed": [], "count": 0})
    entry["count"] += 1
    if call.excinfo is not None:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "FAIL" if entry["failed"] else "PASS"
        line = f"{status} criterion {number}: {entry['title']} ({entry['count'] - len(entry['failed'])}/{entry['count']} checks)"
        if entry["failed"]:
            line += " failing: " + ", ".join(entry["failed"])
        terminalreporter.write_line(line)
