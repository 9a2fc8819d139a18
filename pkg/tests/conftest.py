import pytest

from d2dcost import reference_codes, reference_network

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running statistical test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            num, title = mark.args
            ACCEPTANCE.setdefault(num, {"title": title, "outcomes": {}})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    entry = ACCEPTANCE[mark.args[0]]
    if report.when == "call" or report.failed:
        if report.failed or entry["outcomes"].get(item.nodeid) != "failed":
            entry["outcomes"][item.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[num]
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        else:
            failed = sum(1 for o in outcomes.values() if o == "failed")
            status = "PASS" if failed == 0 else f"FAIL ({failed}/{len(outcomes)} checks)"
        terminalreporter.write_line(f"AC{num} {status:<22} {entry['title']}")


@pytest.fixture
def params():
    return reference_network()


@pytest.fixture
def codes():
    return reference_codes()
