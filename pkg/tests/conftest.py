import pytest

from ldve.linkage import build_diff_network, build_same_network, load_config

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (report.when == "call" or report.failed):
        return
    number, title = marker.args
    status = "FAIL" if report.failed else "PASS"
    _ACCEPTANCE[number] = (title, status, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, duration = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title} ({duration:.2f} s)")


@pytest.fixture(scope="session")
def cfg():
    """The shipped default linkage configuration."""
    return load_config()


@pytest.fixture(scope="session")
def same_net(cfg):
    return build_same_network(cfg)


@pytest.fixture(scope="session")
def diff_net(cfg):
    return build_diff_network(cfg)


@pytest.fixture(scope="session")
def fig2(same_net):
    """The three-case CPD tree of Fname_x given Afname, Sex and EFx."""
    return same_net.cpd("Fname_x").factor
