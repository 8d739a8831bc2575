import numpy as np
import pytest

from headmotion.motion import PoseSequence


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_poses(rng, T, scale=0.5):
    return PoseSequence(rng.uniform(-scale, scale, size=(T, 3)))


_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _CRITERIA.append((props["criterion"], report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in _CRITERIA:
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{tag}  {name}" + (f"  ({detail})" if detail else ""))


@pytest.fixture
def criterion(request, record_property):
    """Tags a test as an acceptance criterion; returns a callable for attaching measured values."""
    marker = request.node.get_closest_marker("criterion")
    record_property("criterion", marker.args[0] if marker else request.node.name)
    details = []

    def note(text):
        details.append(text)
        # user_properties is a list of pairs; keep one detail entry, updated in place
        props = request.node.user_properties
        props[:] = [p for p in props if p[0] != "detail"] + [("detail", "; ".join(details))]
        print(text)

    return note
