import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, derandomize=True, max_examples=20,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


_PROPERTY_OUTCOMES = []


def pytest_runtest_logreport(report):
    if "test_properties.py" in report.nodeid and (report.when == "call" or report.failed):
        ok = report.passed or (report.skipped and hasattr(report, "wasxfail"))
        _PROPERTY_OUTCOMES.append(ok)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", [])
    if not results and not _PROPERTY_OUTCOMES:
        return
    from persistlab.harness.suites import format_line

    terminalreporter.section("acceptance criteria")
    for res in results:
        terminalreporter.write_line(format_line(res))
    if _PROPERTY_OUTCOMES:
        n_ok = sum(_PROPERTY_OUTCOMES)
        status = "PASS" if n_ok == len(_PROPERTY_OUTCOMES) else "FAIL"
        terminalreporter.write_line(
            f"properties {status} {n_ok}/{len(_PROPERTY_OUTCOMES)} property tests as expected")
