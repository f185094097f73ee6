import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    label = getattr(item.function, "_criterion", None)
    if label:
        status = "PASS" if report.passed else "FAIL"
        capman = item.config.pluginmanager.getplugin("capturemanager")
        if capman:
            with capman.global_and_fixture_disabled():
                print(f"\n[{status}] {label}")
        else:
            print(f"\n[{status}] {label}")
