"""Collects acceptance outcomes and prints one line per criterion."""

from collections import defaultdict

_OUTCOMES: dict[int, list[bool]] = defaultdict(list)
_DETAILS: dict[int, list[str]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = int(mark.args[0])
    if call.when == "call":
        _OUTCOMES[n].append(call.excinfo is None)
    elif call.when == "setup" and call.excinfo is not None:
        _OUTCOMES[n].append(False)


def record(n: int, text: str) -> None:
    """Attach a short measurement to the criterion summary line."""
    _DETAILS[n].append(text)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        status = "PASS" if all(_OUTCOMES[n]) else "FAIL"
        detail = "; ".join(_DETAILS[n])
        terminalreporter.write_line(f"CRITERION {n}: {status}" + (f"  ({detail})" if detail else ""))
