import pytest

_RESULTS = {}


@pytest.fixture
def criterion_report():
    """Call ``criterion_report(number, ok, detail)`` to register a result line."""

    def report(number, ok, detail):
        _RESULTS[number] = (bool(ok), detail)
        print(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")

    return report


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS, key=lambda k: (len(str(k)), str(k))):
        ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
