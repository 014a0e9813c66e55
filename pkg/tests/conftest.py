import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def acceptance(request):
    """report(k, title, ok, detail): print one PASS/FAIL line and keep it for the summary."""
    lines = request.config.stash[_LINES_KEY]

    def report(k, title, ok, detail=""):
        line = f"[{k}] {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip()
        print(line, flush=True)
        lines.append((k, line))
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
