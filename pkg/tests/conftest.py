import pytest
from hypothesis import settings

# compiled kernels make the first example of a test slow
settings.register_profile("default", deadline=None)
settings.load_profile("default")

CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[CRITERIA] = []


@pytest.fixture
def criterion(request):
    """Call ``criterion(name, ok, detail)`` to log one acceptance line."""
    lines = request.config.stash[CRITERIA]

    def log(name: str, ok: bool, detail: str) -> bool:
        lines.append(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
