import hypothesis
import pytest

hypothesis.settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=100)
hypothesis.settings.load_profile("repo")

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance():
    """Recorder for one-line acceptance verdicts, echoed after the run."""

    def record(criterion: int, ok: bool, detail: str) -> None:
        verdict = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append(f"criterion {criterion:2d} {verdict}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
