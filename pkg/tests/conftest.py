import pytest

_CRITERIA: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion."""

    def record(key: str, ok: bool, detail: str) -> bool:
        _CRITERIA.setdefault(key, []).append((bool(ok), detail))
        print(f"[acceptance {key}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=int):
        parts = _CRITERIA[key]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'} | " + " ; ".join(d for _, d in parts))
