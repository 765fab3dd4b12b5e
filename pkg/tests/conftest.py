import re

import pytest

_ACCEPTANCE: dict[str, str] = {}


def _order(cid: str):
    m = re.match(r"(\d+)(\w*)", cid)
    return int(m.group(1)), m.group(2)


@pytest.fixture(scope="session")
def acceptance_log():
    """``record(criterion_id, ok, detail)``; lines are printed in the terminal summary."""

    def record(cid: str, ok: bool, detail: str) -> None:
        line = f"criterion {cid:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[cid] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=_order):
        terminalreporter.write_line(_ACCEPTANCE[cid])
