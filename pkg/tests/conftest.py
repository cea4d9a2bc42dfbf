import os
import re
from pathlib import Path

import pytest


def _danish_path():
    value = os.environ.get("DANISH_CSV")
    return Path(value) if value else None


def pytest_collection_modifyitems(config, items):
    path = _danish_path()
    if path is not None and path.is_file():
        return
    reason = "set DANISH_CSV to the Danish fire-loss CSV to run this check"
    for item in items:
        if "requires_danish_csv" in item.keywords:
            item.add_marker(pytest.mark.skip(reason=reason))


@pytest.fixture(scope="session")
def danish_csv():
    return _danish_path()


def pytest_terminal_summary(terminalreporter):
    lines = {}
    for key in ("passed", "failed", "skipped", "error"):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            m = re.search(r"test_criterion_(\d+)", nodeid)
            if not m:
                continue
            number = int(m.group(1))
            recorded = [v for n, v in getattr(rep, "user_properties", []) if n == "acceptance"]
            if recorded:
                lines[number] = recorded[-1]
            elif key == "skipped":
                reason = rep.longrepr[-1] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
                lines.setdefault(number, f"CRITERION {number}: SKIP ({reason.removeprefix('Skipped: ')})")
            elif key in ("failed", "error"):
                lines.setdefault(number, f"CRITERION {number}: FAIL (raised before reporting)")
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
