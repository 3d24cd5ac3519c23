"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_RESULTS = {}
_NOTES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion")


@pytest.fixture
def note(request):
    """Attach a short measurement summary to the current criterion's line."""
    def add(text):
        _NOTES.setdefault(request.node.nodeid, []).append(str(text))
    return add


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _RESULTS[report.nodeid] = report.outcome


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args))


def pytest_terminal_summary(terminalreporter):
    lines = []
    stats = terminalreporter.stats
    seen = {}
    for key in ("passed", "failed", "error"):
        for rep in stats.get(key, []):
            for name, value in getattr(rep, "user_properties", []):
                if name == "criterion":
                    seen[rep.nodeid] = value
    for nodeid, (cid, title) in sorted(seen.items(), key=lambda kv: _order(kv[1][0])):
        outcome = _RESULTS.get(nodeid, "error")
        status = "PASS" if outcome == "passed" else "FAIL"
        detail = "; ".join(_NOTES.get(nodeid, []))
        lines.append(f"criterion {cid:<3} {status}  {title}" + (f"  [{detail}]" if detail else ""))
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in lines:
            terminalreporter.write_line(ln)


def _order(cid):
    head = "".join(ch for ch in str(cid) if ch.isdigit())
    return (int(head or 0), str(cid))
