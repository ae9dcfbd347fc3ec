def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines, which pytest captures by default."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call" or "test_acceptance" not in rep.nodeid:
                continue
            lines += [ln for ln in rep.capstdout.splitlines()
                      if ln.startswith(("PASS criterion", "FAIL criterion"))]
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(ln)
