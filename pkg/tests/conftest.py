import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines after the run.

    Per-test output is captured by default, so the one-line verdicts
    recorded by the acceptance tests are replayed here where they stay
    visible in any invocation.
    """
    for name, mod in sys.modules.items():
        if name.rsplit(".", 1)[-1] != "test_acceptance":
            continue
        lines = getattr(mod, "VERDICT_LINES", None)
        if lines:
            terminalreporter.section("acceptance criteria")
            for line in lines:
                terminalreporter.write_line(line)
        break
