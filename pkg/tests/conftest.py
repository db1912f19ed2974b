def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        cr = RESULTS[number]
        terminalreporter.write_line(f"{cr.line()}  [{cr.seconds:.1f}s]")
