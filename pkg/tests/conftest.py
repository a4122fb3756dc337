from hypothesis import HealthCheck, settings

settings.register_profile("pkg", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
