import pytest

from causal_mb.graph import parse_text


@pytest.fixture
def fig1():
    return parse_text("""
        X <-> A
        A <-> B
        B <-> Y
        X -> Y
        treatment: X
        outcome: Y
    """)


@pytest.fixture
def fig2():
    return parse_text("""
        X <-> A
        A <-> B
        A -> D
        B <-> Y
        X <-> C
        C <-> D
        D <-> Y
        C -> B
        X -> Y
        treatment: X
        outcome: Y
    """)


@pytest.fixture
def fig_s1():
    return parse_text("X -> Y\nA -> X\nA -> B\nB <-> Y\ntreatment: X\noutcome: Y")


@pytest.fixture
def mbias_dag():
    return parse_text("""
        X -> Y
        A -> X
        A -> M
        B -> Y
        B -> M
        latent: A, B
        treatment: X
        outcome: Y
    """)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config._acceptance_lines

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
