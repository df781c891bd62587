import itertools

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def brute_amplitudes(n, r, tau, periodic=False):
    """Direct 2^N double loop over spin tuples, independent of the package."""
    cp = cm = 0j
    for s in itertools.product((1, -1), repeat=n):
        h = 0
        for k in range(n):
            for l in range(k + 1, n):
                d = l - k
                if periodic:
                    d = min(d, n - d)
                if d <= r:
                    h += s[k] * s[l]
        phase = np.exp(-1j * tau * h)
        cp += phase
        cm += phase * np.prod(s)
    return cp / 2**n, cm / 2**n


@pytest.fixture
def brute():
    return brute_amplitudes


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
