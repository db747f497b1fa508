"""The twelve acceptance criteria at the desk profile (N = 128 in 1D, N = 48 in 2D).

Each test prints one PASS/FAIL line per check, whatever the capture mode.
"""

import pytest

from agpwaves.verify import CRITERIA, DESK, run_criterion


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    checks, seconds = run_criterion(k, DESK)
    with capsys.disabled():
        print()
        for c in checks:
            print(c.line())
    failed = [c.line() for c in checks if not c.passed]
    assert checks and not failed, failed
