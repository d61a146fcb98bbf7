"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run standalone with ``python tests/test_acceptance.py`` for the summary alone.
"""

import sys

import pytest

from fioresidue.verification import CRITERIA, run_criterion

LINES = {}


@pytest.mark.parametrize("number", [num for num, _, _ in CRITERIA], ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number):
    result = run_criterion(number)
    LINES[number] = result.line()
    print(result.line())
    assert result.passed, result.line()


if __name__ == "__main__":
    failed = 0
    for num, _, _ in CRITERIA:
        r = run_criterion(num)
        print(r.line(), flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
