"""Acceptance criteria 1-14, one test each.

Every result line is printed as it is produced and repeated in the
terminal summary, so `pytest -v` shows a PASS/FAIL line per criterion.
"""

import pytest

from ogp_modlab import verification as V

RESULTS = []

FAST = {1, 2, 3, 4, 5, 6, 7, 14}
CHECKS = sorted(V.ALL, key=lambda fn: fn.number)


@pytest.mark.parametrize(
    "check",
    [pytest.param(fn, id=f"criterion_{fn.number:02d}",
                  marks=() if fn.number in FAST else pytest.mark.slow) for fn in CHECKS])
def test_criterion(check):
    result = check()
    RESULTS.append(result)
    print(result.line())
    assert result.passed, result.line()
