"""Acceptance criteria 1 to 12, each at its stated tolerance.

Every test prints one ``criterion NN PASS|FAIL ...`` line with the measured
values, then asserts the verdict.  The refinement runs are cached, so the
criteria share their solver runs within one session.
"""

import pytest

from aximhd.acceptance import CRITERIA

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.number == number
    assert result.passed, result.line()
