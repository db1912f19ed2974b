"""One test per acceptance criterion; each prints its individual checks."""

import pytest

from flatstep.acceptance import CRITERIA, run_one

RESULTS = {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    cr = run_one(number)
    RESULTS[number] = cr
    for c in cr.checks:
        print(f"  {'ok  ' if c.passed else 'FAIL'} {c.name} = {c.value!r} (tol {c.tolerance})")
    if cr.notes:
        print(f"  note: {cr.notes}")
    failed = [c.name for c in cr.checks if not c.passed]
    assert cr.passed, f"criterion {number} failed checks: {failed}"
