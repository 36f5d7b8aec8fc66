import pytest

from qsmooth import verify
from qsmooth.dynamics import ModelParams


def test_check_result_line():
    ok = verify.CheckResult("x", True, "fine")
    bad = verify.CheckResult("y", False, "broken", step=7)
    assert ok.line() == "[PASS] x: fine"
    assert bad.line() == "[FAIL] y (step 7): broken"


def test_algebra_and_dynamics_checks_pass():
    for c in verify.algebra_checks(seed=1, n=50) + verify.dynamics_checks(ModelParams(), seed=1, n=20):
        assert c.passed, c.line()


def test_enumeration_checks_pass():
    for c in verify.enumeration_check(seed=2):
        assert c.passed, c.line()


def test_sme_order_check_passes():
    c = verify.sme_order_check(ModelParams(), seed=0, n=5)
    assert c.passed, c.line()


@pytest.mark.parametrize("n", [1, 3])
def test_all_records(n):
    recs = verify.all_records(n)
    assert len(recs) == 2**n
    assert len({tuple(r.dN) for r in recs}) == 2**n
