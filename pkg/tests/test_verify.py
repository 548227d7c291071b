from nestedavg import verify


def test_quick_suite_passes():
    results = verify.run_all(seed=7, scale=0.05)
    assert all(r.passed for r in results), verify.format_report(results)
    assert len(results) == 9


def test_fault_injection_fails_tail_check():
    results = verify.run_all(seed=7, scale=0.02, fault="flip_A")
    failed = [r.name for r in results if not r.passed]
    assert failed == ["tail-weight form equals dense evaluation"]


def test_report_is_reproducible():
    a = verify.format_report(verify.run_all(seed=3, scale=0.02))
    b = verify.format_report(verify.run_all(seed=3, scale=0.02))
    assert a == b
