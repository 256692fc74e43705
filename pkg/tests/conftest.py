import pytest

from fixdetect.core import FailureSignature, MethodId, Outcome, PatchIntervention, TestRunReport

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


SIG1 = FailureSignature("t1", MethodId("pkg.Foo.bar"), 11)
SIG2 = FailureSignature("t1", MethodId("pkg.Foo.bar"), 22)
PATCH = PatchIntervention("v0", "v1", frozenset({MethodId("pkg.Foo.bar")}))


def make_runs(version, n, n_fail, sig=SIG1, t=0, test_id=None, cluster=None):
    """``n`` runs of one test at timestamp ``t``; the first ``n_fail`` fail with ``sig``."""
    test_id = test_id or sig.test_id
    return [
        TestRunReport(t + i, version, test_id, Outcome.FAIL if i < n_fail else Outcome.PASS,
                      sig if i < n_fail else None, cluster)
        for i in range(n)
    ]


@pytest.fixture
def patch():
    return PATCH
