import pytest

ACCEPTANCE = pytest.StashKey[dict]()
CRITERIA = {
    1: "geometry constructions over randomized sequences",
    2: "correction instance: (5/2)sqrt(d) < Q <= 3 sqrt(d)",
    3: "dominant-mass inequality",
    4: "observed ratio within [0, 1] on every stock record",
    5: "solver validation on the Dirichlet box",
    6: "exponent fit and held-out validation",
    7: "projector lower bound vs dense oracle",
    8: "projector chain term by term",
    9: "Weyl iterates and half bound",
    10: "byte-identical reports on rerun",
}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion for the terminal summary."""
    log = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(n, ok, detail=""):
        log[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE, None)
    if log is None:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n in log:
            ok, detail = log[n]
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}: {detail}")
        else:
            terminalreporter.write_line(f"[----] {n:>2}. {title}: not run")
