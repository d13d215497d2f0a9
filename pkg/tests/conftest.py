import pytest

# lines collected by the acceptance suite, printed at the end of the run
ACCEPTANCE = []


def record(n, ok, detail):
    ACCEPTANCE.append((n, bool(ok), detail))
    return ok


@pytest.fixture(scope="session")
def anderson_curve():
    from lattice_resonances.random import AndersonEnsemble, lyapunov_curve
    ens = AndersonEnsemble(("uniform", -2.0, 2.0), 11)
    return ens, lyapunov_curve(ens)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
