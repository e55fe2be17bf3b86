import numpy as np
import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record a criterion verdict; the lines are printed in the terminal summary."""
    lines = request.config._acceptance_lines

    def record(number, ok, detail):
        lines.append((number, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(getattr(config, "_acceptance_lines", []))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in lines:
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ar_features(rng, m=6, n=300, rho=0.8):
    """Feature matrix of a stable vector AR(1) process (rows are features)."""
    A = rho * np.linalg.qr(rng.standard_normal((m, m)))[0]
    Z = np.empty((m, n))
    z = rng.standard_normal(m)
    for k in range(n):
        z = A @ z + 0.5 * rng.standard_normal(m)
        Z[:, k] = z
    return Z
