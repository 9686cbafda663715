import numpy as np
import pytest

from spectral_clt import sbm_to_latent

B_SBM = np.array([[0.42, 0.42], [0.42, 0.5]])
PI_SBM = np.array([0.6, 0.4])

# limiting covariances at the two atoms, to two decimals
SIGMA1_TABLE = np.array([[0.59, 0.55], [0.55, 13.07]])
SIGMA2_TABLE = np.array([[0.60, 0.59], [0.59, 13.26]])


@pytest.fixture(scope="session")
def sbm():
    return sbm_to_latent(B_SBM, PI_SBM)


def random_orthogonal(d, rng):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


_VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line, then assert it."""

    def check(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
