import numpy as np
import pytest

from qeraser.hilbert import Ket, Register


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_ket(rng, *registers: Register) -> Ket:
    n = int(np.prod([r.dim for r in registers]))
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return Ket(registers, z / np.linalg.norm(z))


def reg(name: str, dim: int) -> Register:
    return Register(name, tuple(f"{name}{k}" for k in range(dim)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
