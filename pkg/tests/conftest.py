import itertools

import numpy as np
import pytest


def naive_energy(terms, spins):
    """Independent evaluator: -sum j * product over (qubits, j) pairs, 0-based."""
    total = 0.0
    for qubits, j in terms:
        prod = 1
        for q in qubits:
            prod *= spins[q]
        total -= j * prod
    return total


def all_spin_rows(m):
    """Every +-1 vector of length m, qubit 0 most significant, +1 first."""
    return np.array(list(itertools.product((1, -1), repeat=m)), dtype=np.int8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""
    def record(ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {request.node.name}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
