import sys
from pathlib import Path

import numpy as np
import pytest

from nekhoroshev_lab.trig_hamiltonian import TrigPolyHamiltonian

DEMOS = Path(__file__).resolve().parent.parent / "demos"


def random_trig(rng, n=2, K=2, deg=2, nterms=4, integrable=False, modes=None):
    """Real trigonometric polynomial with random modes, degrees and coefficients."""
    H = TrigPolyHamiltonian.zero(n)
    for _ in range(nterms):
        if integrable:
            k = (0,) * n
        elif modes is not None:
            k = tuple(modes[rng.integers(len(modes))])
        else:
            k = tuple(int(x) for x in rng.integers(-K, K + 1, n))
        a = tuple(int(x) for x in rng.integers(0, deg + 1, n))
        c = complex(rng.normal(), rng.normal())
        if not any(k):
            c = c.real
        H = H + TrigPolyHamiltonian.exp_mode(k, c, alpha=a)
        if any(k):
            H = H + TrigPolyHamiltonian.exp_mode(tuple(-x for x in k), c.conjugate(), alpha=a)
    return H


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def saddle_pert():
    return TrigPolyHamiltonian.load(DEMOS / "saddle_pert.json")


@pytest.fixture
def saddle():
    return TrigPolyHamiltonian.load(DEMOS / "saddle.json")


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = sorted(getattr(mod, "REPORT_LINES", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
