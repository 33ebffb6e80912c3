import math

import numpy as np
import pytest

from entdistill.iso import iso_state
from entdistill.qmat import HermOp
from entdistill.rains import rains_bound


def bell_mixture(p, v2=None) -> HermOp:
    """``p |v1><v1| + (1-p) |v2><v2|`` with ``v1`` the Bell vector; ``v2`` defaults to |01>+|10>."""
    v1 = np.array([1, 0, 0, 1]) / math.sqrt(2)
    if v2 is None:
        v2 = np.array([0, 1, 1, 0]) / math.sqrt(2)
    v2 = np.asarray(v2, dtype=float) / np.linalg.norm(v2)
    return HermOp(2, 2, p * np.outer(v1, v1) + (1 - p) * np.outer(v2, v2))


def schmidt_state(weights) -> HermOp:
    d = len(weights)
    v = np.zeros(d * d)
    for i, w in enumerate(weights):
        v[i * d + i] = math.sqrt(w)
    return HermOp(d, d, np.outer(v, v))


def h2(p):
    return 0.0 if p in (0, 1) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def iso_rains():
    """Rains run on the d=3, F=0.9 isotropic state, shared across modules."""
    return rains_bound(iso_state(3, 0.9))


# acceptance criteria record their outcome here; printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
