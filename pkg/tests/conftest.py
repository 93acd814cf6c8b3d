import math

import numpy as np
import pytest

from fdstab.cli import builtin_lf_scheme
from fdstab.scheme import Scheme, fit_dissipation, lax_friedrichs, lax_wendroff
from fdstab.spectral import find_roots

SQRT5 = math.sqrt(5.0)
KAPPA_S_M1 = -5 + 2 * SQRT5
B_SURFACE = -1 - 2 * SQRT5 / 5


def composite_scheme(b=(0.0, 0.0)) -> Scheme:
    """LF(1/2, 3/4) followed by upwind(1/2): r = 2, p = 1, lambda_a = 1."""
    lf = np.array([5 / 8, 1 / 4, 1 / 8])  # l = -1..1
    up = np.array([0.5, 0.5])  # l = -1..0
    a = np.convolve(lf, up)  # l = -2..1
    return Scheme(2, 1, a, 1.0, 1, np.array(b, dtype=float).reshape(2, 1), "lf-upwind")


@pytest.fixture(scope="session")
def lf():
    return builtin_lf_scheme()


@pytest.fixture(scope="session")
def lf_dirichlet():
    return lax_friedrichs(0.5, 0.75, 0.0)


@pytest.fixture(scope="session")
def lw():
    return lax_wendroff(0.5, 0.0)


@pytest.fixture(scope="session")
def composite():
    return composite_scheme((0.0, 0.0))


@pytest.fixture(scope="session")
def lf_fit(lf):
    return fit_dissipation(lf)


@pytest.fixture(scope="session")
def lf_roots(lf):
    return find_roots(lf)


@pytest.fixture(scope="session")
def lf_root(lf_roots):
    assert len(lf_roots) == 1
    return lf_roots[0]


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES = []


def record_acceptance(label, passed, detail, elapsed):
    """``label`` is the criterion number, optionally with a part letter ("9a")."""
    label = str(label)
    digits = "".join(ch for ch in label if ch.isdigit())
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(((int(digits), label), f"criterion {label:>3}: {status}  ({elapsed:.2f} s)  {detail}"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
