import math

import numpy as np
import pytest
from hypothesis import strategies as st

from qmachine.bloch import BlochVector


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unit(rng) -> BlochVector:
    x = rng.normal(size=3)
    return BlochVector.from_array(x / np.linalg.norm(x))


angles_theta = st.floats(min_value=0.0, max_value=math.pi, allow_nan=False)
angles_phi = st.floats(min_value=0.0, max_value=2 * math.pi, allow_nan=False, exclude_max=True)


@st.composite
def unit_vectors(draw):
    theta = draw(angles_theta)
    phi = draw(angles_phi)
    return BlochVector.from_angles(theta, phi)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one (criterion, passed, detail) line for the terminal summary."""
    results = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, passed, detail=""):
        results.append((number, title, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(results):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] C{number:02d} {title}: {detail}")
