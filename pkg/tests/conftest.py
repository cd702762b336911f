import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")

EXAMPLE_START = [0.05, 0.55, 0.4]
EXAMPLE_END = [0.4, 0.5, 0.1]


def random_simplex(rng, n, floor=0.01):
    """Dirichlet(1) draw pushed away from the boundary by ``floor``."""
    w = rng.dirichlet(np.ones(n))
    w = floor + (1.0 - n * floor) * w
    return w / w.sum()


def random_between(rng, a, b):
    """A simplex point componentwise between ``a`` and ``b`` (strictly, for a != b)."""
    t = rng.uniform(0.05, 0.95)
    return (1 - t) * a + t * b


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


def random_box_point(rng, a, b):
    """A simplex point with independent per-component positions between ``a`` and ``b``.

    Each component sits at a_j + t_j (b_j - a_j) with t_j in (0, 1); the larger
    of the rising/falling mass is scaled down so the result still sums to one.
    """
    d = b - a
    t = rng.uniform(0.05, 0.95, size=a.shape)
    up = d > 0
    gain = np.sum(t[up] * d[up])
    loss = -np.sum(t[~up] * d[~up])
    if gain > loss:
        t[up] *= loss / gain
    elif loss > gain:
        t[~up] *= gain / loss
    mid = a + t * d
    return mid / mid.sum()


# one line per acceptance criterion, echoed in the terminal summary so it shows without -s
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
