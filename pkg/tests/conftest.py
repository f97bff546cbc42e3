import numpy as np
import pytest

from sqent.state import DensityOperator, SystemLayout, random_state

ACCEPTANCE_LINES: dict[int, str] = {}


def layout(**dims) -> SystemLayout:
    return SystemLayout(tuple(dims.items()))


def random_dims(rng, labels, lo=2, hi=4):
    return SystemLayout(tuple((lab, int(rng.integers(lo, hi + 1))) for lab in labels))


def random_contraction(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return g / np.linalg.norm(g, 2) * rng.uniform(0.3, 1.0)


def random_product(rng, labels_dims):
    """Pure product state |a>|b>... as a density operator."""
    out = None
    for lab, d in labels_dims:
        s = random_state(((lab, d),), 1, rng)
        out = s if out is None else _kron(out, s)
    return out


def _kron(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    from sqent.state import tensor
    return tensor(a, b)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
