import json
import math
from importlib import resources

import numpy as np
import pytest

from holonorm.jets import JetMap, get_basis


def fixture_path(name):
    return str(resources.files("holonorm") / "data" / name)


def load_fixture(name):
    with open(fixture_path(name)) as fh:
        return json.load(fh)


def integer_jet(rng, k, D, dim_out=None, unimodular=True, spread=3):
    """Random jet with small Gaussian-integer coefficients.

    Compositions and inverses of such jets stay integral and far below
    2**53, so binary64 arithmetic on them is exact.
    """
    dim_out = k if dim_out is None else dim_out
    basis = get_basis(k, D)
    c = rng.integers(-spread, spread + 1, (dim_out, basis.size)) + 1j * rng.integers(-spread, spread + 1,
                                                                                     (dim_out, basis.size))
    # sparse higher-degree data keeps the integers small after composition
    c = c * (rng.random(c.shape) < 0.3)
    if unimodular and dim_out == k:
        A = np.eye(k, dtype=complex) + np.triu(rng.integers(-2, 3, (k, k)), 1)
        A = A[rng.permutation(k)]
        c[:, basis.degree_slices[1]] = A
    return JetMap(c, k, D)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


LOG2 = math.log(2)
LOG4 = math.log(4)


ACCEPTANCE_LINES = []


def record(number, ok, detail=""):
    """Record one acceptance line; printed again in the terminal summary."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
