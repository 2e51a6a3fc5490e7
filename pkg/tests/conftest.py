import numpy as np
import pytest

from vord.grid import Ball, Domain, GridFunction
from vord.order_field import build_order_field


@pytest.fixture
def dom16():
    return Domain(2, 8.0, 16)


@pytest.fixture
def dom32():
    return Domain(2, 8.0, 32)


def piecewise(domain, radius=1.6, inner=0.7):
    return build_order_field(domain, 0.5, 0.5, 0.7, Ball((0.0,) * domain.d, radius), inner)


def gaussian(domain, sigma=1.0):
    return GridFunction(np.exp(-domain.radius() ** 2 / (2 * sigma ** 2)), domain)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
