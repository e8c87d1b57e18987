"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest
from scipy.integrate import quad

import diffsearch as ds


class FixedUniform:
    """Duck-typed stand-in for RngStream that returns scripted uniforms."""

    def __init__(self, values):
        self._values = list(values)

    def uniform(self, low=0.0, high=1.0, size=None):
        v = self._values.pop(0)
        return low + (high - low) * v


def quadratic_well(lo=-5.0, hi=5.0):
    """V(x) = x^2 / 2 on a 1-D box."""
    return ds.Problem("quadwell", [[lo, hi]], lambda x: 0.5 * float(x[0]) ** 2)


def boltzmann_oracle(v, d, lo, hi):
    """Normalized pdf and cdf of exp(-V/D) on [lo, hi] by adaptive quadrature."""
    z = quad(lambda t: np.exp(-v(t) / d), lo, hi, limit=200)[0]

    def pdf(x):
        return np.exp(-v(x) / d) / z

    def cdf(x):
        return quad(lambda t: np.exp(-v(t) / d), lo, x, limit=200)[0] / z

    return pdf, cdf


def greedy_hdi_cells(cell_mass, start, mass):
    """Reference greedy interval growth over cell masses; ties go left."""
    left, right = start, start + 1
    acc = cell_mass[start]
    n = len(cell_mass)
    while acc < mass and (left > 0 or right < n):
        if left > 0 and right < n:
            go_left = cell_mass[left - 1] >= cell_mass[right]
        else:
            go_left = left > 0
        if go_left:
            left -= 1
            acc += cell_mass[left]
        else:
            acc += cell_mass[right]
            right += 1
    return left, right


@pytest.fixture
def rng():
    return ds.RngStream(12345, 0)
