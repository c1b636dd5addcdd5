"""Shared fixtures: the classic menus and small helpers used across tests."""

import numpy as np
import pytest

from anomgen.lotteries import Example, ExampleCollection, Menu, make_lottery, menu_from_flat

# Tolerance used when re-deriving quantities from tables rounded to whole
# percents / cents.
TABLE_TOL = 0.02


@pytest.fixture
def allais_menus():
    """The two 1M/5M menus; hypothesized choices are lottery 0 then lottery 1."""
    menu_a = Menu(make_lottery([1e6, 0, 5e6], [1.0, 0.0, 0.0]),
                  make_lottery([1e6, 0, 5e6], [0.89, 0.01, 0.10]))
    menu_b = Menu(make_lottery([0, 1e6, 5e6], [0.89, 0.11, 0.0]),
                  make_lottery([0, 1e6, 5e6], [0.90, 0.0, 0.10]))
    return menu_a, menu_b


@pytest.fixture
def allais_collection(allais_menus):
    menu_a, menu_b = allais_menus
    return ExampleCollection((Example(menu_a, 0.2), Example(menu_b, 0.8)))


@pytest.fixture
def certainty_menus():
    """Certain 3000 against risky 4000, then both scaled to low probability."""
    menu_a = Menu(make_lottery([4000, 0], [0.80, 0.20]),
                  make_lottery([3000, 0], [1.00, 0.00]))
    menu_b = Menu(make_lottery([4000, 0], [0.20, 0.80]),
                  make_lottery([3000, 0], [0.25, 0.75]))
    return menu_a, menu_b


@pytest.fixture
def certainty_collection(certainty_menus):
    menu_a, menu_b = certainty_menus
    return ExampleCollection((Example(menu_a, 0.8), Example(menu_b, 0.2)))


@pytest.fixture
def dc_example_collection():
    """Two-payoff dominated-consequence pair (choices: lottery 0, lottery 1)."""
    menu_a = Menu(make_lottery([6.44, 6.71], [0.00, 1.00]),
                  make_lottery([5.72, 8.64], [0.13, 0.87]))
    menu_b = Menu(make_lottery([6.44, 6.71], [0.11, 0.89]),
                  make_lottery([5.72, 8.64], [0.34, 0.66]))
    return ExampleCollection((Example(menu_a, 0.3), Example(menu_b, 0.7)))


@pytest.fixture
def rdc_example_collection():
    """Reverse dominated-consequence pair (choices: lottery 0, lottery 1)."""
    menu_a = Menu(make_lottery([2.59, 8.87], [0.88, 0.12]),
                  make_lottery([3.51, 8.65], [0.99, 0.01]))
    menu_b = Menu(make_lottery([2.59, 8.87], [0.49, 0.51]),
                  make_lottery([3.51, 8.65], [0.65, 0.35]))
    return ExampleCollection((Example(menu_a, 0.2), Example(menu_b, 0.8)))


@pytest.fixture
def sd_example_collection():
    """Strict-dominance pair (choices: lottery 1, lottery 0)."""
    menu_a = Menu(make_lottery([6.71, 8.98], [0.22, 0.78]),
                  make_lottery([7.17, 8.04], [1.00, 0.00]))
    menu_b = Menu(make_lottery([6.71, 8.98], [0.49, 0.51]),
                  make_lottery([7.17, 8.04], [0.45, 0.55]))
    return ExampleCollection((Example(menu_a, 0.8), Example(menu_b, 0.2)))


@pytest.fixture
def ternary_example_collection():
    """Three-payoff pair whose lotteries decompose over shared components."""
    menu_a = Menu(make_lottery([4.30, 6.17, 8.51], [0.15, 0.61, 0.24]),
                  make_lottery([4.63, 5.04, 5.81], [1.00, 0.00, 0.00]))
    menu_b = Menu(make_lottery([4.30, 6.17, 8.51], [0.36, 0.36, 0.28]),
                  make_lottery([4.63, 5.04, 5.81], [0.30, 0.67, 0.03]))
    return ExampleCollection((Example(menu_a, 0.8), Example(menu_b, 0.2)))


def central_difference(fn, x, h=1e-6):
    """Componentwise central finite differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (fn(xp) - fn(xm)) / (2 * h)
    return grad


def flat_menu_fn(fn, n_payoffs):
    """Adapt a Menu function to flat coordinates without revalidation."""
    return lambda x: fn(menu_from_flat(x, n_payoffs, validate=False))
