from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from afem_newton.estimator import LocalEstimators
from afem_newton.marking import MarkParams, doerfler_mark


def brute_force_minimum(eta_sq, theta):
    """Smallest cardinality of a subset carrying theta of the total."""
    total = eta_sq.sum()
    if total == 0:
        return 0
    for k in range(1, len(eta_sq) + 1):
        for subset in combinations(range(len(eta_sq)), k):
            if eta_sq[list(subset)].sum() >= theta * total:
                return k
    raise AssertionError("theta > 1?")


@pytest.mark.parametrize("eta, theta, expect", [
    ([4, 1, 1, 1, 1], 0.5, [0]),
    ([1, 0], 1.0, [0]),
    ([2, 2, 1], 0.4, [0]),
    ([0, 0, 0], 0.5, []),
    ([1, 1, 1, 1], 0.6, [0, 1, 2]),
])
def test_examples(eta, theta, expect):
    assert doerfler_mark(np.array(eta, float), MarkParams(theta)).tolist() == expect


def test_minimal_against_brute_force():
    rng = np.random.default_rng(20240601)
    for _ in range(200):
        n = int(rng.integers(1, 13))
        eta = rng.exponential(size=n) * (rng.random(n) > 0.2)
        theta = float(rng.uniform(0.05, 1.0))
        marked = doerfler_mark(eta, theta)
        assert eta[marked].sum() >= theta * eta.sum() * (1 - 1e-12)
        assert len(marked) == brute_force_minimum(eta, theta)


@given(st.lists(st.integers(0, 2 ** 20), min_size=1, max_size=10), st.sampled_from([0.1, 0.25, 0.3, 0.5, 0.75, 0.9]))
def test_minimal_exact_arithmetic(values, theta):
    eta = np.array(values, dtype=float)
    marked = doerfler_mark(eta, theta)
    assert eta[marked].sum() >= theta * eta.sum()
    assert len(marked) == brute_force_minimum(eta, theta)
    assert len(set(marked.tolist())) == len(marked)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30))
def test_theta_one_marks_support(values):
    eta = np.array(values)
    assert doerfler_mark(eta, 1.0).tolist() == np.flatnonzero(eta > 0).tolist()


def test_ties_by_lower_index():
    assert doerfler_mark(np.array([1.0, 3.0, 3.0, 3.0]), 0.3).tolist() == [1]
    assert doerfler_mark(np.array([1.0, 3.0, 3.0, 3.0]), 0.5).tolist() == [1, 2]


def test_accepts_local_estimators():
    est = LocalEstimators(np.array([0.1, 5.0, 0.2]))
    assert doerfler_mark(est, MarkParams(0.5)).tolist() == [1]


@pytest.mark.parametrize("theta", [0.0, -0.1, 1.5])
def test_invalid_theta(theta):
    with pytest.raises(ValueError):
        MarkParams(theta)
    with pytest.raises(ValueError):
        MarkParams(0.5, cmark=0.5)


def test_empty_indicator_vector():
    with pytest.raises(ValueError):
        doerfler_mark(np.array([]), 0.5)
