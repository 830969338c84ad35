#!/usr/bin/env python3
from typing import Callable

import numpy as np
import pytest

from prymlab.base import (
    NoConvergence,
    NotPositiveDefinite,
    NotSymmetric,
    RadiusCapExceeded,
    ThetaPolicy,
)
from prymlab.theta import (
    PeriodMatrix,
    find_theta_zero,
    kummer,
    theta,
    theta_characteristic,
    theta_directional_derivative,
    theta_quasi_factor,
    theta_second_order,
    validate_period_matrix,
)
from prymlab.theta.kummer import characteristics, theta_second_order_direct
from prymlab.theta.riemann import theta_log, theta_reference_genus1

Factory = Callable[[np.random.Generator, int], PeriodMatrix]


def _random_z(gen: np.random.Generator, B: PeriodMatrix) -> np.ndarray:
    return B.lattice_vector(gen.uniform(0, 1, B.g), gen.uniform(-0.5, 0.5, B.g))


def test_validate_period_matrix():
    assert validate_period_matrix([[1j]]).g == 1
    with pytest.raises(NotPositiveDefinite):
        validate_period_matrix([[1.0]])
    with pytest.raises(NotSymmetric):
        validate_period_matrix([[1j, 1], [0, 1j]])
    with pytest.raises(ValueError):
        validate_period_matrix([[1j, 0]])


def test_theta_at_zero():
    B = validate_period_matrix([[1j]])
    assert abs(theta(B, [0]) - 1.08643481121331) < 1e-10
    assert abs(theta(B, [0]) - theta_reference_genus1(1j, 0)) < 1e-13


def test_theta_periodicity_and_parity(rng: np.random.Generator, random_period_matrix: Factory):
    for g in (1, 2):
        B = random_period_matrix(rng, g)
        for _ in range(10):
            z = _random_z(rng, B)
            value = theta(B, z)
            for j in range(g):
                e = np.zeros(g)
                e[j] = 1.0
                assert abs(theta(B, z + e) - value) < 1e-12 * (1 + abs(value))
            assert abs(theta(B, -z) - value) < 1e-12 * (1 + abs(value))


def test_theta_diagonal_factorizes():
    assert abs(theta(validate_period_matrix(np.diag([1j, 1j])), [0, 0]) - theta(validate_period_matrix([[1j]]), [0]) ** 2) < 1e-13


def test_theta_quasi_periodicity(rng: np.random.Generator, random_period_matrix: Factory):
    for i in range(100):
        B = random_period_matrix(rng, 1 + i % 2)
        z = _random_z(rng, B)
        lam = B.lattice_vector(rng.integers(-2, 3, B.g), rng.integers(-2, 3, B.g))
        mu = theta_quasi_factor(B, z, lam)
        value = theta(B, z)
        shifted = theta(B, z + lam)
        assert abs(shifted - mu * value) < 1e-11 * max(abs(shifted), abs(mu * value), 1.0)


def test_theta_quasi_factor_examples():
    B = validate_period_matrix([[1j]])
    assert theta_quasi_factor(B, [0.3], [2.0]) == 1.0
    expected = np.exp(-1j * np.pi * 1j - 2j * np.pi * 0.3)
    assert abs(theta_quasi_factor(B, [0.3], [1j]) - expected) < 1e-15
    with pytest.raises(ValueError):
        theta_quasi_factor(B, [0.3], [0.5])


def test_theta_genus1_oracle(rng: np.random.Generator):
    for _ in range(100):
        tau = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.6, 2.0))
        B = validate_period_matrix([[tau]])
        z = rng.uniform(0, 1) + tau * rng.uniform(-0.5, 0.5)
        value = theta(B, [z])
        assert abs(value - theta_reference_genus1(tau, z, dps=25)) < 1e-12 * (1 + abs(value))


def test_theta_log_matches_theta(rng: np.random.Generator, random_period_matrix: Factory):
    B = random_period_matrix(rng, 2)
    z = _random_z(rng, B) + B.lattice_vector([0, 0], [3, -2])
    assert abs(np.exp(theta_log(B, z)) / theta(B, z) - 1) < 1e-11


def test_addition_formula(rng: np.random.Generator, random_period_matrix: Factory):
    for i in range(50):
        B = random_period_matrix(rng, 1 + i % 2)
        z = _random_z(rng, B)
        w = _random_z(rng, B)
        lhs = theta(B, z + w) * theta(B, z - w)
        terms = [theta_second_order(B, z, eps) * theta_second_order(B, w, eps) for eps in characteristics(B.g)]
        scale = max([abs(lhs)] + [abs(t) for t in terms])
        assert abs(lhs - sum(terms)) < 1e-9 * scale


def test_theta_second_order(rng: np.random.Generator, random_period_matrix: Factory):
    B = validate_period_matrix([[1j]])
    assert abs(theta_second_order(B, [0], [0]) - theta(validate_period_matrix([[2j]]), [0])) < 1e-13

    B = random_period_matrix(rng, 2)
    z = _random_z(rng, B)
    for eps in characteristics(2):
        value = theta_second_order(B, z, eps)
        assert abs(value - theta_second_order_direct(B, z, eps)) < 1e-11 * (1 + abs(value))
        assert abs(theta_second_order(B, z + np.array([1, 0]), eps) - value) < 1e-11 * (1 + abs(value))
        assert abs(theta_second_order(B, -z, eps) - value) < 1e-12 * (1 + abs(value))


def test_theta_characteristic():
    tau = 0.2 + 1.1j
    B = validate_period_matrix([[tau]])
    # θ₁ is odd and vanishes at the origin
    assert abs(theta_characteristic(B, [0.0], [0.5], [0.5])) < 1e-14
    assert abs(theta_characteristic(B, [0.3], [0.5], [0.5]) + theta_characteristic(B, [-0.3], [0.5], [0.5])) < 1e-13
    assert abs(theta_characteristic(B, [0.3], [0], [0]) - theta(B, [0.3])) < 1e-14
    with pytest.raises(ValueError):
        theta_characteristic(B, [0.3], [0.25], [0])


def test_kummer(rng: np.random.Generator, random_period_matrix: Factory):
    B = validate_period_matrix([[0.1 + 1.2j]])
    assert len(kummer(B, [0.2])) == 2

    B = random_period_matrix(rng, 2)
    z = _random_z(rng, B)
    point = kummer(B, z)
    assert len(point) == 4
    lam = B.lattice_vector([1, -1], [1, 2])
    assert point.projective_distance(kummer(B, z + lam)) < 1e-10
    assert np.max(np.abs(kummer(B, -z).components - point.components)) < 1e-12 * np.max(np.abs(point.components))


def test_directional_derivative(rng: np.random.Generator, random_period_matrix: Factory):
    B = random_period_matrix(rng, 2)
    z = _random_z(rng, B)
    direction = rng.normal(size=2) + 1j * rng.normal(size=2)
    assert theta_directional_derivative(B, z, [0, 0]) == 0
    h = 1e-5
    fd = (theta(B, z + h * direction) - theta(B, z - h * direction)) / (2 * h)
    exact = theta_directional_derivative(B, z, direction)
    assert abs(fd - exact) < 1e-7 * max(abs(exact), 1.0)
    assert abs(theta_directional_derivative(B, [0, 0], direction)) < 1e-12


def test_find_theta_zero():
    tau = 0.1 + 1.3j
    B = validate_period_matrix([[tau]])
    point = find_theta_zero(B, [0], [1])
    assert abs(theta(B, point.z)) < 1e-12 * point.scale
    offset = B.lattice_coordinates(point.z - (1 + tau) / 2)
    assert np.max(np.abs(offset - np.round(offset))) < 1e-10
    again = find_theta_zero(B, point.z + 0.01, [1])
    offset = B.lattice_coordinates(again.z - point.z)
    assert np.max(np.abs(offset - np.round(offset))) < 1e-10


def test_find_theta_zero_no_convergence():
    B = validate_period_matrix([[1j]])
    with pytest.raises(NoConvergence):
        find_theta_zero(B, [0.1], [1], max_iters=0)


def test_radius_cap():
    with pytest.raises(RadiusCapExceeded):
        theta(validate_period_matrix([[0.01j]]), [0], ThetaPolicy(max_radius=2))


def test_error_monotonicity(rng: np.random.Generator, random_period_matrix: Factory):
    B = random_period_matrix(rng, 2)
    z = _random_z(rng, B)
    reference = theta(B, z, ThetaPolicy(target_abs_error=1e-30))
    deviations = [abs(theta(B, z, ThetaPolicy(target_abs_error=10.0**-k)) - reference) for k in range(2, 15)]
    for coarse, fine in zip(deviations, deviations[1:]):
        assert fine <= coarse + 1e-15
