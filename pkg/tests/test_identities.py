#!/usr/bin/env python3
import numpy as np
import pytest

from prymlab.base import DegenerateConfiguration, InconsistentSystem, ZeroCoefficient
from prymlab.identities import LatticeIndex, SchroedingerConstants, flip_parity, random_arguments
from prymlab.identities.divisor import (
    exponential_tau_family,
    prym_tau_family,
    tau_sites,
    verify_C,
    verify_recursion_consistency,
    verify_tau_residues,
)
from prymlab.identities.genus1 import FourPointWave, verify_general_four_point_genus1
from prymlab.identities.kummer import recover_constants, secant_coefficients, verify_B
from prymlab.identities.lattice import (
    five_term_coefficients,
    psi_field,
    quad_terms,
    swap_points,
    u_field,
    verify_A,
    verify_five_term,
    verify_quad,
)
from prymlab.prym.data import perturb_period_matrix
from prymlab.theta.riemann import theta

SMALL_WINDOW = (range(0, 3), range(0, 3))


def test_lattice_index_parity():
    assert LatticeIndex(0, 0).nu == 0
    assert LatticeIndex(1, 0).nu == 1
    assert LatticeIndex(2, 3).nu == 1
    assert LatticeIndex(0, 0, flipped=True).nu == 1
    assert LatticeIndex(1, 1).shifted(0, 1).nu == 1


def test_constants_reject_zero():
    with pytest.raises(ValueError):
        SchroedingerConstants(1, 1, 0, 1, 1, 1)


def test_recover_constants_round_trip():
    k = SchroedingerConstants(0.8 + 0.3j, 1.2 - 0.1j, 0.5 + 0.5j, 1.1, 0.9j, 1.3 - 0.4j)
    even, odd = secant_coefficients(k)
    recovered = recover_constants((even, odd))
    even2, odd2 = secant_coefficients(recovered)
    assert np.max(np.abs(even2 - even) / np.abs(even)) < 1e-10
    assert np.max(np.abs(odd2 - odd) / np.abs(odd)) < 1e-10


def test_recover_constants_errors():
    k = SchroedingerConstants(0.8, 1.2, 0.5, 1.1, 0.9, 1.3)
    even, odd = secant_coefficients(k)
    with pytest.raises(ZeroCoefficient):
        recover_constants(([0.0, 1.0, 1.0, -1.0], odd))
    with pytest.raises(InconsistentSystem):
        recover_constants((even, odd), trial=lambda _: 1.0)


def test_exponential_tau_identities(rng):
    family = exponential_tau_family(0.3 + 0.1j, [0.2 - 0.4j, 0.1j], [0.7 + 0.1j, -0.3 + 0.5j])
    sites = [(n, nu, rng.normal(size=2) + 1j * rng.normal(size=2)) for n in (-1, 0, 2) for nu in (0, 1)]
    assert verify_tau_residues(family, sites, 1e-12).passed
    assert verify_recursion_consistency(family, sites, 1e-12).passed


def test_four_point_genus1(rng):
    tau = 0.3 + 1.1j
    marked = (0.11 + 0.2 * tau, 0.47 + 0.35 * tau, 0.72 + 0.61 * tau, 0.29 + 0.83 * tau)
    zs = [complex(rng.uniform(0, 1) + tau * rng.uniform(0, 1)) for _ in range(3)]
    report = verify_general_four_point_genus1(tau, marked, 0.6 + 0.1 * tau, (range(4), range(4)), zs, 1e-8)
    assert report.passed
    assert float(report.notes["c_mismatch"]) < 1e-10


def test_four_point_degenerate():
    with pytest.raises(DegenerateConfiguration):
        FourPointWave(0.3 + 1.1j, (0.2, 0.2), (0.5 + 0.3j, 0.7 + 0.1j), 0.4j)


def test_u_field_integer_periodicity(g1_lab):
    data, k = g1_lab.data, g1_lab.constants
    Z = g1_lab.arguments[0]
    idx = LatticeIndex(1, 2)
    shifted = Z + np.eye(data.g)[0]
    assert abs(u_field(data, k, idx, shifted) - u_field(data, k, idx, Z)) < 1e-10 * abs(u_field(data, k, idx, Z))


def test_psi_field_origin(g1_lab):
    data, k = g1_lab.data, g1_lab.constants
    Z = g1_lab.arguments[1]
    ones = SchroedingerConstants.ones()
    psi = psi_field(data, ones, LatticeIndex(0, 0), Z)
    expected = theta(data.Pi, data.A + Z) / theta(data.Pi, data.W + Z)
    assert abs(psi - expected) < 1e-12 * abs(expected)
    assert abs(psi_field(data, k, LatticeIndex(0, 0), Z) - expected) < 1e-12 * abs(expected)


def test_g1_schroedinger_equation(g1_lab, g1_config):
    report = g1_lab.verify("A")
    assert report.passed
    assert report.max_rel_residual < 1e-8
    assert report.sample_count > 0.9 * 36 * g1_config.samples.z


def test_g1_constants_matter(g1_lab):
    report = verify_A(g1_lab.data, SchroedingerConstants.ones(), SMALL_WINDOW, g1_lab.arguments[:5], 1e-8)
    assert report.max_rel_residual > 1e-3


def test_g1_perturbed_period_matrix(g1_lab, rng):
    direct = verify_A(g1_lab.data, g1_lab.constants, SMALL_WINDOW, g1_lab.arguments[:5], 1e-8)
    perturbed = perturb_period_matrix(g1_lab.data, 1e-2, rng)
    report = verify_A(perturbed, g1_lab.constants, SMALL_WINDOW, g1_lab.arguments[:5], 1e-8)
    assert not report.passed
    assert report.max_rel_residual > 1e-4
    assert report.max_rel_residual > 1e3 * direct.max_rel_residual


def test_g1_parity_relabelling(g1_lab):
    data, k = flip_parity(g1_lab.data, g1_lab.constants)
    Zs = [Z + g1_lab.data.W for Z in g1_lab.arguments[:5]]
    direct = verify_A(g1_lab.data, g1_lab.constants, SMALL_WINDOW, g1_lab.arguments[:5], 1e-8)
    flipped = verify_A(data, k, SMALL_WINDOW, Zs, 1e-8, flipped=True)
    assert direct.passed
    assert flipped.passed


def test_g1_secant_relations(g1_lab):
    report, k = verify_B(g1_lab.data, g1_lab.constants, tolerance=1e-6)
    assert report.passed
    assert report.notes["rank_test"] == "structural check only"
    assert k == g1_lab.constants


def test_g1_divisor_relation(g1_lab):
    report = g1_lab.verify("C")
    assert report.passed
    assert report.sample_count == 2 * len(g1_lab.divisor_points)


def test_g1_divisor_relation_fails_off_prym(g1_lab, rng):
    perturbed = perturb_period_matrix(g1_lab.data, 1e-2, rng)
    report = verify_C(perturbed, g1_lab.constants, g1_lab.divisor_points, 1e-6)
    assert not report.passed


def test_g1_quad(g1_lab):
    assert g1_lab.verify("quad").passed


def test_g1_quad_swapped_points(g1_lab):
    data, k = swap_points(g1_lab.data, g1_lab.constants)
    assert np.array_equal(data.A, g1_lab.data.W) and np.array_equal(data.W, g1_lab.data.A)
    assert (k.c3, k.w3) == (g1_lab.constants.c3, g1_lab.constants.w3)
    for Z in g1_lab.arguments[:5]:
        terms = quad_terms(g1_lab.data, g1_lab.constants, Z)
        swapped = quad_terms(data, k, Z)
        expected = -np.concatenate([terms[4:], terms[:4]])
        assert np.max(np.abs(swapped - expected)) < 1e-12 * np.max(np.abs(terms))
    report = verify_quad(data, k, g1_lab.arguments, g1_lab.tolerance("quad"))
    assert report.passed
    assert report.max_rel_residual < 1e-6


def test_g1_five_term(g1_lab):
    report = g1_lab.verify("five-term")
    assert report.passed
    assert float(report.notes["coefficient_mismatch"]) < 1e-6


def test_five_term_d_identity(g1_lab):
    a, b, c, d = five_term_coefficients(g1_lab.data, g1_lab.constants, LatticeIndex(2, 2), g1_lab.arguments[2])
    assert abs(d - (1 - a - b + c)) < 1e-14 * max(1.0, abs(a), abs(b), abs(c))


def test_five_term_independent_of_a(g1_lab):
    data = g1_lab.data.with_vectors(A=g1_lab.data.A + 0.1 * g1_lab.data.U)
    report = verify_five_term(data, g1_lab.constants, SMALL_WINDOW, g1_lab.arguments[:3], 1e-6)
    assert report.sample_count > 0
    assert float(report.notes["coefficient_mismatch"]) < 1e-6


def test_g1_tau_equation(g1_lab):
    report = g1_lab.verify("tau")
    assert report.passed
    assert float(report.notes["taud"]) < 1e-6


def test_g1_tau_equation_wrong_constant(g1_lab):
    family = prym_tau_family(g1_lab.data, g1_lab.constants).with_constant(2 * g1_lab.constants.c3)
    report = verify_tau_residues(family, tau_sites(g1_lab.data, g1_lab.divisor_points), 1e-6)
    assert report.max_rel_residual > 1e-2


def test_g1_recursion_consistency(g1_lab):
    assert g1_lab.verify("recursion").passed


def test_g1_recursion_fails_off_prym(g1_lab):
    data = g1_lab.data.with_vectors(W=g1_lab.data.W + 0.05)
    family = prym_tau_family(data, g1_lab.constants)
    report = verify_recursion_consistency(family, tau_sites(data, g1_lab.divisor_points), 1e-6)
    assert report.max_rel_residual > 1e-3


def test_g1_four_point(g1_lab):
    assert g1_lab.verify("four-point").passed


def test_g2_schroedinger_equation(g2_lab):
    report = g2_lab.verify("A")
    assert report.passed
    assert report.max_rel_residual < 1e-6


def test_g2_secant_rank(g2_lab):
    report, _ = verify_B(g2_lab.data, g2_lab.constants, tolerance=1e-6)
    assert report.passed
    assert "rank_test" not in report.notes


def test_g2_secant_rank_random_period_matrix(g2_lab, rng, random_period_matrix):
    largest = []
    for _ in range(20):
        vectors = {name: 0.5 * (rng.normal(size=2) + 1j * rng.normal(size=2)) for name in "AUVW"}
        data = g2_lab.data.with_period_matrix(random_period_matrix(rng, 2)).with_vectors(**vectors)
        report, _ = verify_B(data, g2_lab.constants, tolerance=1e-6)
        largest.append(max(s.residual for s in report.samples if s.n == 0))
    assert np.median(largest) > 1e-2


def test_g2_divisor_relation(g2_lab):
    assert g2_lab.verify("C").passed


def test_random_arguments_are_reproducible(g1_lab):
    first = random_arguments(g1_lab.data.Pi, np.random.default_rng(7), 4)
    second = random_arguments(g1_lab.data.Pi, np.random.default_rng(7), 4)
    assert all(np.array_equal(a, b) for a, b in zip(first, second))
