#!/usr/bin/env python3
from dataclasses import replace

import numpy as np
import pytest

from prymlab.base import BadDegree, DegenerateMarkedPoints, NotSquarefree, QuadratureNoConvergence, RamifiedAtZero
from prymlab.prym import build_cover, from_roots
from prymlab.prym.abel import abel_integral, abel_prym, build_path
from prymlab.prym.data import PrymData, make_prym_data, perturb_period_matrix, resolve_lift
from prymlab.prym.elliptic import cross_check_elliptic
from prymlab.prym.periods import period_matrix, standard_basis

G1_ROOTS = [-2.0, -1.0, 1.0, 2.0]
G2_ROOTS = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]


@pytest.fixture(scope="module")
def g1_curve():
    return from_roots(G1_ROOTS)


@pytest.fixture(scope="module")
def g1_data(g1_curve):
    return make_prym_data(g1_curve, [0.3, 0.7 + 0.2j, 1.1j], 0.5 + 0.4j)


def test_build_cover_errors():
    with pytest.raises(BadDegree):
        build_cover([1, 0, 0, 1])
    with pytest.raises(BadDegree):
        build_cover([0, 1, 0, 0, 1])
    with pytest.raises(RamifiedAtZero):
        build_cover(np.poly([0.0, 1.0, 2.0, 3.0]))
    with pytest.raises(NotSquarefree):
        build_cover(np.poly([1.0, 1.0, 2.0, 3.0]))


def test_branch_points_sorted():
    curve = from_roots([2.0, -1.0, 1.0, -2.0])
    assert curve.branch_points.real.tolist() == G1_ROOTS
    assert curve.g == 1
    assert from_roots(G2_ROOTS).g == 2


@pytest.mark.parametrize("roots", [G1_ROOTS, [1.0, 2.0, 3.0, 4.0]])
def test_elliptic_agm(roots):
    check = cross_check_elliptic(from_roots(roots))
    assert check.discrepancy < 1e-10
    assert check.agm_tau.imag > 0


def test_elliptic_agm_detects_wrong_endpoint():
    check = cross_check_elliptic(from_roots(G1_ROOTS), endpoint_shift=1e-3)
    assert check.discrepancy > 1e-5


def test_period_matrix_rescale_invariant():
    curve = from_roots([1.0, 2.0, 3.0, 4.0])
    Pi, _ = period_matrix(curve)
    scaled, _ = period_matrix(curve.scaled(2.0))
    assert np.max(np.abs(Pi.entries - scaled.entries)) < 1e-9


def test_period_matrix_genus2():
    Pi, a_periods = period_matrix(from_roots(G2_ROOTS))
    assert Pi.g == 2
    assert a_periods.shape == (2, 2)
    assert np.max(np.abs(Pi.entries - Pi.entries.T)) < 1e-8
    assert np.all(np.linalg.eigvalsh(Pi.imag) > 0)


def test_period_matrix_order_doubling():
    curve = from_roots(G2_ROOTS)
    low, _ = period_matrix(curve, quad_order=32)
    high, _ = period_matrix(curve, quad_order=128)
    assert np.max(np.abs(low.entries - high.entries)) < 1e-9


def test_abel_base_point_and_involution(g1_curve):
    _, a_periods = period_matrix(g1_curve)
    base = complex(g1_curve.branch_points[0])
    assert np.all(abel_integral(g1_curve, base, 0.0) == 0)

    x = 0.3
    y = complex(g1_curve.sheet_sqrt(x**2))
    image = abel_prym(g1_curve, x, y, a_periods)
    assert np.all(abel_prym(g1_curve, -x, -y, a_periods) == -image)


def test_abel_path_independence(g1_curve):
    t = 0.09
    v = complex(g1_curve.sheet_sqrt(t))
    # the straight path from b₁ = −2 runs through −1, so a detour is inserted
    assert len(build_path(g1_curve, t, 1e-2)) == 3
    narrow = abel_integral(g1_curve, t, v, detour_radius=1e-2)
    wide = abel_integral(g1_curve, t, v, detour_radius=5e-2)
    assert np.max(np.abs(narrow - wide)) < 1e-9


def test_abel_rejects_off_curve(g1_curve):
    with pytest.raises(ValueError):
        abel_integral(g1_curve, 0.09, 5.0)


def test_prym_data_swapped_point_negates(g1_curve, g1_data: PrymData):
    _, a_periods = period_matrix(g1_curve)
    x = g1_data.marked_x[0]
    y = complex(g1_curve.sheet_sqrt(x**2))
    # U = −A(P₁⁺); using P₁⁻ = σ(P₁⁺) instead gives −U
    assert np.max(np.abs(-abel_prym(g1_curve, -x, -y, a_periods) + g1_data.U)) < 1e-14


def test_prym_data_degenerate_points(g1_curve):
    with pytest.raises(DegenerateMarkedPoints):
        make_prym_data(g1_curve, [0.3, 0.3, 1.1j], 0.5 + 0.4j)
    with pytest.raises(DegenerateMarkedPoints):
        make_prym_data(g1_curve, [0.3, -0.3, 1.1j], 0.5 + 0.4j)
    with pytest.raises(DegenerateMarkedPoints):
        make_prym_data(g1_curve, [0.3, 1.0, 1.1j], 0.5 + 0.4j)
    with pytest.raises(DegenerateMarkedPoints):
        make_prym_data(g1_curve, [0.3, 0.7 + 0.2j, 0.0], 0.5 + 0.4j)


def test_prym_data_json(g1_data: PrymData):
    data = resolve_lift(g1_data)
    loaded = PrymData.from_json(data.to_json())
    assert np.array_equal(loaded.Pi.entries, data.Pi.entries)
    for name, vec in data.vectors().items():
        assert np.array_equal(loaded.vectors()[name], vec)
    assert loaded.lift == data.lift
    assert loaded.marked_x == data.marked_x


def test_resolve_lift_genus1(g1_data: PrymData):
    data = resolve_lift(g1_data)
    assert data.lift is not None
    assert data.lift.w_sign == 1
    assert data.lift.score == 0.0
    assert np.array_equal(data.U, g1_data.U)
    assert np.array_equal(data.W, g1_data.W)


def test_perturb_period_matrix(g1_data: PrymData):
    perturbed = perturb_period_matrix(g1_data, 1e-3, np.random.default_rng(1))
    difference = np.max(np.abs(perturbed.Pi.entries - g1_data.Pi.entries))
    assert abs(difference - 1e-3) < 1e-12
    assert np.array_equal(perturbed.A, g1_data.A)


def test_build_cover_accepts_close_roots():
    curve = build_cover(np.poly([1.0, 1.0 + 1e-7, 2.0, 3.0]))
    assert curve.g == 1
    assert abs(curve.branch_points[1] - curve.branch_points[0]) > 1e-8


def test_standard_basis_genus2():
    curve = from_roots(G2_ROOTS)
    basis = standard_basis(curve)
    assert basis.g == 2
    assert basis.cuts == ((0, 1), (2, 3))
    assert basis.b_gaps == ((0, 1), (1,))
    assert basis.base == 1.0


def test_period_matrix_explicit_basis():
    curve = from_roots(G2_ROOTS)
    default, _ = period_matrix(curve)
    explicit, _ = period_matrix(curve, standard_basis(curve))
    assert np.array_equal(default.entries, explicit.entries)


def test_period_matrix_rejects_foreign_basis(g1_curve):
    with pytest.raises(ValueError):
        period_matrix(g1_curve, standard_basis(from_roots(G2_ROOTS)))
    basis = standard_basis(g1_curve)
    with pytest.raises(ValueError):
        period_matrix(g1_curve, replace(basis, cuts=((1, 2),)))
    with pytest.raises(ValueError):
        period_matrix(g1_curve, replace(basis, b_gaps=((1,),)))
    with pytest.raises(ValueError):
        abel_integral(g1_curve, 0.09, complex(g1_curve.sheet_sqrt(0.09)), basis=replace(basis, base_index=4))


def test_abel_base_index(g1_curve):
    basis = replace(standard_basis(g1_curve), base_index=1)
    assert basis.base == -1.0
    assert np.all(abel_integral(g1_curve, -1.0, 0.0, basis=basis) == 0)
    t = 0.09
    v = complex(g1_curve.sheet_sqrt(t))
    assert np.max(np.abs(abel_integral(g1_curve, t, v, basis=basis))) > 0


def test_abel_uses_quadrature_settings(g1_curve):
    t = (0.7 + 0.2j) ** 2
    v = complex(g1_curve.sheet_sqrt(t))
    low = abel_integral(g1_curve, t, v, quad_order=64, tolerance=1e-10)
    high = abel_integral(g1_curve, t, v, quad_order=256, tolerance=1e-10)
    assert np.max(np.abs(low - high)) < 1e-9
    with pytest.raises(QuadratureNoConvergence):
        abel_integral(g1_curve, t, v, quad_order=64, max_order=64)


def test_prym_data_reference_points(g1_data: PrymData):
    # the marked point 0.7 + 0.2i needs order 256 before successive estimates settle
    assert np.all(np.isfinite(g1_data.U))
    assert np.all(np.isfinite(g1_data.V))
