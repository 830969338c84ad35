#!/usr/bin/env python3
import json
from typing import Sequence, Tuple

import numpy as np
import pytest

from prymlab.base import CompatibilityFailure, Direction, NonInvertibleLeading, RankDeficientFit, Side, WindowExhausted
from prymlab.operators import hierarchy
from prymlab.operators import (
    PseudoDiffOp,
    op_adjoint,
    op_apply,
    op_difference,
    op_inverse,
    op_mul,
    op_residue,
    residue_pairing,
    shift_operator,
    shift_operator_inverse,
)
from prymlab.operators.grid import ComplexGrid, Window, relative_difference
from prymlab.operators.hierarchy import (
    adjoint_residual,
    ansatz_fields,
    build_Lj,
    conjugated_negative_residual,
    h0_grid,
    hs_solve,
    lax_from_coefficients,
    nnov7_fit,
    nv_structure_check,
)
from prymlab.operators.reduction import reduce_mod_H, schroedinger_operator, t2_series
from prymlab.operators.wave import eigen_residual, formal_wave_solution, h_residual, lax_operator

WINDOW = Window(-20, 20, 0, 6)
TAU_WINDOW = Window(-22, 22, 0, 5)
WIDE_TAU_WINDOW = Window(-40, 40, 0, 5)


def _grid(gen: np.random.Generator, window: Window = WINDOW) -> ComplexGrid:
    return ComplexGrid(window, gen.normal(size=window.shape) + 1j * gen.normal(size=window.shape))


def _operator(gen: np.random.Generator, exponents: Sequence[Tuple[int, int]]) -> PseudoDiffOp:
    return PseudoDiffOp({key: _grid(gen) for key in exponents}, WINDOW)


def _relative(D1: PseudoDiffOp, D2: PseudoDiffOp) -> float:
    return op_difference(D1, D2) / max(D1.max_abs(), D2.max_abs())


def _synthetic_tau(window: Window = TAU_WINDOW) -> ComplexGrid:
    return ComplexGrid.from_function(
        window, lambda n, m: 2 + np.cos(0.3 * n + 0.2 * m) + 0.5j * np.sin(0.17 * n - 0.4 * m)
    )


def _potential() -> ComplexGrid:
    return ComplexGrid.from_function(WINDOW, lambda n, m: 0.6 + 0.2 * np.cos(0.3 * n) + 0.1j * np.sin(0.2 * m))


def test_grid_shift_moves_window(rng: np.random.Generator):
    f = _grid(rng)
    g = f.shift(2, -1)
    assert g.window == Window(-22, 18, 1, 7)
    assert g.at(-3, 4) == f.at(-1, 3)
    with pytest.raises(IndexError):
        f.at(21, 0)


def test_composition_matches_application(rng: np.random.Generator):
    A = _operator(rng, [(1, 0), (0, 1), (-1, 0), (0, 0)])
    B = _operator(rng, [(1, 1), (-1, 0), (0, -1)])
    psi = _grid(rng)
    composed = op_apply(op_mul(A, B), psi)
    nested = op_apply(A, op_apply(B, psi))
    assert relative_difference(composed, nested) < 1e-12


def test_ring_axioms(rng: np.random.Generator):
    A = _operator(rng, [(1, 0), (0, 1), (-1, 0), (0, 0)])
    B = _operator(rng, [(1, 1), (-1, 0), (0, -1)])
    C = _operator(rng, [(2, 0), (0, 0)])
    assert _relative(op_mul(op_mul(A, B), C), op_mul(A, op_mul(B, C))) < 1e-12
    assert _relative(op_mul(A, B + C), op_mul(A, B) + op_mul(A, C)) < 1e-12
    assert _relative((A + B) @ C, A @ C + B @ C) < 1e-12


def test_adjoint(rng: np.random.Generator):
    A = _operator(rng, [(1, 0), (0, 1), (-2, 0)])
    B = _operator(rng, [(1, 1), (0, 0), (-1, 0)])
    star = op_adjoint(A)
    assert star.side == Side.MINUS
    assert op_difference(op_adjoint(star), A) == 0.0
    assert _relative(op_adjoint(op_mul(A, B)), op_mul(op_adjoint(B), op_adjoint(A))) < 1e-12


def test_residue_pairing(rng: np.random.Generator):
    a, d = _grid(rng), _grid(rng)
    monomials = residue_pairing(PseudoDiffOp.monomial(WINDOW, 2, coefficient=a), PseudoDiffOp.monomial(WINDOW, -2, coefficient=d))
    assert relative_difference(monomials, a.shift(-2) * d) == 0.0

    D1 = _operator(rng, [(2, 0), (1, 0), (0, 0), (-1, 0)])
    D2 = _operator(rng, [(1, 0), (-1, 0), (-2, 0)])
    assert relative_difference(residue_pairing(D1, D2), op_residue(op_mul(D2, D1))) < 1e-12


def test_residue_errors(rng: np.random.Generator):
    with pytest.raises(ValueError):
        op_residue(_operator(rng, [(0, 1), (0, 0)]))
    one = ComplexGrid.constant(WINDOW, 1.0)
    with pytest.raises(ValueError):
        op_residue(PseudoDiffOp({(2, 0): one}, WINDOW, Side.PLUS, 1))


@pytest.mark.parametrize("side", [Side.PLUS, Side.MINUS])
def test_shift_operator_inverse(side: Side):
    delta = shift_operator(WINDOW)
    product = op_mul(delta, shift_operator_inverse(WINDOW, side, 5))
    assert not product.exact
    assert op_difference(product, PseudoDiffOp.identity(WINDOW)) == 0.0


def test_inverse(rng: np.random.Generator):
    lead = ComplexGrid(WINDOW, rng.uniform(1.5, 2.5, WINDOW.shape))
    D = PseudoDiffOp({(2, 0): lead, (1, 0): _grid(rng) * 0.3, (0, 0): _grid(rng) * 0.3}, WINDOW)
    inverse = op_inverse(D, Side.PLUS, 6)
    assert inverse.max_t1() == -2
    assert inverse.truncation == -8
    identity = PseudoDiffOp.identity(WINDOW)
    assert op_difference(op_mul(D, inverse), identity) < 1e-12
    assert op_difference(op_mul(inverse, D), identity) < 1e-12


def test_inverse_errors():
    with pytest.raises(NonInvertibleLeading):
        op_inverse(PseudoDiffOp.monomial(WINDOW, 1, coefficient=0.0))
    far = Window(0, 3, 0, 0)
    with pytest.raises(WindowExhausted):
        op_mul(PseudoDiffOp.monomial(far, 10), PseudoDiffOp.monomial(far, 0))


def test_values_outside_window_are_never_read(rng: np.random.Generator):
    wide = Window(-21, 21, -1, 7)
    poisoned = _grid(rng, wide).values.copy()
    poisoned[0, :] = poisoned[-1, :] = np.nan
    poisoned[:, 0] = poisoned[:, -1] = np.nan
    grid = ComplexGrid(wide, poisoned)
    A = PseudoDiffOp({(1, 0): grid, (0, 1): grid, (-1, -1): grid}, WINDOW)
    B = _operator(rng, [(1, 0), (0, -1)])
    assert A.window == WINDOW
    for D in (op_mul(A, B), op_mul(B, A), op_adjoint(A)):
        assert all(c.is_finite() for _, c in D.items())
    assert op_apply(A, _grid(rng)).is_finite()


def test_operator_json(rng: np.random.Generator):
    D = op_mul(_operator(rng, [(1, 0), (0, 0)]), shift_operator_inverse(WINDOW, Side.PLUS, 3))
    restored = PseudoDiffOp.from_json(json.loads(json.dumps(D.to_json())))
    assert restored.side == D.side
    assert restored.truncation == D.truncation
    assert restored.window == D.window
    assert op_difference(restored, D) == 0.0


@pytest.mark.parametrize("side", [Side.PLUS, Side.MINUS])
def test_t2_series(side: Side):
    u = _potential()
    E = t2_series(u, side, 6)
    lhs = op_mul(PseudoDiffOp({(1, 0): ComplexGrid.constant(WINDOW, 1.0), (0, 0): u}, WINDOW), E)
    rhs = PseudoDiffOp({(1, 0): u, (0, 0): ComplexGrid.constant(WINDOW, 1.0)}, WINDOW)
    assert _relative(lhs, rhs) < 1e-12


def test_reduce_schroedinger_operator():
    u = _potential()
    H = schroedinger_operator(u)
    assert reduce_mod_H(H, u, Direction.CROSS).max_abs() == 0.0


def test_reduce_left_multiples(rng: np.random.Generator):
    u = _potential()
    H = schroedinger_operator(u)
    cross = op_mul(_operator(rng, [(1, 0), (0, 1), (-1, 0), (1, 1), (-1, -1), (2, -1)]), H)
    assert reduce_mod_H(cross, u, Direction.CROSS).max_abs() < 1e-12 * cross.max_abs()
    plus = op_mul(_operator(rng, [(0, 0), (1, 0), (0, 1), (-1, 0)]), H)
    reduced = reduce_mod_H(plus, u, Direction.PLUS, 6)
    assert not reduced.exact
    assert reduced.max_abs() < 1e-10 * plus.max_abs()


def test_cross_normal_form_is_idempotent(rng: np.random.Generator):
    u = _potential()
    D = _operator(rng, [(2, 1), (1, -1), (-1, 2), (0, 0), (0, -2)])
    once = reduce_mod_H(D, u, Direction.CROSS)
    assert all(i == 0 or j == 0 for i, j in once.terms)
    assert op_difference(reduce_mod_H(once, u, Direction.CROSS), once) == 0.0


def test_constant_tau_wave_solution():
    tau = ComplexGrid.constant(TAU_WINDOW, 1.7 - 0.2j)
    u, v0 = ansatz_fields(tau, 1.0)
    series = formal_wave_solution(u, v0, 4, 1.0)
    assert series.compatibility < 1e-14
    for xi in series.coefficients:
        assert np.allclose(xi.values, 1.0, rtol=0, atol=1e-14)

    u, v0 = ansatz_fields(tau, 1.3)
    series = formal_wave_solution(u, v0, 4, 1.3)
    assert np.allclose(series[0].values, 1.0, rtol=0, atol=1e-14)
    assert h_residual(series, u) < 1e-13


def test_synthetic_tau_wave_solution():
    tau = _synthetic_tau()
    C = 1.2 + 0.1j
    u, v0 = ansatz_fields(tau, C)
    h0 = h0_grid(u, v0)
    assert h0.max_abs() < 1e-12 * (v0 * u.shift(-1)).max_abs()

    series = formal_wave_solution(u, v0, 4, C)
    assert series.compatibility < 1e-12
    assert h_residual(series, u) < 1e-10
    calL = lax_operator(series)
    assert relative_difference(calL.coefficient(1), v0) < 1e-12
    assert eigen_residual(calL, series) < 1e-9


@pytest.mark.parametrize("j", [1, 2, 3])
def test_constant_tau_flows(j: int):
    tau = ComplexGrid.constant(WIDE_TAU_WINDOW, 1.0)
    u, v0 = ansatz_fields(tau, 1.1)
    calL = lax_from_coefficients(hs_solve(u, v0, 4))
    assert all(v.max_abs() == 0.0 for (i, _), v in calL.items() if i < 1)
    L = build_Lj(calL, j)
    assert L.exact
    assert adjoint_residual(L, 4) == 0.0
    assert conjugated_negative_residual(calL, L, j, 4) == 0.0


def test_build_lj_rejects_inconsistent_decomposition(monkeypatch):
    tau = ComplexGrid.constant(WIDE_TAU_WINDOW, 1.0)
    u, v0 = ansatz_fields(tau, 1.1)
    calL = lax_from_coefficients(hs_solve(u, v0, 4))
    decompose = hierarchy.lj_decomposition

    def corrupted(op: PseudoDiffOp, j: int):
        f = decompose(op, j)
        f[0] = f[0] + 1e-6
        return f

    monkeypatch.setattr(hierarchy, "lj_decomposition", corrupted)
    with pytest.raises(CompatibilityFailure):
        build_Lj(calL, 2)
    assert build_Lj(calL, 2, tolerance=1e-3).exact


def test_constant_tau_structure_check():
    tau = ComplexGrid.constant(TAU_WINDOW, 1.0)
    report = nv_structure_check(tau, 1.1, 1, 4, 1e-9)
    assert report.passed
    assert report.sample_count > 0
    assert float(report.notes["b_mismatch"]) == 0.0


def test_synthetic_tau_structure_check_h0():
    report = nv_structure_check(_synthetic_tau(), 1.2 + 0.1j, 1, 4, 1e-9)
    assert report.sample_count > 0
    assert float(report.notes["h0"]) < 1e-12


def _fit_samples(gen: np.random.Generator, count: int, V: Sequence[complex], zeta: complex):
    window = Window(0, 5, 0, 3)
    F1s, derivatives = [], []
    for _ in range(count):
        D = [_grid(gen, window) for _ in V]
        offset = gen.normal(size=window.shape[0])
        parity = np.fromfunction(lambda i, k: (-1.0) ** (i + k), window.shape)
        values = offset[:, None] + zeta * parity + sum(v * d.values for v, d in zip(V, D))
        F1s.append(ComplexGrid(window, values))
        derivatives.append(D)
    return F1s, derivatives


def test_direction_fit(rng: np.random.Generator):
    V = (0.4 - 0.2j, 1.1 + 0.3j)
    F1s, derivatives = _fit_samples(rng, 9, V, 0.25j)
    fit = nnov7_fit(F1s, derivatives, min_samples=3 * 2 + 3)
    assert fit.residual < 1e-10
    assert np.allclose(fit.V, V, rtol=0, atol=1e-10)
    assert abs(fit.alternating - 0.25j) < 1e-10
    assert fit.unknowns == 9 * 6 + 1 + 2

    noise = [_grid(rng, F.window) for F in F1s]
    assert nnov7_fit(noise, derivatives).residual > 1e-2


def test_direction_fit_rank_deficient(rng: np.random.Generator):
    F1s, derivatives = _fit_samples(rng, 3, (0.4, 1.1), 0.0)
    with pytest.raises(RankDeficientFit):
        nnov7_fit(F1s, derivatives, min_samples=9)
    flat = [[ComplexGrid.constant(F.window, 1.0), D[1]] for F, D in zip(F1s, derivatives)]
    with pytest.raises(RankDeficientFit):
        nnov7_fit(F1s, flat)


def test_g1_nv_check(g1_lab):
    report = g1_lab.verify("nv")
    assert report.passed
    assert "direction_fit_residual" in report.notes
