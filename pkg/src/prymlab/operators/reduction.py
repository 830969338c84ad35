#!/usr/bin/env python3
import logging
from typing import Dict, List, Optional

from ..base import Direction, Side
from . import DEFAULT_DEPTH, Exponent, PseudoDiffOp, op_inverse, op_mul
from .grid import ComplexGrid

logger = logging.getLogger(__name__)


def schroedinger_operator(u: ComplexGrid) -> PseudoDiffOp:
    """H = T₁T₂ − u(T₁ − T₂) − 1."""
    one = ComplexGrid.constant(u.window, 1.0)
    return PseudoDiffOp({(1, 1): one, (1, 0): -u, (0, 1): u, (0, 0): -one}, u.window)


def shift_m(op: PseudoDiffOp, j: int) -> PseudoDiffOp:
    """t₂^j applied to every coefficient."""
    return PseudoDiffOp(
        {key: grid.shift(0, j) for key, grid in op.items()},
        op.window.shifted(0, j),
        op.side,
        op.truncation,
    )


def t2_series(u: ComplexGrid, side: Side, depth: int = DEFAULT_DEPTH) -> PseudoDiffOp:
    """The one-variable series E with T₂ ≡ E modulo the left ideal generated by H.

    E = (T₁ + u)⁻¹(uT₁ + 1), expanded in T₁⁻¹ on ``Side.PLUS`` and in T₁ on
    ``Side.MINUS``.
    """
    one = ComplexGrid.constant(u.window, 1.0)
    e: Dict[int, ComplexGrid] = {}
    if side == Side.PLUS:
        e[0] = u.shift(-1)
        e[-1] = (one - u * e[0]).shift(-1)
        for k in range(2, depth + 1):
            e[-k] = (-(u * e[-k + 1])).shift(-1)
        truncation = -depth
    else:
        e[0] = 1.0 / u
        e[1] = (u - e[0].shift(1)) / u
        for k in range(2, depth + 1):
            e[k] = -e[k - 1].shift(1) / u
        truncation = depth
    window = u.window
    for grid in e.values():
        window = window.intersect(grid.window)
    return PseudoDiffOp({(k, 0): g for k, g in e.items()}, window.require("T2 series"), side, truncation)


def _t2_powers(u: ComplexGrid, side: Side, lowest: int, highest: int, depth: int) -> Dict[int, PseudoDiffOp]:
    E = t2_series(u, side, depth)
    powers = {0: PseudoDiffOp.identity(E.window)}
    if highest >= 1:
        powers[1] = E
    for j in range(2, highest + 1):
        powers[j] = op_mul(shift_m(powers[j - 1], 1), E)
    if lowest <= -1:
        G = op_inverse(shift_m(E, -1))
        powers[-1] = G
        for j in range(2, -lowest + 1):
            powers[-j] = op_mul(shift_m(powers[-j + 1], -1), G)
    return powers


def _add(terms: Dict[Exponent, ComplexGrid], key: Exponent, grid: ComplexGrid):
    terms[key] = terms[key] + grid if key in terms else grid


def _cross_reduce(D: PseudoDiffOp, u: ComplexGrid) -> PseudoDiffOp:
    inv = 1.0 / u
    terms = D.terms
    window = D.window
    while True:
        mixed = [key for key in terms if key[0] != 0 and key[1] != 0]
        if not mixed:
            break
        i, j = max(mixed, key=lambda key: (abs(key[0]) + abs(key[1]), key))
        a = terms.pop((i, j))
        if i > 0 and j > 0:
            # T₁T₂ ≡ u(T₁ − T₂) + 1
            w = a * u.shift(i - 1, j - 1)
            new = [((i, j - 1), w), ((i - 1, j), -w), ((i - 1, j - 1), a)]
        elif i < 0 and j < 0:
            # T₁⁻¹T₂⁻¹ ≡ 1 + (t₁⁻¹t₂⁻¹u)(T₁⁻¹ − T₂⁻¹)
            w = a * u.shift(i, j)
            new = [((i, j + 1), w), ((i + 1, j), -w), ((i + 1, j + 1), a)]
        elif i > 0:
            # T₁T₂⁻¹ ≡ (1/t₂⁻¹u)(T₁ − T₂⁻¹) + 1
            w = a * inv.shift(i - 1, j)
            new = [((i, j + 1), w), ((i - 1, j), -w), ((i - 1, j + 1), a)]
        else:
            # T₁⁻¹T₂ ≡ 1 + (1/t₁⁻¹u)(T₁⁻¹ − T₂)
            w = a * inv.shift(i, j - 1)
            new = [((i, j - 1), w), ((i + 1, j), -w), ((i + 1, j - 1), a)]
        for key, grid in new:
            window = window.intersect(grid.window)
            _add(terms, key, grid)
    return PseudoDiffOp(terms, window.require("cross normal form"))


def reduce_mod_H(
    D: PseudoDiffOp,
    u: ComplexGrid,
    direction: Direction = Direction.PLUS,
    depth: int = DEFAULT_DEPTH,
) -> PseudoDiffOp:
    """Normal form of D modulo the left ideal generated by H = T₁T₂ − u(T₁ − T₂) − 1.

    ``Direction.PLUS`` and ``Direction.MINUS`` eliminate T₂ completely through
    the series of ``t2_series()``, giving a one-variable series on that side.
    ``Direction.CROSS`` rewrites every mixed monomial T₁^i T₂^j, i·j ≠ 0, until
    only Σ a_i T₁^i + Σ_{j≠0} b_j T₂^j is left; the result is exact.

    :param PseudoDiffOp D: The operator.
    :param ComplexGrid u: The potential of H.
    :param prymlab.base.Direction direction: Normal form to produce.
    :param int depth: Number of orders of the T₂ series.

    :return: The normal form.
    :rtype: PseudoDiffOp

    :raises WindowExhausted: The shifts leave no common site.
    """
    if direction == Direction.CROSS:
        return _cross_reduce(D, u)
    side = Side(int(direction))
    js = [j for _, j in D.terms] or [0]
    powers = _t2_powers(u, side, min(js), max(js), depth)
    parts: List[PseudoDiffOp] = []
    for (i, j), a in D.items():
        monomial = PseudoDiffOp.monomial(a.window, i, 0, a)
        parts.append(op_mul(monomial, powers[j]))
    if not parts:
        return PseudoDiffOp.zero(D.window, side, D.truncation)
    result = parts[0]
    for part in parts[1:]:
        result = result + part
    if not D.exact:
        # an unknown tail of D reaches the result through T₂ powers of degree zero
        truncation = _tighter(result.truncation, D.truncation, side)
        result = result.with_truncation(truncation)
    return result


def _tighter(a: Optional[int], b: Optional[int], side: Side) -> Optional[int]:
    known = [t for t in (a, b) if t is not None]
    if not known:
        return None
    return max(known) if side == Side.PLUS else min(known)
