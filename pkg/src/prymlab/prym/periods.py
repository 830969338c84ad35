#!/usr/bin/env python3
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg, special  # type: ignore

from ..base import QuadratureNoConvergence, SingularAPeriods
from ..theta import ComplexArray, PeriodMatrix, validate_period_matrix
from . import DoubleCoverCurve

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 64
DEFAULT_MAX_ORDER = 4096
DEFAULT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class CycleBasis:
    """
    CycleBasis API

    Homology basis of E′ in the hyperelliptic convention. Indices refer to
    ``branch_points``; a-cycle k encircles the cut ``cuts[k]`` and b-cycle k is
    twice the sum of the gap integrals listed in ``b_gaps[k]``, gap j running
    from b_{2j} to b_{2j+1} (1-based). The Abel base point is
    ``branch_points[base_index]``.
    """

    branch_points: ComplexArray
    cuts: Tuple[Tuple[int, int], ...]
    b_gaps: Tuple[Tuple[int, ...], ...]
    base_index: int = 0

    @property
    def g(self) -> int:
        return len(self.cuts)

    @property
    def base(self) -> complex:
        return complex(self.branch_points[self.base_index])

    def check(self, curve: DoubleCoverCurve) -> None:
        """Rejects a basis that does not belong to the cut structure of ``curve``.

        :raises ValueError: Different branch points, or cuts that are not the curve's square-root cuts.
        """
        if len(self.branch_points) != curve.degree or np.max(np.abs(self.branch_points - curve.branch_points)) > 0:
            raise ValueError("Basis branch points differ from the curve's ordered branch points")
        if len(self.cuts) != curve.g or len(self.b_gaps) != curve.g:
            raise ValueError(f"Basis has {len(self.cuts)} a-cycles and {len(self.b_gaps)} b-cycles, expected {curve.g}")
        for k, (lo, hi) in enumerate(self.cuts):
            if lo % 2 or hi != lo + 1 or not 0 <= lo < curve.degree:
                raise ValueError(f"a-cycle {k} encircles ({lo}, {hi}), which is not a cut of the curve")
        for k, gaps in enumerate(self.b_gaps):
            if not gaps or any(not 0 <= j < curve.g for j in gaps):
                raise ValueError(f"b-cycle {k} uses gaps {gaps} outside 0 … {curve.g - 1}")
        if not 0 <= self.base_index < curve.degree:
            raise ValueError(f"Base index {self.base_index} out of range")


def standard_basis(curve: DoubleCoverCurve) -> CycleBasis:
    """a_k around {b_{2k−1}, b_{2k}}, b_k through the gaps k … g, based at b₁.

    Intermediate cuts cancel along b_k because it leaves cut k on sheet 1 and
    returns on sheet 2, which gives the canonical intersection pattern.
    """
    g = curve.g
    return CycleBasis(
        branch_points=curve.branch_points,
        cuts=tuple((2 * k, 2 * k + 1) for k in range(g)),
        b_gaps=tuple(tuple(range(k, g)) for k in range(g)),
    )


def _powers(t: ComplexArray, g: int) -> ComplexArray:
    """Rows t^0 … t^{g−1}, the numerators of the basis differentials t^{k−1}dt/v."""
    return np.stack([t**i for i in range(g)], axis=0)


def cut_integrals(curve: DoubleCoverCurve, k: int, order: int) -> ComplexArray:
    """∫ t^i dt/v over cut k, from b_{2k−1} to b_{2k}, using the boundary value on its left.

    On the cut, t = m_k + ρ_k·x and the cut factor equals iρ_k·sqrt(1 − x²), so
    Gauss–Chebyshev nodes absorb both endpoint singularities.
    """
    x, w = special.roots_chebyt(order)  # type: ignore
    t = curve.midpoints[k] + curve.radii[k] * x
    others = curve.sheet_sign * np.sqrt(curve.lead) * np.ones_like(t, dtype=np.complex128)
    for j in range(len(curve.midpoints)):
        if j != k:
            others = others * curve.cut_factor(j, t)
    integrand = _powers(t, curve.g) / (1j * others)
    return integrand @ w


def gap_integrals(curve: DoubleCoverCurve, j: int, order: int) -> ComplexArray:
    """∫ t^i dt/v along the straight gap from b_{2j} to b_{2j+1} on sheet 1.

    .. note:: The gap must not cross a cut; this holds for real branch points.
    """
    x, w = special.roots_chebyt(order)  # type: ignore
    lo = curve.branch_points[2 * j + 1]
    hi = curve.branch_points[2 * j + 2]
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    t = centre + half * x
    smooth = curve.sheet_sqrt(t) / np.sqrt(1.0 - x**2)
    integrand = _powers(t, curve.g) * half / smooth
    return integrand @ w


def converge(
    compute: Callable[[int], ComplexArray],
    order: int = DEFAULT_ORDER,
    max_order: int = DEFAULT_MAX_ORDER,
    tolerance: float = DEFAULT_TOLERANCE,
    label: str = "quadrature",
) -> ComplexArray:
    """Doubles the quadrature order until two successive estimates differ by less than
    ``tolerance``·max(1, |estimate|).

    :raises QuadratureNoConvergence: ``max_order`` is reached first.
    """
    previous = compute(order)
    while order < max_order:
        order *= 2
        current = compute(order)
        change = float(np.max(np.abs(current - previous)))
        if change < tolerance * max(1.0, float(np.max(np.abs(current)))):
            return current
        logger.debug(f"{label}: order {order} changed by {change:.3e}")
        previous = current
    raise QuadratureNoConvergence(f"{label} did not converge up to order {max_order}")


def period_matrix(
    curve: DoubleCoverCurve,
    basis: Optional[CycleBasis] = None,
    quad_order: int = DEFAULT_ORDER,
    max_order: int = DEFAULT_MAX_ORDER,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Tuple[PeriodMatrix, ComplexArray]:
    """Normalized period matrix of the odd differentials.

    a_k encircles its cut; b_k leaves cut k above the real direction on sheet 1
    and returns below on sheet 2, so intermediate cuts cancel and ∮_{b_k} is
    twice the sum of its gap integrals. The result is Π = (a-periods)⁻¹·(b-periods),
    with the b orientation flipped if that makes Im Π positive definite.

    :param prymlab.prym.DoubleCoverCurve curve: The cover.
    :param prymlab.prym.periods.CycleBasis basis: Cycles to integrate over; ``standard_basis(curve)`` if omitted.
    :param int quad_order: Initial quadrature order.
    :param int max_order: Largest order tried before giving up.
    :param float tolerance: Required relative change between successive orders.

    :return: (Π, a-period matrix) with a-period entry [i, k] = ∮_{a_k} t^i dt/v.
    :rtype: Tuple[prymlab.theta.PeriodMatrix, ComplexArray]

    :raises ValueError: ``basis`` does not belong to ``curve``.
    :raises QuadratureNoConvergence: A period did not converge.
    :raises SingularAPeriods: The a-period matrix has condition number above 1e10.
    """
    basis = basis if basis is not None else standard_basis(curve)
    basis.check(curve)
    g = curve.g

    def compute(order: int) -> ComplexArray:
        a_cols = [2.0 * cut_integrals(curve, lo // 2, order) for lo, _ in basis.cuts]
        gaps = [gap_integrals(curve, j, order) for j in range(g)]
        b_cols = [2.0 * sum(gaps[j] for j in basis.b_gaps[k]) for k in range(g)]
        return np.stack(a_cols + b_cols, axis=1)

    periods = converge(compute, quad_order, max_order, tolerance, label="periods")
    a_periods = periods[:, :g]
    b_periods = periods[:, g:]
    condition = float(np.linalg.cond(a_periods))
    if condition > 1e10:
        raise SingularAPeriods(f"a-period matrix condition number {condition:.3e}")
    Pi = linalg.solve(a_periods, b_periods)  # type: ignore
    if np.all(linalg.eigvalsh(0.5 * (Pi.imag + Pi.imag.T)) < 0):  # type: ignore
        Pi = -Pi
    logger.info(f"Periods computed: g={g}, symmetry residual {np.max(np.abs(Pi - Pi.T)):.2e}")
    return validate_period_matrix(Pi, symmetry_tolerance=1e-8), a_periods
