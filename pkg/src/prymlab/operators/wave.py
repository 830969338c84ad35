#!/usr/bin/env python3
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..base import CompatibilityFailure, NonInvertibleLeading, Side
from . import DEFAULT_DEPTH, LEADING_FLOOR, PseudoDiffOp, op_inverse, op_mul
from .grid import ComplexGrid, Window

logger = logging.getLogger(__name__)

#: Largest relative disagreement tolerated between the two propagation routes.
COMPATIBILITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class FormalKSeries:
    """The formal solution ψ(n, m) = kⁿ·C^m·Σ_s ξ_s(n, m)·k^{−s} of Hψ = 0.

    :param coefficients: ξ_0 … ξ_S; the window of ξ_s loses one n-site per level.
    :param complex C: The constant of the lattice equation.
    :param float compatibility: Measured disagreement of the n- and m-routes for ξ_0.
    """

    coefficients: Tuple[ComplexGrid, ...]
    C: complex
    compatibility: float = 0.0

    @property
    def depth(self) -> int:
        return len(self.coefficients) - 1

    @property
    def window(self) -> Window:
        window = self.coefficients[0].window
        for xi in self.coefficients[1:]:
            window = window.intersect(xi.window)
        return window.require("series")

    def __getitem__(self, s: int) -> ComplexGrid:
        return self.coefficients[s]


def _route_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    scale = np.where(scale == 0.0, 1.0, scale)
    return float(np.max(np.abs(lhs - rhs) / scale))


def formal_wave_solution(
    u: ComplexGrid,
    v0: ComplexGrid,
    depth: int = DEFAULT_DEPTH,
    C: complex = 1.0,
    lax: Optional[Sequence[ComplexGrid]] = None,
    tolerance: float = COMPATIBILITY_TOLERANCE,
) -> FormalKSeries:
    """Solves Hψ = 0 order by order in k for H = T₁T₂ − u(T₁ − T₂) − 1.

    ξ₀ is propagated along the first row by v₀·t₁ξ₀ = ξ₀ and then in m by
    t₂ξ₀ = (t₁⁻¹u)·ξ₀/C; the first relation must then hold on every row.
    Each higher ξ_{s+1} is propagated in m by

    C·ξ_{s+1}(n+1, m+1) = u·ξ_{s+1}(n+1, m) − C·u·ξ_s(n, m+1) + ξ_s(n, m)

    from first-row values proportional to ξ₀, normalized to 1 at the corner
    of its window.

    :param ComplexGrid u: The potential.
    :param ComplexGrid v0: Leading Lax coefficient.
    :param int depth: Last computed order S.
    :param complex C: The constant of the lattice equation.
    :param lax: Optional coefficients v_0 … v_S of 𝓛 = Σ v_s T₁^{1−s} to
        cross-check the n-route of every order against.
    :param float tolerance: Largest accepted route disagreement.

    :return: ξ_0 … ξ_S.
    :rtype: FormalKSeries

    :raises CompatibilityFailure: The routes disagree beyond ``tolerance``.
    :raises NonInvertibleLeading: v₀ or u vanishes on the window.
    """
    C = complex(C)
    m_lo = max(u.window.m_lo, v0.window.m_lo)
    m_hi = min(u.window.m_hi + 1, v0.window.m_hi)
    n_lo = max(v0.window.n_lo, u.window.n_lo + 1)
    n_hi = min(v0.window.n_hi + 1, u.window.n_hi + 1)
    window = Window(n_lo, n_hi, m_lo, m_hi).require("wave solution")
    if v0.min_abs() < LEADING_FLOOR:
        raise NonInvertibleLeading(f"v0 drops to {v0.min_abs():.3e}")

    def u_block(lo: int, hi: int, m: int) -> np.ndarray:
        return u.restrict(Window(lo, hi, m, m)).values[:, 0]

    rows = m_hi - m_lo + 1
    xi0 = np.zeros(window.shape, dtype=np.complex128)
    xi0[0, 0] = 1.0
    first_v0 = v0.restrict(Window(n_lo, n_hi - 1, m_lo, m_lo)).values[:, 0]
    for k, v in enumerate(first_v0):
        xi0[k + 1, 0] = xi0[k, 0] / v
    for r in range(rows - 1):
        xi0[:, r + 1] = u_block(n_lo - 1, n_hi - 1, m_lo + r) * xi0[:, r] / C

    inner = v0.restrict(Window(n_lo, n_hi - 1, m_lo, m_hi)).values
    compatibility = _route_residual(inner * xi0[1:, :], xi0[:-1, :])
    if compatibility > tolerance:
        raise CompatibilityFailure(f"xi_0 routes disagree by {compatibility:.3e}")
    logger.debug(f"xi_0 on {window}, route disagreement {compatibility:.3e}")

    levels: List[np.ndarray] = [xi0]
    for s in range(depth):
        prev = levels[-1]
        offset = s + 1
        if offset > n_hi - n_lo:
            raise CompatibilityFailure(f"Window {window} too narrow for order {s + 1}")
        nxt = np.zeros((n_hi - n_lo + 1 - offset, rows), dtype=np.complex128)
        nxt[:, 0] = xi0[offset:, 0] / xi0[offset, 0]
        for r in range(rows - 1):
            # sites n = n_lo + s … n_hi − 1 feed n + 1
            coef = u_block(n_lo + s, n_hi - 1, m_lo + r)
            nxt[:, r + 1] = (coef * nxt[:, r] - C * coef * prev[:-1, r + 1] + prev[:-1, r]) / C
        levels.append(nxt)

    coefficients = tuple(
        ComplexGrid(Window(n_lo + s, n_hi, m_lo, m_hi), level) for s, level in enumerate(levels)
    )
    series = FormalKSeries(coefficients, C, compatibility)
    if lax is not None:
        residual = lax_route_residual(series, lax)
        if residual > tolerance:
            raise CompatibilityFailure(f"Lax route disagrees with the T2 route by {residual:.3e}")
    return series


def lax_route_residual(series: FormalKSeries, lax: Sequence[ComplexGrid]) -> float:
    """Relative residual of v₀·t₁ξ_p − ξ_p + Σ_{i≥1} v_i·t₁^{1−i}ξ_{p−i} over all orders."""
    worst = 0.0
    for p in range(min(series.depth, len(lax) - 1) + 1):
        terms = [lax[0] * series[p].shift(1), -series[p]]
        terms += [lax[i] * series[p - i].shift(1 - i) for i in range(1, p + 1)]
        worst = max(worst, _terms_residual(terms))
    return worst


def _terms_residual(terms: Sequence[ComplexGrid]) -> float:
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    window = total.window
    scale = np.max([np.abs(t.restrict(window).values) for t in terms], axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    return float(np.max(np.abs(total.values) / scale))


def h_residual(series: FormalKSeries, u: ComplexGrid) -> float:
    """Largest relative coefficient of Hψ through order k^{−S+1}.

    The coefficient of kⁿC^m·k^{−s} is
    C·t₁t₂ξ_{s+1} − u·t₁ξ_{s+1} + C·u·t₂ξ_s − ξ_s with ξ_{−1} = 0.
    """
    C = series.C
    worst = 0.0
    for s in range(-1, series.depth):
        upper = series[s + 1]
        terms = [C * upper.shift(1, 1), -(u * upper.shift(1, 0))]
        if s >= 0:
            terms += [C * (u * series[s].shift(0, 1)), -series[s]]
        worst = max(worst, _terms_residual(terms))
    return worst


def wave_operator(series: FormalKSeries) -> Tuple[PseudoDiffOp, PseudoDiffOp]:
    """Φ = Σ_s ξ_s T₁^{−s}, so that ψ = Φ kⁿC^m, and its inverse to the same order.

    :raises NonInvertibleLeading: |ξ₀| drops below 1e-12.
    """
    window = series.window
    phi = PseudoDiffOp(
        {(-s, 0): xi.restrict(window) for s, xi in enumerate(series.coefficients)},
        window,
        Side.PLUS,
        -series.depth,
    )
    return phi, op_inverse(phi)


def lax_operator(series: FormalKSeries) -> PseudoDiffOp:
    """𝓛 = Φ T₁ Φ⁻¹ = Σ_s v_s T₁^{1−s}, for which ψ is an eigenvector with eigenvalue k."""
    phi, phi_inverse = wave_operator(series)
    shift = PseudoDiffOp.monomial(phi.window, 1)
    return op_mul(op_mul(phi, shift), phi_inverse)


def eigen_residual(calL: PseudoDiffOp, series: FormalKSeries) -> float:
    """Relative residual of 𝓛ψ − kψ, order by order: Σ_i l_i·t₁^i ξ_{i−1+p} − ξ_p."""
    worst = 0.0
    for p in range(series.depth + 1):
        terms = [-series[p]]
        for i in calL.t1_exponents():
            q = i - 1 + p
            if 0 <= q <= series.depth:
                terms.append(calL.coefficient(i) * series[q].shift(i))
        worst = max(worst, _terms_residual(terms))
    return worst
