#!/usr/bin/env python3
import logging
from functools import cached_property
from typing import Any, Sequence

import mpmath  # type: ignore
import numpy as np

from ..base import BadDegree, NotSquarefree, RamifiedAtZero
from ..theta import ComplexArray

logger = logging.getLogger(__name__)


class DoubleCoverCurve:
    """
    DoubleCoverCurve API

    The unramified double cover Γ: y² = h(x²) with involution σ(x, y) = (−x, −y),
    handled through its parity quotient E′: v² = h(t), t = x², v = y.

    Branch points of E′ are sorted by real part, ties by imaginary part. Cut k
    joins b_{2k−1} and b_{2k}; the holomorphic square root off the cuts is the
    product of the per-cut factors (t − m_k)·sqrt(1 − ρ_k²/(t − m_k)²), with m_k
    the midpoint and ρ_k the half-length of cut k. Sheet 1 is that root, signed
    so it equals the principal root of h at the anchor t₀ = max Re b + 1.
    """

    def __init__(self, h_coeffs: ComplexArray, branch_points: ComplexArray):
        #: Coefficients of h, highest degree first.
        self.h_coeffs = h_coeffs
        self.branch_points = branch_points
        self.midpoints = 0.5 * (branch_points[0::2] + branch_points[1::2])
        self.radii = 0.5 * (branch_points[1::2] - branch_points[0::2])

    @property
    def g(self) -> int:
        """Dimension of the Prym variety, the genus of E′."""
        return len(self.branch_points) // 2 - 1

    @property
    def degree(self) -> int:
        return len(self.branch_points)

    @property
    def lead(self) -> complex:
        return complex(self.h_coeffs[0])

    def h(self, t: Any) -> Any:
        return np.polyval(self.h_coeffs, t)

    @cached_property
    def anchor(self) -> float:
        return float(np.max(self.branch_points.real)) + 1.0

    def cut_factor(self, k: int, t: Any) -> Any:
        shifted = np.asarray(t, dtype=np.complex128) - self.midpoints[k]
        return shifted * np.sqrt(1.0 - (self.radii[k] / shifted) ** 2)

    def product_sqrt(self, t: Any) -> Any:
        value = np.sqrt(self.lead) * np.ones_like(np.asarray(t, dtype=np.complex128))
        for k in range(len(self.midpoints)):
            value = value * self.cut_factor(k, t)
        return value

    @cached_property
    def sheet_sign(self) -> float:
        reference = np.sqrt(complex(self.h(self.anchor)))
        return 1.0 if abs(self.product_sqrt(self.anchor) - reference) < abs(reference) else -1.0

    def sheet_sqrt(self, t: Any) -> Any:
        """Sheet-1 value of v at t (off the cuts)."""
        return self.sheet_sign * self.product_sqrt(t)

    def scaled(self, factor: complex) -> "DoubleCoverCurve":
        """The curve with every branch point multiplied by ``factor``."""
        return from_roots(self.branch_points * factor, self.lead)

    def __repr__(self) -> str:
        return f"DoubleCoverCurve(g={self.g}, branch_points={self.branch_points.tolist()!r})"


def _polish_roots(coeffs: ComplexArray, roots: ComplexArray, steps: int = 80, dps: int = 40) -> ComplexArray:
    """Newton steps at ``dps`` digits; the copies of a multiple root collapse onto it."""
    polished = []
    with mpmath.workdps(dps):
        c = [mpmath.mpc(complex(a)) for a in coeffs]
        for root in roots:
            z = mpmath.mpc(complex(root))
            for _ in range(steps):
                value, slope = mpmath.polyval(c, z, derivative=True)
                if slope == 0:
                    break
                z = z - value / slope
            polished.append(complex(z))
    return np.asarray(polished, dtype=np.complex128)


def sort_branch_points(roots: Any) -> ComplexArray:
    roots = np.asarray(roots, dtype=np.complex128)
    order = np.lexsort((roots.imag, np.round(roots.real, 12)))
    return roots[order]


def build_cover(h_coeffs: Sequence[complex], squarefree_tolerance: float = 1e-8) -> DoubleCoverCurve:
    """Builds the double cover y² = h(x²) from the coefficients of h.

    :param h_coeffs: Coefficients of h, highest degree first.
    :param float squarefree_tolerance: Smallest accepted distance between two roots.

    :return: The validated curve.
    :rtype: prymlab.prym.DoubleCoverCurve

    :raises BadDegree: The degree is not 4 or 6, or the leading coefficient vanishes.
    :raises RamifiedAtZero: |h(0)| ≤ 1e-10, so σ would have fixed points.
    :raises NotSquarefree: Two roots are closer than ``squarefree_tolerance``.
    """
    coeffs = np.asarray(h_coeffs, dtype=np.complex128)
    if coeffs.ndim != 1 or len(coeffs) - 1 not in (4, 6):
        raise BadDegree(f"h must have degree 4 or 6, got {len(coeffs) - 1}")
    if coeffs[0] == 0:
        raise BadDegree("Leading coefficient of h vanishes")
    if abs(coeffs[-1]) <= 1e-10:
        raise RamifiedAtZero(f"|h(0)| = {abs(coeffs[-1]):.3e}; the involution would have fixed points")
    roots = _polish_roots(coeffs, np.roots(coeffs).astype(np.complex128))
    distances = np.abs(roots[:, None] - roots[None, :]) + np.diag(np.full(len(roots), np.inf))
    if np.min(distances) <= squarefree_tolerance:
        raise NotSquarefree(f"Roots of h are {np.min(distances):.3e} apart")
    curve = DoubleCoverCurve(coeffs, sort_branch_points(roots))
    logger.debug(f"Built cover: {curve}")
    return curve


def from_roots(roots: Sequence[complex], lead: complex = 1.0) -> DoubleCoverCurve:
    """Builds the cover whose h is ``lead`` times the monic polynomial with the given roots."""
    roots_arr = np.asarray(roots, dtype=np.complex128)
    curve = build_cover(lead * np.poly(roots_arr))
    # exact input roots rather than their recomputed images
    return DoubleCoverCurve(curve.h_coeffs, sort_branch_points(roots_arr))
