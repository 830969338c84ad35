#!/usr/bin/env python3
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg, special  # type: ignore

from ..base import PathThroughBranchPoint
from ..theta import ComplexArray
from . import DoubleCoverCurve
from .periods import DEFAULT_MAX_ORDER, DEFAULT_ORDER, DEFAULT_TOLERANCE, CycleBasis, converge, standard_basis

logger = logging.getLogger(__name__)

DETOUR_RADIUS = 1e-2

#: Detour waypoints sit this many detour radii off the obstructed segment.
DETOUR_OFFSET = 5.0

MAX_DETOURS = 16


def _segment_distance(a: complex, b: complex, p: complex) -> Tuple[float, float]:
    """Distance from p to the segment [a, b] and the parameter of the closest point."""
    d = b - a
    s = float(np.clip(((p - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0))
    return abs(p - (a + s * d)), s


def build_path(
    curve: DoubleCoverCurve, end: complex, detour_radius: float = DETOUR_RADIUS, base_index: int = 0
) -> List[complex]:
    """Polyline from the base branch point to ``end`` that keeps away from the other branch points.

    A branch point within ``detour_radius`` of a segment interior adds a
    waypoint offset from it along the segment's left normal.

    :raises PathThroughBranchPoint: ``end`` is a branch point or detours do not clear the path.
    """
    base = complex(curve.branch_points[base_index])
    for b in np.delete(curve.branch_points, base_index):
        if abs(end - b) < 1e-12 * max(1.0, abs(b)):
            raise PathThroughBranchPoint(f"Endpoint {end} is the branch point {b}")
    path = [base, complex(end)]
    for _ in range(MAX_DETOURS):
        blocked = None
        for i in range(len(path) - 1):
            for b in curve.branch_points:
                b = complex(b)
                if abs(b - path[i]) < 1e-14 or abs(b - path[i + 1]) < 1e-14:
                    continue
                distance, s = _segment_distance(path[i], path[i + 1], b)
                if distance < detour_radius and 0.0 < s < 1.0:
                    blocked = (i, b)
                    break
            if blocked is not None:
                break
        if blocked is None:
            return path
        i, b = blocked
        d = path[i + 1] - path[i]
        normal = 1j * d / abs(d)
        path.insert(i + 1, b + DETOUR_OFFSET * detour_radius * normal)
        logger.debug(f"Detour around branch point {b}")
    raise PathThroughBranchPoint(f"Could not route a path to {end} after {MAX_DETOURS} detours")


def _continue(curve: DoubleCoverCurve, ref: complex, v_ref: complex, s: ComplexArray) -> ComplexArray:
    """Analytic continuation of v along the straight segment from ``ref``.

    Exact: each factor sqrt((s − b)/(ref − b)) stays off its branch cut
    unless b lies on the segment.
    """
    value = np.full(np.shape(s), v_ref, dtype=np.complex128)
    for b in curve.branch_points:
        value = value * np.sqrt((s - b) / (ref - b))
    return value


def _clearance(curve: DoubleCoverCurve, a: complex, b: complex) -> float:
    return min(_segment_distance(a, b, complex(p))[0] for p in curve.branch_points)


def _path_integral(curve: DoubleCoverCurve, path: List[complex], order: int) -> Tuple[ComplexArray, complex]:
    g = curve.g
    base = path[0]
    first = path[1]
    v_first = complex(np.sqrt(curve.h(first)))

    # first leg leaves the base branch point: Gauss–Jacobi with weight (1 + x)^(−1/2)
    x, w = special.roots_jacobi(order, 0.0, -0.5)  # type: ignore
    s = base + (first - base) * (1.0 + x) / 2.0
    regular = np.full(order, v_first, dtype=np.complex128)
    for b in curve.branch_points[curve.branch_points != base]:
        regular = regular * np.sqrt((s - b) / (first - b))
    integrand = np.stack([s**i for i in range(g)]) * (first - base) / 2.0 * np.sqrt(2.0) / regular
    total = integrand @ w

    nodes, weights = special.roots_legendre(order)  # type: ignore
    ref, v_ref = first, v_first
    for end in path[2:]:
        panels = int(np.clip(np.ceil(2.0 * abs(end - ref) / _clearance(curve, ref, end)), 1, 64))
        edges = ref + (end - ref) * np.linspace(0.0, 1.0, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
            v = _continue(curve, ref, v_ref, s)
            total = total + (np.stack([s**i for i in range(g)]) * 0.5 * (hi - lo) / v) @ weights
        v_ref = complex(_continue(curve, ref, v_ref, np.array([end]))[0])
        ref = end
    return total, v_ref


def abel_integral(
    curve: DoubleCoverCurve,
    t: complex,
    v: complex,
    quad_order: int = DEFAULT_ORDER,
    detour_radius: float = DETOUR_RADIUS,
    max_order: int = DEFAULT_MAX_ORDER,
    tolerance: float = DEFAULT_TOLERANCE,
    basis: Optional[CycleBasis] = None,
) -> ComplexArray:
    """Unnormalized integrals ∫ t^i dt/v, i = 0 … g−1, on E′ from the base branch point of ``basis`` to (t, v).

    :raises ValueError: (t, v) is not on the curve, or ``basis`` does not belong to it.
    :raises PathThroughBranchPoint: No admissible path was found.
    :raises QuadratureNoConvergence: The path integral did not converge.
    """
    basis = basis if basis is not None else standard_basis(curve)
    basis.check(curve)
    t = complex(t)
    base = basis.base
    if abs(t - base) < 1e-14 * max(1.0, abs(base)):
        return np.zeros(curve.g, dtype=np.complex128)
    path = build_path(curve, t, detour_radius, basis.base_index)
    end_value: List[complex] = []

    def compute(order: int) -> ComplexArray:
        total, v_end = _path_integral(curve, path, order)
        end_value[:] = [v_end]
        return total

    total = converge(compute, quad_order, max_order, tolerance, label="abel path")
    v_end = end_value[0]
    if min(abs(v_end - v), abs(v_end + v)) > 1e-6 * max(abs(v), 1e-300):
        raise ValueError(f"({t}, {v}) does not lie on the curve")
    return total if abs(v_end - v) <= abs(v_end + v) else -total


def abel_prym(
    curve: DoubleCoverCurve,
    x: complex,
    y: complex,
    a_periods: ComplexArray,
    quad_order: int = DEFAULT_ORDER,
    detour_radius: float = DETOUR_RADIUS,
    max_order: int = DEFAULT_MAX_ORDER,
    tolerance: float = DEFAULT_TOLERANCE,
    basis: Optional[CycleBasis] = None,
) -> ComplexArray:
    """Abel–Prym image of the point P = (x, y) of Γ.

    The odd differentials of Γ descend to t^{k−1}dt/v on E′, and the half integral
    on Γ from σP to P equals the Abel map of E′ from the Weierstrass base point to
    (x², y). The result is normalized by the a-periods, so A(σP) = −A(P).

    :param prymlab.prym.DoubleCoverCurve curve: The cover.
    :param complex x: x coordinate of P.
    :param complex y: y coordinate of P, y² = h(x²).
    :param ComplexArray a_periods: a-period matrix returned by ``period_matrix()``.
    :param int quad_order: Initial quadrature order.
    :param float detour_radius: Clearance kept from branch points.
    :param int max_order: Largest quadrature order tried on each path.
    :param float tolerance: Required relative change between successive orders.
    :param prymlab.prym.periods.CycleBasis basis: The basis ``a_periods`` was computed in.

    :return: A(P) as a complex g-vector.
    :rtype: ComplexArray
    """
    integral = abel_integral(
        curve, complex(x) ** 2, complex(y), quad_order, detour_radius, max_order, tolerance, basis
    )
    return linalg.solve(a_periods, integral)  # type: ignore
