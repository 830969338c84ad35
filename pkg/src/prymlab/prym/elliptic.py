#!/usr/bin/env python3
from dataclasses import dataclass

import mpmath  # type: ignore
import numpy as np

from . import DoubleCoverCurve, from_roots
from .periods import period_matrix


@dataclass(frozen=True)
class EllipticCheck:
    """Quadrature versus AGM period ratio of a quartic."""

    quadrature_tau: complex
    agm_tau: complex
    discrepancy: float


def complete_elliptic_k(m: float, dps: int = 30) -> float:
    """K(m) = π / (2·agm(1, sqrt(1 − m)))."""
    with mpmath.workdps(dps):  # type: ignore
        value = mpmath.pi / (2 * mpmath.agm(1, mpmath.sqrt(1 - mpmath.mpf(m))))  # type: ignore
    return float(value)  # type: ignore


def agm_period_ratio(e1: float, e2: float, e3: float, e4: float) -> complex:
    """Period ratio of v² = Π(t − e_i) for real e1 < e2 < e3 < e4.

    With k² = (e3 − e2)(e4 − e1) / ((e4 − e2)(e3 − e1)), the gap integral over
    [e2, e3] is 2K(k²)/sqrt((e4 − e2)(e3 − e1)) and the cut integral over
    [e1, e2] is 2K(1 − k²) over the same root, so τ = i·K(k²)/K(1 − k²).
    """
    if not e1 < e2 < e3 < e4:
        raise ValueError("AGM oracle needs four increasing real branch points")
    k2 = (e3 - e2) * (e4 - e1) / ((e4 - e2) * (e3 - e1))
    return 1j * complete_elliptic_k(k2) / complete_elliptic_k(1.0 - k2)


def cross_check_elliptic(curve: DoubleCoverCurve, endpoint_shift: float = 0.0) -> EllipticCheck:
    """Compares the quadrature period ratio of a quartic against the AGM value.

    :param prymlab.prym.DoubleCoverCurve curve: A cover with deg h = 4 and real branch points.
    :param float endpoint_shift: Moves the second branch point of the quadrature
        curve only, to confirm the comparison detects a wrong endpoint.

    :return: Both ratios and their distance.
    :rtype: prymlab.prym.elliptic.EllipticCheck
    """
    if curve.g != 1:
        raise ValueError(f"Elliptic cross-check needs a quartic, got degree {curve.degree}")
    roots = curve.branch_points
    if np.max(np.abs(roots.imag)) > 0.0:
        raise ValueError("AGM oracle needs real branch points")
    e1, e2, e3, e4 = (float(r) for r in roots.real)
    agm_tau = agm_period_ratio(e1, e2, e3, e4)
    quadrature_curve = curve
    if endpoint_shift != 0.0:
        quadrature_curve = from_roots([e1, e2 + endpoint_shift, e3, e4], curve.lead)
    Pi, _ = period_matrix(quadrature_curve)
    quadrature_tau = complex(Pi.entries[0, 0])
    return EllipticCheck(quadrature_tau, agm_tau, abs(quadrature_tau - agm_tau))
