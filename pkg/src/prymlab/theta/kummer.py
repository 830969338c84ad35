#!/usr/bin/env python3
from itertools import product
from typing import Any, List, Sequence, Tuple

import numpy as np

from ..base import ThetaPolicy, ZeroVector
from . import ComplexArray, PeriodMatrix
from .riemann import DEFAULT_POLICY, shifted_lattice_sum, theta_characteristic_batch


def characteristics(g: int) -> List[Tuple[int, ...]]:
    """All ε ∈ (ℤ/2ℤ)^g in lexicographic order."""
    return list(product((0, 1), repeat=g))


def theta_second_order_batch(
    B: PeriodMatrix, Z: Any, eps: Sequence[int], policy: ThetaPolicy = DEFAULT_POLICY
) -> ComplexArray:
    """Θ[ε](B, Z) row-wise, computed as θ[ε/2, 0](2B, 2Z)."""
    Z = np.asarray(Z, dtype=np.complex128).reshape(-1, B.g)
    a = [e / 2.0 for e in eps]
    return theta_characteristic_batch(B.doubled, 2.0 * Z, a, [0.0] * B.g, policy)


def theta_second_order(
    B: PeriodMatrix, z: Any, eps: Sequence[int], policy: ThetaPolicy = DEFAULT_POLICY
) -> complex:
    """Second order theta Θ[ε](B, z) = Σ_m exp(2πi[(B(m+ε/2), m+ε/2) + 2(m+ε/2, z)]).

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param z: Complex g-vector.
    :param eps: Characteristic ε with entries in {0, 1}.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: The second order theta value.
    :rtype: complex
    """
    return complex(theta_second_order_batch(B, [z], eps, policy)[0])


def theta_second_order_direct(
    B: PeriodMatrix, z: Any, eps: Sequence[int], policy: ThetaPolicy = DEFAULT_POLICY
) -> complex:
    """Second order theta by its defining sum, the cross-check of ``theta_second_order``."""
    z = np.asarray(z, dtype=np.complex128)
    return shifted_lattice_sum(B.doubled, 2.0 * z, np.asarray(eps, dtype=np.float64) / 2.0, policy)


class KummerPoint:
    """
    KummerPoint API

    The 2^g second order theta values of one argument, indexed by ε in
    lexicographic order. The point is projective: comparisons never use raw
    magnitudes.
    """

    def __init__(self, components: ComplexArray):
        self.components = np.asarray(components, dtype=np.complex128)

    def __len__(self) -> int:
        return int(self.components.shape[0])

    def normalized(self) -> ComplexArray:
        """Components divided by the one of largest magnitude."""
        return self.components / self.components[np.argmax(np.abs(self.components))]

    def projective_distance(self, other: "KummerPoint") -> float:
        """Largest 2×2 cross determinant of the two normalized component vectors."""
        a = self.normalized()
        b = other.normalized()
        return float(np.max(np.abs(np.outer(a, b) - np.outer(b, a))))


def kummer_batch(B: PeriodMatrix, Z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> ComplexArray:
    """Kummer images of a stack of arguments, shape (N, 2^g)."""
    Z = np.asarray(Z, dtype=np.complex128).reshape(-1, B.g)
    columns = [theta_second_order_batch(B, Z, eps, policy) for eps in characteristics(B.g)]
    return np.stack(columns, axis=1)


def kummer(B: PeriodMatrix, z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> KummerPoint:
    """Returns the Kummer image K(z) = (Θ[ε](B, z))_ε.

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param z: Complex g-vector.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: The projective Kummer point.
    :rtype: prymlab.theta.KummerPoint

    :raises ZeroVector: Every component is below 1e-300.
    """
    components = kummer_batch(B, [z], policy)[0]
    if np.max(np.abs(components)) < 1e-300:
        raise ZeroVector(f"Kummer image of {z} vanishes")
    return KummerPoint(components)
