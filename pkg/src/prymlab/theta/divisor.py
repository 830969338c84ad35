#!/usr/bin/env python3
import logging
from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np

from ..base import NoConvergence, ThetaPolicy, ZeroVector
from . import ComplexArray, PeriodMatrix
from .riemann import DEFAULT_POLICY, theta_batch, theta_gradient_batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DivisorPoint:
    """A point z with θ(z) ≈ 0, found along the line z0 + t·dir.

    ``residual`` is |θ(z)|; ``scale`` is the max of |θ| on the seed circle the
    tolerance was measured against.
    """

    z: ComplexArray
    t: complex
    residual: float
    scale: float


def newton_refine(
    B: PeriodMatrix,
    z0: ComplexArray,
    direction: ComplexArray,
    t: complex,
    threshold: float,
    max_iters: int = 60,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> Optional[Tuple[complex, float]]:
    """Newton iteration for t ↦ θ(z0 + t·dir) from one seed.

    :return: (t, |θ|) once |θ| < ``threshold``, or None without convergence.
    :rtype: Optional[Tuple[complex, float]]
    """
    for _ in range(max_iters):
        values, grads = theta_gradient_batch(B, [z0 + t * direction], policy)
        value = complex(values[0])
        if abs(value) < threshold:
            return t, abs(value)
        slope = complex(grads[0] @ direction)
        if slope == 0 or not np.isfinite(slope):
            return None
        t = t - value / slope
        if not np.isfinite(t):
            return None
    return None


def find_theta_zero(
    B: PeriodMatrix,
    z0: Any,
    direction: Any,
    policy: ThetaPolicy = DEFAULT_POLICY,
    tolerance: float = 1e-12,
    n_seeds: int = 16,
    seed_radius: float = 0.5,
    max_iters: int = 60,
) -> DivisorPoint:
    """Locates a point of the theta divisor on the complex line z0 + t·dir.

    Newton iteration in t starts from ``n_seeds`` seeds on the circle |t| =
    ``seed_radius`` and stops once |θ| < ``tolerance`` times the largest |θ|
    seen on that circle.

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param z0: Base point of the line.
    :param direction: Direction of the line.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.
    :param float tolerance: Relative divisor tolerance.
    :param int n_seeds: Number of seeds on the circle.
    :param float seed_radius: Radius of the seed circle in t.
    :param int max_iters: Newton steps per seed.

    :return: The refined divisor point.
    :rtype: prymlab.theta.DivisorPoint

    :raises ZeroVector: θ vanishes identically on the seed circle.
    :raises NoConvergence: No seed converged.
    """
    z0 = np.asarray(z0, dtype=np.complex128).reshape(B.g)
    direction = np.asarray(direction, dtype=np.complex128).reshape(B.g)
    seeds = seed_radius * np.exp(2j * np.pi * np.arange(n_seeds) / n_seeds)
    scale = float(np.max(np.abs(theta_batch(B, z0 + seeds[:, None] * direction, policy))))
    if scale < 1e-300:
        raise ZeroVector("θ vanishes identically on the seed circle")
    for seed in seeds:
        found = newton_refine(B, z0, direction, complex(seed), tolerance * scale, max_iters, policy)
        if found is not None:
            t, residual = found
            return DivisorPoint(z=z0 + t * direction, t=t, residual=residual, scale=scale)
        logger.debug(f"Newton seed {seed:.3f} did not converge")
    raise NoConvergence(f"No Newton seed reached |θ| < {tolerance:.1e}·{scale:.3e} in {max_iters} steps")
