#!/usr/bin/env python3
import logging
from functools import lru_cache
from typing import Any, Sequence, Tuple

import mpmath  # type: ignore
import numpy as np
from scipy import optimize, special  # type: ignore

from ..base import RadiusCapExceeded, ThetaPolicy
from . import ComplexArray, PeriodMatrix, RealArray

logger = logging.getLogger(__name__)

DEFAULT_POLICY = ThetaPolicy()

#: Number of arguments evaluated per vectorised block.
BLOCK_SIZE = 2048


def tail_radius(B: PeriodMatrix, policy: ThetaPolicy) -> float:
    """Returns the ellipsoid radius R whose omitted Gaussian tail is below the target.

    The bound is ε(R) = (g/2)·(2/ρ)^g·Γ(g/2, (R − ρ/2)²) with ρ the shortest
    lattice vector of the Cholesky lattice of π·Im B. It is valid for arguments
    whose reduced imaginary coordinates lie in [-1/2, 1/2]^g and must be
    multiplied by the growth factor exp(π·yᵀ(Im B)⁻¹y) for unreduced ones.

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: The radius R.
    :rtype: float
    """
    g = B.g
    rho = B.shortest_vector
    half = g / 2.0

    def excess(R: float) -> float:
        x = (R - rho / 2.0) ** 2
        tail = half * (2.0 / rho) ** g * special.gammaincc(half, x) * special.gamma(half)
        return float(tail - policy.target_abs_error)

    lo = rho / 2.0
    if excess(lo) <= 0.0:
        return max(lo, rho)
    R = float(optimize.brentq(excess, lo, lo + 60.0, xtol=1e-6))  # type: ignore
    return max(R, rho)


@lru_cache(maxsize=64)
def _enumeration(B: PeriodMatrix, policy: ThetaPolicy) -> Tuple[RealArray, ComplexArray]:
    """Integer points covering every reduced argument, sorted by |m|².

    The set is the ellipsoid ‖Tm‖ < R + ‖T‖·√g/2, a superset of the per-argument
    ellipsoids ‖T(m − c)‖ < R for all centres c in [-1/2, 1/2]^g.
    """
    g = B.g
    R = tail_radius(B, policy) + np.linalg.norm(B.cholesky, 2) * np.sqrt(g) / 2.0
    half_widths = R * np.sqrt(np.diag(B.pi_imag_inv))
    box = int(np.ceil(np.max(half_widths)))
    if box > policy.max_radius:
        raise RadiusCapExceeded(
            f"Enumeration half-width {box} exceeds max_radius {policy.max_radius}"
        )
    axes = [np.arange(-int(np.ceil(w)), int(np.ceil(w)) + 1) for w in half_widths]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g)
    points = points[np.linalg.norm(points @ B.cholesky.T, axis=1) < R]
    norms = np.sum(points**2, axis=1)
    keys = [points[:, i] for i in reversed(range(g))] + [norms]
    points = points[np.lexsort(keys)].astype(np.float64)
    quadratic = 1j * np.pi * np.einsum("ki,ij,kj->k", points, B.entries, points)
    logger.debug(f"Theta enumeration: g={g}, radius={R:.3f}, {len(points)} points")
    return points, quadratic


def reduce_argument(B: PeriodMatrix, Z: Any) -> Tuple[ComplexArray, RealArray, ComplexArray]:
    """Translates arguments by lattice vectors into the reduced cell.

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param Z: Arguments, shape (N, g).

    :return: (Z_red, q, log_mu) with Z = Z_red + p + Bq and θ(Z) = exp(log_mu)·θ(Z_red).
    :rtype: Tuple[ComplexArray, RealArray, ComplexArray]
    """
    Z = np.asarray(Z, dtype=np.complex128).reshape(-1, B.g)
    if not np.all(np.isfinite(Z)):
        raise ValueError("Theta arguments must be finite")
    q = np.round(Z.imag @ B.imag_inv)
    shifted = Z - q @ B.entries
    Z_red = shifted - np.round(shifted.real)
    log_mu = -1j * np.pi * np.einsum("ni,ij,nj->n", q, B.entries, q) - 2j * np.pi * np.sum(
        Z_red * q, axis=1
    )
    return Z_red, q, log_mu


def _reduced_sums(
    B: PeriodMatrix, Z_red: ComplexArray, policy: ThetaPolicy, gradient: bool
) -> Tuple[ComplexArray, ComplexArray]:
    points, quadratic = _enumeration(B, policy)
    n = Z_red.shape[0]
    values = np.empty(n, dtype=np.complex128)
    grads = np.zeros((n, B.g), dtype=np.complex128)
    for start in range(0, n, BLOCK_SIZE):
        block = Z_red[start : start + BLOCK_SIZE]
        terms = np.exp(2j * np.pi * (block @ points.T) + quadratic)
        values[start : start + BLOCK_SIZE] = np.sum(terms, axis=1)
        if gradient:
            grads[start : start + BLOCK_SIZE] = 2j * np.pi * np.sum(
                terms[:, :, None] * points[None, :, :], axis=1
            )
    return values, grads


def theta_batch(B: PeriodMatrix, Z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> ComplexArray:
    """Evaluates the Riemann theta function on a stack of arguments.

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param Z: Arguments, shape (N, g).
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: θ(B, Z[k]) for every row.
    :rtype: ComplexArray
    """
    Z_red, _, log_mu = reduce_argument(B, Z)
    values, _ = _reduced_sums(B, Z_red, policy, gradient=False)
    return np.exp(log_mu) * values


def theta(B: PeriodMatrix, z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> complex:
    """Evaluates θ(z) = Σ_m exp(2πi(z,m) + πi(Bm,m)).

    The argument is reduced by quasi-periodicity before summing; the absolute
    error is below ``policy.target_abs_error`` times exp(π·yᵀ(Im B)⁻¹y), y = Im z.

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param z: Complex g-vector.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: The theta value.
    :rtype: complex

    :raises RadiusCapExceeded: The required enumeration box exceeds ``policy.max_radius``.
    """
    return complex(theta_batch(B, [z], policy)[0])


def theta_log_batch(B: PeriodMatrix, Z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> ComplexArray:
    """Logarithms of theta values without forming the quasi-periodicity factor.

    The imaginary part is defined modulo 2π.
    """
    Z_red, _, log_mu = reduce_argument(B, Z)
    values, _ = _reduced_sums(B, Z_red, policy, gradient=False)
    return log_mu + np.log(values)


def theta_log(B: PeriodMatrix, z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> complex:
    return complex(theta_log_batch(B, [z], policy)[0])


def theta_gradient_batch(
    B: PeriodMatrix, Z: Any, policy: ThetaPolicy = DEFAULT_POLICY
) -> Tuple[ComplexArray, ComplexArray]:
    """Returns (θ(Z), ∇θ(Z)) with the chain rule through the argument reduction."""
    Z_red, q, log_mu = reduce_argument(B, Z)
    values, grads = _reduced_sums(B, Z_red, policy, gradient=True)
    mu = np.exp(log_mu)
    return mu * values, mu[:, None] * (grads - 2j * np.pi * q * values[:, None])


def theta_gradient(B: PeriodMatrix, z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> ComplexArray:
    """Returns the vector of partial derivatives ∂θ/∂z_k."""
    return theta_gradient_batch(B, [z], policy)[1][0]


def theta_log_gradient_batch(B: PeriodMatrix, Z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> ComplexArray:
    """Returns ∇θ/θ; overflow free for arguments far from the reduced cell."""
    Z_red, q, _ = reduce_argument(B, Z)
    values, grads = _reduced_sums(B, Z_red, policy, gradient=True)
    return grads / values[:, None] - 2j * np.pi * q


def theta_log_gradient(B: PeriodMatrix, z: Any, policy: ThetaPolicy = DEFAULT_POLICY) -> ComplexArray:
    return theta_log_gradient_batch(B, [z], policy)[0]


def theta_directional_derivative(
    B: PeriodMatrix, z: Any, direction: Any, policy: ThetaPolicy = DEFAULT_POLICY
) -> complex:
    """Returns Σ_m 2πi(dir, m)·exp(2πi(z,m) + πi(Bm,m)).

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param z: Complex g-vector.
    :param direction: Complex g-vector ``dir``.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: The derivative of θ at z along ``dir``.
    :rtype: complex
    """
    return complex(theta_gradient(B, z, policy) @ np.asarray(direction, dtype=np.complex128))


def theta_quasi_factor(B: PeriodMatrix, z: Any, lattice_vector: Any) -> complex:
    """Returns μ with θ(z + λ) = μ·θ(z) for λ = p + Bq.

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param z: Complex g-vector.
    :param lattice_vector: λ; must be p + Bq with integer p and q.

    :return: μ = exp(−πi(Bq,q) − 2πi(z,q)).
    :rtype: complex
    """
    coords = B.lattice_coordinates(lattice_vector)
    integers = np.round(coords)
    if np.max(np.abs(coords - integers)) > 1e-8:
        raise ValueError(f"{lattice_vector} is not a lattice vector")
    q = integers[B.g :]
    z = np.asarray(z, dtype=np.complex128)
    return complex(np.exp(-1j * np.pi * (q @ B.entries @ q) - 2j * np.pi * (z @ q)))


def _check_characteristic(c: Any, g: int) -> RealArray:
    c = np.asarray(c, dtype=np.float64).reshape(g)
    if not np.all(np.isin(c, (0.0, 0.5))):
        raise ValueError(f"Characteristic entries must be 0 or 1/2, got {c.tolist()}")
    return c


def theta_characteristic_batch(
    B: PeriodMatrix,
    Z: Any,
    a: Sequence[float],
    b: Sequence[float],
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> ComplexArray:
    """Evaluates θ[a,b](Z) = exp(πi(Ba,a) + 2πi(a, Z+b))·θ(Z + Ba + b) row-wise."""
    a_vec = _check_characteristic(a, B.g)
    b_vec = _check_characteristic(b, B.g)
    Z = np.asarray(Z, dtype=np.complex128).reshape(-1, B.g)
    prefactor = 1j * np.pi * (a_vec @ B.entries @ a_vec) + 2j * np.pi * ((Z + b_vec) @ a_vec)
    logs = theta_log_batch(B, Z + B.entries @ a_vec + b_vec, policy)
    return np.exp(prefactor + logs)


def theta_characteristic(
    B: PeriodMatrix,
    z: Any,
    a: Sequence[float],
    b: Sequence[float],
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> complex:
    """Theta with half-integer characteristic [a, b], a, b ∈ {0, 1/2}^g.

    :param prymlab.theta.PeriodMatrix B: The period matrix.
    :param z: Complex g-vector.
    :param a: Upper characteristic.
    :param b: Lower characteristic.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: Σ_m exp(πi(B(m+a), m+a) + 2πi(m+a, z+b)).
    :rtype: complex

    .. note:: For g = 1, [1/2, 1/2] is the odd theta θ₁ used by the genus-1 checks.
    """
    return complex(theta_characteristic_batch(B, [z], a, b, policy)[0])


def shifted_lattice_sum(
    B: PeriodMatrix, z: Any, shift: Any, policy: ThetaPolicy = DEFAULT_POLICY
) -> complex:
    """Direct sum Σ_m exp(πi(B(m+s), m+s) + 2πi(m+s, z)) without argument reduction.

    Points are enumerated around the centre of the Gaussian envelope; used as an
    independent path against the reduced evaluation.
    """
    g = B.g
    z = np.asarray(z, dtype=np.complex128).reshape(g)
    s = np.asarray(shift, dtype=np.float64).reshape(g)
    centre = -(B.imag_inv @ z.imag) - s
    R = tail_radius(B, policy) + np.linalg.norm(B.cholesky, 2) * np.sqrt(g)
    half_widths = R * np.sqrt(np.diag(B.pi_imag_inv))
    if np.max(half_widths) > policy.max_radius:
        raise RadiusCapExceeded(f"Direct sum half-width {np.max(half_widths):.1f} exceeds max_radius")
    axes = [
        np.arange(int(np.floor(c - w)), int(np.ceil(c + w)) + 1) for c, w in zip(centre, half_widths)
    ]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g).astype(np.float64)
    points = points[np.linalg.norm((points - centre) @ B.cholesky.T, axis=1) < R] + s
    exponents = 1j * np.pi * np.einsum("ki,ij,kj->k", points, B.entries, points) + 2j * np.pi * (points @ z)
    order = np.argsort(-exponents.real, kind="stable")
    return complex(np.sum(np.exp(exponents[order])))


def theta_reference_genus1(tau: complex, z: complex, dps: int = 30) -> complex:
    """Genus-1 theta via ``mpmath.jtheta`` in extended precision.

    θ(z; τ) = ϑ₃(πz, q) with nome q = exp(πiτ).
    """
    with mpmath.workdps(dps):  # type: ignore
        nome = mpmath.exp(1j * mpmath.pi * mpmath.mpc(tau))  # type: ignore
        value = mpmath.jtheta(3, mpmath.pi * mpmath.mpc(z), nome)  # type: ignore
    return complex(value)  # type: ignore
