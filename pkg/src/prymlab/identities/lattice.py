#!/usr/bin/env python3
import logging
from concurrent.futures import Executor
from dataclasses import replace
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..base import IdentityReport, NearDivisor, Sample, ThetaPolicy, relative_residual
from ..prym.data import PrymData
from ..theta import ComplexArray
from ..theta.riemann import DEFAULT_POLICY
from . import LatticeIndex, SchroedingerConstants, evaluate, theta_values

logger = logging.getLogger(__name__)

#: Ranges of n and m covered by a verification.
Window = Tuple[Sequence[int], Sequence[int]]


def _site_argument(data: PrymData, idx: LatticeIndex, Z: ComplexArray, w_weight: int) -> ComplexArray:
    return Z + idx.n * data.U + idx.m * data.V + w_weight * data.W


def _denominator_argument(data: PrymData, idx: LatticeIndex, Z: ComplexArray) -> ComplexArray:
    """Argument of T(n, m) = θ(Z + nU + mV + (1 − ν)W), the pole factor at the site."""
    return _site_argument(data, idx, Z, 1 - idx.nu)


def lattice_constant(k: SchroedingerConstants, idx: LatticeIndex) -> complex:
    """C_{nm} = c₃(c₂^{2n+1}c₁^{2m+1})^{1−2ν}."""
    sign = 1 - 2 * idx.nu
    return k.c3 * (k.c2 ** (2 * idx.n + 1) * k.c1 ** (2 * idx.m + 1)) ** sign


def u_field(
    data: PrymData,
    k: SchroedingerConstants,
    idx: LatticeIndex,
    Z: Any,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> complex:
    """Evaluates the potential of the lattice Schrödinger equation.

    u_{nm} = C_{nm}·T(n+1, m)·T(n, m+1) / (T(n+1, m+1)·T(n, m)), where every
    T(a, b) = θ(Z + aU + bV + (1 − ν_{ab})W) carries the parity of its own site.

    :param prymlab.prym.data.PrymData data: The Prym data.
    :param prymlab.identities.SchroedingerConstants k: The constants.
    :param prymlab.identities.LatticeIndex idx: The site (n, m).
    :param Z: Complex g-vector.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: u_{nm}(Z).
    :rtype: complex

    :raises NearDivisor: A denominator theta is too small.
    """
    Z = np.asarray(Z, dtype=np.complex128)
    sites = [idx.shifted(1, 0), idx.shifted(0, 1), idx.shifted(1, 1), idx]
    values = theta_values(data.Pi, [_denominator_argument(data, s, Z) for s in sites], (2, 3), policy)
    return complex(lattice_constant(k, idx) * values[0] * values[1] / (values[2] * values[3]))


def psi_field(
    data: PrymData,
    k: SchroedingerConstants,
    idx: LatticeIndex,
    Z: Any,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> complex:
    """Evaluates the wave function.

    ψ_{nm} = θ(A + nU + mV + νW + Z)/θ(nU + mV + (1 − ν)W + Z)·w₁ⁿw₂^m w₃^ν (c₁^m c₂ⁿ)^{1−2ν}.

    :raises NearDivisor: The denominator theta is too small.
    """
    Z = np.asarray(Z, dtype=np.complex128)
    nu = idx.nu
    numerator = data.A + _site_argument(data, idx, Z, nu)
    values = theta_values(data.Pi, [numerator, _denominator_argument(data, idx, Z)], (1,), policy)
    factor = k.w1**idx.n * k.w2**idx.m * k.w3**nu * (k.c1**idx.m * k.c2**idx.n) ** (1 - 2 * nu)
    return complex(values[0] / values[1] * factor)


def _sample(idx: LatticeIndex, Z: ComplexArray, residual: float) -> Sample:
    return Sample(n=idx.n, m=idx.m, nu=idx.nu, z=tuple(complex(x) for x in Z), residual=residual)


def _collect(
    name: str,
    fn: Callable[[Tuple[LatticeIndex, ComplexArray]], Optional[float]],
    items: List[Tuple[LatticeIndex, ComplexArray]],
    tolerance: float,
    executor: Optional[Executor],
) -> IdentityReport:
    """Evaluates every (site, Z) pair; pairs hitting ``NearDivisor`` are dropped and counted."""

    def guarded(item: Tuple[LatticeIndex, ComplexArray]) -> Optional[float]:
        try:
            return fn(item)
        except NearDivisor as e:
            logger.debug(f"{name}: skipped sample at ({item[0].n}, {item[0].m}): {e}")
            return None

    residuals = evaluate(guarded, items, executor)
    samples = [_sample(idx, Z, r) for (idx, Z), r in zip(items, residuals) if r is not None]
    skipped = len(items) - len(samples)
    report = IdentityReport.from_samples(name, samples, tolerance, {"skipped": str(skipped)})
    log = logger.info if report.passed else logger.warning
    log(f"{name}: max residual {report.max_rel_residual:.3e} over {report.sample_count} samples")
    return report


def _items(window: Window, Zs: Sequence[Any], flipped: bool = False) -> List[Tuple[LatticeIndex, ComplexArray]]:
    ns, ms = window
    return [
        (LatticeIndex(n, m, flipped), np.asarray(Z, dtype=np.complex128))
        for n, m in product(ns, ms)
        for Z in Zs
    ]


def lattice_residual(
    data: PrymData,
    k: SchroedingerConstants,
    idx: LatticeIndex,
    Z: Any,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> float:
    """Relative residual of ψ_{n+1,m+1} − u_{nm}(ψ_{n+1,m} − ψ_{n,m+1}) − ψ_{nm} at one site."""
    psi = {(dn, dm): psi_field(data, k, idx.shifted(dn, dm), Z, policy) for dn, dm in product((0, 1), (0, 1))}
    u = u_field(data, k, idx, Z, policy)
    terms = [psi[1, 1], -u * psi[1, 0], u * psi[0, 1], -psi[0, 0]]
    return relative_residual(sum(terms), terms)


def verify_A(
    data: PrymData,
    k: SchroedingerConstants,
    window: Window,
    Zs: Sequence[Any],
    tolerance: float = 1e-8,
    flipped: bool = False,
    executor: Optional[Executor] = None,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> IdentityReport:
    """Checks the difference Schrödinger equation over a window of sites and arguments.

    :param prymlab.prym.data.PrymData data: The Prym data.
    :param prymlab.identities.SchroedingerConstants k: The constants.
    :param window: (n range, m range).
    :param Zs: Complex g-vectors.
    :param float tolerance: Pass threshold.
    :param bool flipped: Evaluate in the relabelled parity convention.
    :param executor: Optional pool the samples are mapped over.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: The residual report; samples hitting a theta zero are skipped.
    :rtype: prymlab.base.IdentityReport
    """
    return _collect(
        "A",
        lambda item: lattice_residual(data, k, item[0], item[1], policy),
        _items(window, Zs, flipped),
        tolerance,
        executor,
    )


def five_term_coefficients(
    data: PrymData,
    k: SchroedingerConstants,
    idx: LatticeIndex,
    Z: Any,
    explicit: bool = False,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> Tuple[complex, complex, complex, complex]:
    """Coefficients (ã, b̃, c̃, d̃) of the five-term relation at site (n, m).

    By default they are products of potentials, ã = u_{n,m}u_{n,m−1},
    b̃ = u_{n,m}u_{n−1,m}, c̃ = u_{n,m}/u_{n−1,m−1}. With ``explicit`` the theta
    form for ν = 0 is used, with Z′ = Z + nU + mV. Both give d̃ = 1 − ã − b̃ + c̃.

    :raises ValueError: ``explicit`` is requested at a site with ν = 1.
    """
    Z = np.asarray(Z, dtype=np.complex128)
    if explicit:
        if idx.nu != 0:
            raise ValueError("The theta form of the five-term coefficients needs ν = 0")
        U, V, W = data.U, data.V, data.W
        Zp = Z + idx.n * U + idx.m * V
        args = [
            Zp + V,
            Zp + U - V + W,
            Zp + U + V + W,
            Zp - V,
            Zp + U,
            Zp - U + V + W,
            Zp - U,
            Zp - U - V + W,
        ]
        t = theta_values(data.Pi, args, (2, 3, 6), policy)
        a = k.c3**2 * k.c1**2 * t[0] * t[1] / (t[2] * t[3])
        b = k.c3**2 * k.c2**2 * t[4] * t[5] / (t[2] * t[6])
        c = k.c1**2 * k.c2**2 * t[4] * t[0] * t[7] / (t[2] * t[3] * t[6])
    else:
        u = u_field(data, k, idx, Z, policy)
        a = u * u_field(data, k, idx.shifted(0, -1), Z, policy)
        b = u * u_field(data, k, idx.shifted(-1, 0), Z, policy)
        c = u / u_field(data, k, idx.shifted(-1, -1), Z, policy)
    return complex(a), complex(b), complex(c), complex(1 - a - b + c)


def five_term_residual(
    data: PrymData,
    k: SchroedingerConstants,
    idx: LatticeIndex,
    Z: Any,
    explicit: bool = False,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> float:
    a, b, c, d = five_term_coefficients(data, k, idx, Z, explicit, policy)

    def psi(dn: int, dm: int) -> complex:
        return psi_field(data, k, idx.shifted(dn, dm), Z, policy)

    terms = [psi(1, 1), -a * psi(1, -1), -b * psi(-1, 1), c * psi(-1, -1), -d * psi(0, 0)]
    return relative_residual(sum(terms), terms)


def verify_five_term(
    data: PrymData,
    k: SchroedingerConstants,
    window: Window,
    Zs: Sequence[Any],
    tolerance: float = 1e-8,
    executor: Optional[Executor] = None,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> IdentityReport:
    """Checks ψ_{n+1,m+1} − ãψ_{n+1,m−1} − b̃ψ_{n−1,m+1} + c̃ψ_{n−1,m−1} = d̃ψ_{n,m}.

    Sites with ν = 0 use the theta form of the coefficients, the others the
    potential products. The note ``coefficient_mismatch`` records the largest
    relative distance between the two forms on the ν = 0 sites.
    """
    mismatch: List[float] = []

    def check(item: Tuple[LatticeIndex, ComplexArray]) -> float:
        idx, Z = item
        explicit = idx.nu == 0
        if explicit:
            theta_form = np.array(five_term_coefficients(data, k, idx, Z, True, policy))
            product_form = np.array(five_term_coefficients(data, k, idx, Z, False, policy))
            mismatch.append(float(np.max(np.abs(theta_form - product_form) / np.maximum(np.abs(product_form), 1e-300))))
        return five_term_residual(data, k, idx, Z, explicit, policy)

    report = _collect("five_term", check, _items(window, Zs), tolerance, executor)
    report.notes["coefficient_mismatch"] = f"{max(mismatch, default=0.0):.3e}"
    return report


def _quad_bracket(
    data: PrymData,
    k: SchroedingerConstants,
    X: ComplexArray,
    Z: ComplexArray,
    point_weights: Tuple[complex, complex],
    policy: ThetaPolicy,
) -> ComplexArray:
    U, V = data.U, data.V
    args = [X + U + V + Z, X + U - V + Z, X - U + V + Z, X - U - V + Z, Z - U, Z - V, Z + U, Z + V]
    t = theta_values(data.Pi, args, (), policy)
    p1, p2 = point_weights
    return np.array(
        [
            p1 * p2 * t[0] * t[4] * t[5],
            -(k.c3**2) * p1 / p2 * t[1] * t[4] * t[7],
            -(k.c3**2) * p2 / p1 * t[2] * t[6] * t[5],
            t[3] * t[6] * t[7] / (p1 * p2),
        ]
    )


def quad_point_weights(k: SchroedingerConstants) -> Dict[str, Tuple[complex, complex]]:
    """Weight pairs attached to A and W in the fourth order identity.

    A carries (w₁, w₂) and W carries (1/c₂, 1/c₁). A bracket built from the pair
    (p₁, p₂) weights its terms by p₁p₂, c₃²p₁/p₂, c₃²p₂/p₁ and 1/(p₁p₂), so W's
    bracket is (1, c₁²c₃², c₂²c₃², c₁²c₂²)/(c₁c₂).
    """
    return {"A": (k.w1, k.w2), "W": (1 / k.c2, 1 / k.c1)}


def swap_points(data: PrymData, k: SchroedingerConstants) -> Tuple[PrymData, SchroedingerConstants]:
    """Exchanges A and W together with their weight pairs; c₃, w₃ and U, V are kept.

    The fourth order identity on the result is the original one with its two
    sides exchanged.
    """
    swapped = replace(k, c1=1 / k.w2, c2=1 / k.w1, w1=1 / k.c2, w2=1 / k.c1)
    return data.with_vectors(A=data.W, W=data.A), swapped


def quad_w_bracket(
    data: PrymData,
    k: SchroedingerConstants,
    Z: Any,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> ComplexArray:
    """The four terms of the bracket multiplying θ(A + Z) in the fourth order identity."""
    Z = np.asarray(Z, dtype=np.complex128)
    return _quad_bracket(data, k, data.W, Z, quad_point_weights(k)["W"], policy)


def quad_terms(
    data: PrymData,
    k: SchroedingerConstants,
    Z: Any,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> ComplexArray:
    """Eight signed terms of the fourth order identity; they sum to zero on Prym data.

    θ(Z + W)·[A bracket] − θ(A + Z)·[W bracket], each bracket weighted by the
    pair of its own point (see :func:`quad_point_weights`). Exchanging the points
    with :func:`swap_points` negates the identity and swaps its halves.
    """
    Z = np.asarray(Z, dtype=np.complex128)
    outer = theta_values(data.Pi, [Z + data.W, data.A + Z], (), policy)
    left = outer[0] * _quad_bracket(data, k, data.A, Z, quad_point_weights(k)["A"], policy)
    right = outer[1] * quad_w_bracket(data, k, Z, policy)
    return np.concatenate([left, -right])


def verify_quad(
    data: PrymData,
    k: SchroedingerConstants,
    Zs: Sequence[Any],
    tolerance: float = 1e-8,
    executor: Optional[Executor] = None,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> IdentityReport:
    """Checks the fourth order identity at arbitrary arguments Z."""

    def check(item: Tuple[LatticeIndex, ComplexArray]) -> float:
        terms = quad_terms(data, k, item[1], policy)
        return relative_residual(complex(np.sum(terms)), list(terms))

    return _collect("quad", check, _items(([0], [0]), Zs), tolerance, executor)
