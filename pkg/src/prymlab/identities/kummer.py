#!/usr/bin/env python3
import logging
from itertools import combinations, product
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..base import (
    DegenerateQuadruple,
    IdentityReport,
    InconsistentSystem,
    Sample,
    ThetaPolicy,
    ZeroCoefficient,
)
from ..prym.data import PrymData, null_vector, secant_points
from ..theta import ComplexArray
from ..theta.kummer import kummer_batch
from ..theta.riemann import DEFAULT_POLICY
from . import LatticeIndex, SchroedingerConstants
from .lattice import lattice_residual

logger = logging.getLogger(__name__)

#: Rows express log κ⁺₁, log(−κ⁺₂), log κ⁺₃, log κ⁻₁, log(−κ⁻₂), log κ⁻₃ in log c₁, log c₂, log c₃, log w₁, log w₂, log w₃.
LOG_SYSTEM = np.array(
    [
        [1, 1, 0, 1, 1, 0],
        [1, 0, 1, 1, 0, 1],
        [0, 1, 1, 0, 1, 1],
        [-1, -1, 0, 1, 1, 0],
        [-1, 0, 1, 1, 0, -1],
        [0, -1, 1, 0, 1, -1],
    ],
    dtype=np.float64,
)

#: Trial residual above which no branch choice is accepted.
TRIAL_TOLERANCE = 1e-6

Trial = Callable[[SchroedingerConstants], float]


def secant_coefficients(k: SchroedingerConstants) -> Tuple[ComplexArray, ComplexArray]:
    """Coefficients of the two secant relations among lifted Kummer points.

    κ⁺ = (w₁w₂c₁c₂, −w₁w₃c₁c₃, w₂w₃c₂c₃, −1) for (A±U±V∓W)/2 with an even number
    of minus signs in U, V and κ⁻ = (w₁w₂/(c₁c₂), −c₃w₁/(c₁w₃), c₃w₂/(c₂w₃), −1)
    for the other quadruple.
    """
    c1, c2, c3, w1, w2, w3 = k.as_array()
    even = np.array([w1 * w2 * c1 * c2, -w1 * w3 * c1 * c3, w2 * w3 * c2 * c3, -1])
    odd = np.array([w1 * w2 / (c1 * c2), -c3 * w1 / (c1 * w3), c3 * w2 / (c2 * w3), -1])
    return even, odd


def _normalized(kappa: Any, label: str) -> ComplexArray:
    kappa = np.asarray(kappa, dtype=np.complex128)
    if np.min(np.abs(kappa)) <= 1e-12 * np.max(np.abs(kappa)):
        raise ZeroCoefficient(f"{label} null vector has a vanishing entry: {kappa.tolist()}")
    return -kappa / kappa[3]


def recover_constants(
    null_vectors: Tuple[Any, Any],
    trial: Optional[Trial] = None,
    tolerance: float = TRIAL_TOLERANCE,
) -> SchroedingerConstants:
    """Recovers c₁, c₂, c₃, w₁, w₂, w₃ from the null vectors of the two secant systems.

    Each null vector is scaled so its fourth entry is −1; the logarithms of
    the remaining six entries form a linear system in the logarithms of the
    constants. Every branch 2πi·{0, 1}^6 of the logarithms is solved and, when
    a trial is given, the first branch whose trial residual is within 10× of
    the best one is taken.

    :param null_vectors: (even quadruple vector, odd quadruple vector).
    :param trial: Residual of the lattice equation under candidate constants.
    :param float tolerance: Largest accepted trial residual.

    :return: The constants.
    :rtype: prymlab.identities.SchroedingerConstants

    :raises ZeroCoefficient: A null vector has a vanishing entry.
    :raises InconsistentSystem: No branch reaches ``tolerance`` on the trial.
    """
    even = _normalized(null_vectors[0], "even")
    odd = _normalized(null_vectors[1], "odd")
    rhs = np.log(np.array([even[0], -even[1], even[2], odd[0], -odd[1], odd[2]]))
    candidates: List[SchroedingerConstants] = []
    for branch in product((0, 1), repeat=6):
        solution, _, _, _ = np.linalg.lstsq(LOG_SYSTEM, rhs + 2j * np.pi * np.array(branch), rcond=None)
        fit = np.exp(LOG_SYSTEM @ solution) - np.exp(rhs)
        if np.max(np.abs(fit)) > tolerance * np.max(np.abs(np.exp(rhs))):
            raise InconsistentSystem(f"Log system residual {np.max(np.abs(fit)):.3e}")
        candidates.append(SchroedingerConstants.from_array(np.exp(solution)))
        if trial is None:
            return candidates[0]

    scores = np.array([trial(k) for k in candidates])
    scores = np.where(np.isfinite(scores), scores, np.inf)
    best = float(np.min(scores))
    if not best <= tolerance:
        raise InconsistentSystem(f"Best trial residual {best:.3e} exceeds {tolerance:.1e}")
    chosen = int(np.argmax(scores <= 10.0 * best))
    logger.debug(f"Branch {chosen} chosen with trial residual {scores[chosen]:.3e}")
    return candidates[chosen]


def secant_images(data: PrymData, policy: ThetaPolicy = DEFAULT_POLICY) -> Tuple[ComplexArray, ComplexArray]:
    """Lifted Kummer images of the two secant quadruples, shape (4, 2^g) each.

    :raises DegenerateQuadruple: Two points of a quadruple agree up to sign modulo the lattice.
    """
    even, odd = secant_points(data.A, data.U, data.V, data.W)
    for label, points in (("even", even), ("odd", odd)):
        for i, j in combinations(range(4), 2):
            for other in (points[j], -points[j]):
                if data.Pi.distance_to_lattice(points[i] - other) < 1e-8:
                    raise DegenerateQuadruple(f"Points {i} and {j} of the {label} quadruple coincide")
    images = kummer_batch(data.Pi, np.concatenate([even, odd]), policy)
    return images[:4], images[4:]


def lattice_trial(
    data: PrymData,
    Zs: Sequence[Any],
    window: Sequence[int] = (-1, 0, 1),
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> Trial:
    """Largest lattice-equation residual on a small window, for branch selection."""

    def trial(k: SchroedingerConstants) -> float:
        try:
            return max(
                lattice_residual(data, k, LatticeIndex(n, m), Z, policy)
                for n, m in product(window, window)
                for Z in Zs
            )
        except (ArithmeticError, ValueError):
            return float("inf")

    return trial


def fit_constants(
    data: PrymData,
    Zs: Sequence[Any],
    policy: ThetaPolicy = DEFAULT_POLICY,
    tolerance: float = TRIAL_TOLERANCE,
) -> Tuple[SchroedingerConstants, str]:
    """Constants from the secant null vectors, trying both pairings of quadruples and coefficient sets.

    :return: (constants, pairing) with pairing ``"direct"`` when κ⁺ belongs to
        the even quadruple and ``"swapped"`` otherwise.
    :rtype: Tuple[prymlab.identities.SchroedingerConstants, str]

    :raises InconsistentSystem: Neither pairing passes the trial.
    """
    even_images, odd_images = secant_images(data, policy)
    even_kappa, _ = null_vector(even_images.T)
    odd_kappa, _ = null_vector(odd_images.T)
    trial = lattice_trial(data, Zs, policy=policy)
    results: List[Tuple[float, SchroedingerConstants, str]] = []
    for pairing, vectors in (("direct", (even_kappa, odd_kappa)), ("swapped", (odd_kappa, even_kappa))):
        try:
            k = recover_constants(vectors, trial, tolerance)
        except InconsistentSystem as e:
            logger.debug(f"Pairing {pairing} rejected: {e}")
            continue
        results.append((trial(k), k, pairing))
    if not results:
        raise InconsistentSystem("No pairing of secant null vectors gives consistent constants")
    score, k, pairing = min(results, key=lambda r: r[0])
    logger.info(f"Constants recovered ({pairing} pairing), trial residual {score:.3e}")
    return k, pairing


def _relation_residual(kappa: ComplexArray, images: ComplexArray) -> float:
    terms = kappa[:, None] * images
    return float(np.max(np.abs(np.sum(terms, axis=0))) / np.max(np.abs(terms)))


def _rank_residual(images: ComplexArray) -> float:
    rows = images / np.max(np.abs(images), axis=1, keepdims=True)
    return max(abs(np.linalg.det(rows[:, list(cols)])) for cols in combinations(range(rows.shape[1]), 4))


def verify_B(
    data: PrymData,
    k: Optional[SchroedingerConstants] = None,
    Zs: Sequence[Any] = (),
    tolerance: float = 1e-8,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> Tuple[IdentityReport, SchroedingerConstants]:
    """Checks that the lifted Kummer images of both secant quadruples are linearly dependent.

    For g ≥ 2 every normalized 4×4 minor of each quadruple must vanish; for
    g = 1 the rank condition is automatic and only recorded. The explicit
    relations with coefficients κ± are evaluated under both pairings of
    coefficient sets and quadruples, and the better one is reported.

    :param prymlab.prym.data.PrymData data: The Prym data.
    :param k: The constants; recovered with ``fit_constants()`` on ``Zs`` when absent.
    :param Zs: Trial arguments for the constant recovery.
    :param float tolerance: Pass threshold.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: (report, constants used).
    :rtype: Tuple[prymlab.base.IdentityReport, prymlab.identities.SchroedingerConstants]

    :raises DegenerateQuadruple: A quadruple has coinciding points.
    """
    even_images, odd_images = secant_images(data, policy)
    notes = {}
    if k is None:
        k, notes["recovered_pairing"] = fit_constants(data, Zs, policy)
    z = tuple(complex(x) for x in data.A)
    samples: List[Sample] = []
    if data.g >= 2:
        for nu, images in enumerate((even_images, odd_images)):
            samples.append(Sample(n=0, m=0, nu=nu, z=z, residual=_rank_residual(images)))
    else:
        notes["rank_test"] = "structural check only"

    kappa_plus, kappa_minus = secant_coefficients(k)
    pairings = {
        "direct": (_relation_residual(kappa_plus, even_images), _relation_residual(kappa_minus, odd_images)),
        "swapped": (_relation_residual(kappa_plus, odd_images), _relation_residual(kappa_minus, even_images)),
    }
    pairing = min(pairings, key=lambda p: max(pairings[p]))
    notes["pairing"] = pairing
    for nu, residual in enumerate(pairings[pairing]):
        samples.append(Sample(n=1, m=0, nu=nu, z=z, residual=residual))
    report = IdentityReport.from_samples("B", samples, tolerance, notes)
    log = logger.info if report.passed else logger.warning
    log(f"B: max residual {report.max_rel_residual:.3e}, {pairing} pairing")
    return report, k
