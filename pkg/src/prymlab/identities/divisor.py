#!/usr/bin/env python3
import logging
from concurrent.futures import Executor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..base import (
    IdentityReport,
    NoConvergence,
    Sample,
    ThetaPolicy,
    ZeroVector,
    relative_residual,
)
from ..prym.data import PrymData
from ..theta import ComplexArray, DivisorPoint, PeriodMatrix, find_theta_zero
from ..theta.riemann import DEFAULT_POLICY
from . import SchroedingerConstants, evaluate, theta_values

logger = logging.getLogger(__name__)

#: Lattice shifts of divisor search base points along the real periods.
BASE_SHIFT = 10

#: (n, ν) combinations at which the tau relations are evaluated for every divisor point.
TAU_SITES = ((0, 0), (0, 1), (1, 0), (-1, 1))

TauFunction = Callable[[int, int, ComplexArray], complex]


def sample_divisor_points(
    Pi: PeriodMatrix,
    rng: np.random.Generator,
    count: int,
    min_distance: float = 1e-3,
    max_attempts: Optional[int] = None,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> List[DivisorPoint]:
    """Points of the theta divisor found along random complex lines.

    Base points are random in a cell moved by integer real periods, directions
    random unit vectors. Lines whose Newton search fails are redrawn, and points
    closer than ``min_distance`` to an accepted one are rejected.

    :raises NoConvergence: Fewer than ``count`` points were found in ``max_attempts`` lines.
    """
    g = Pi.g
    attempts = max_attempts if max_attempts is not None else 50 * count
    points: List[DivisorPoint] = []
    for _ in range(attempts):
        if len(points) == count:
            return points
        z0 = Pi.lattice_vector(rng.uniform(0, 1, g) + rng.integers(-BASE_SHIFT, BASE_SHIFT + 1, g), rng.uniform(-0.5, 0.5, g))
        direction = rng.normal(size=g) + 1j * rng.normal(size=g)
        direction = direction / np.linalg.norm(direction)
        try:
            point = find_theta_zero(Pi, z0, direction, policy)
        except (NoConvergence, ZeroVector) as e:
            logger.debug(f"Divisor line redrawn: {e}")
            continue
        if all(np.linalg.norm(point.z - p.z) >= min_distance for p in points):
            points.append(point)
    if len(points) < count:
        raise NoConvergence(f"Found {len(points)} of {count} divisor points in {attempts} lines")
    return points


def cm7d_terms(
    data: PrymData,
    k: SchroedingerConstants,
    Y: Any,
    sign: int,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> Tuple[ComplexArray, ComplexArray]:
    """Both sides of the divisor relation for one sign of W, as two products each.

    With W_s = sign·W and c₁, c₂ inverted for sign = +1:
    c₁²c₃²θ(Y+U−V)θ(Y−U+W_s)θ(Y+V+W_s) + c₂²c₃²θ(Y−U+V)θ(Y+U+W_s)θ(Y−V+W_s)
    = c₁²c₂²θ(Y−U−V)θ(Y+U+W_s)θ(Y+V+W_s) + θ(Y+U+V)θ(Y−U+W_s)θ(Y−V+W_s).
    """
    Y = np.asarray(Y, dtype=np.complex128)
    U, V = data.U, data.V
    W = sign * data.W
    c1, c2 = (k.c1, k.c2) if sign < 0 else (1 / k.c1, 1 / k.c2)
    args = [Y + U - V, Y - U + W, Y + V + W, Y - U + V, Y + U + W, Y - V + W, Y - U - V, Y + U + V]
    t = theta_values(data.Pi, args, (), policy)
    left = np.array([c1**2 * k.c3**2 * t[0] * t[1] * t[2], c2**2 * k.c3**2 * t[3] * t[4] * t[5]])
    right = np.array([c1**2 * c2**2 * t[6] * t[4] * t[2], t[7] * t[1] * t[5]])
    return left, right


def cm7d_residual(
    data: PrymData, k: SchroedingerConstants, Y: Any, sign: int, policy: ThetaPolicy = DEFAULT_POLICY
) -> float:
    left, right = cm7d_terms(data, k, Y, sign, policy)
    return relative_residual(complex(np.sum(left) - np.sum(right)), list(left) + list(right))


def _divisor_report(name: str, samples: List[Sample], tolerance: float, notes: Dict[str, str]) -> IdentityReport:
    report = IdentityReport.from_samples(name, samples, tolerance, notes)
    log = logger.info if report.passed else logger.warning
    log(f"{name}: max residual {report.max_rel_residual:.3e} over {report.sample_count} samples")
    return report


def verify_C(
    data: PrymData,
    k: SchroedingerConstants,
    points: Sequence[Any],
    tolerance: float = 1e-8,
    executor: Optional[Executor] = None,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> IdentityReport:
    """Checks the divisor relation for both signs of W at points with θ(Y) = 0.

    Samples with ν = 0 carry the minus sign, ν = 1 the plus sign.

    :param prymlab.prym.data.PrymData data: The Prym data.
    :param prymlab.identities.SchroedingerConstants k: The constants.
    :param points: Divisor points, as ``DivisorPoint`` or plain vectors.
    :param float tolerance: Pass threshold.
    :param executor: Optional pool the samples are mapped over.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.
    """
    Ys = [np.asarray(getattr(p, "z", p), dtype=np.complex128) for p in points]
    items = [(Y, sign) for Y in Ys for sign in (-1, 1)]
    residuals = evaluate(lambda item: cm7d_residual(data, k, item[0], item[1], policy), items, executor)
    samples = [
        Sample(n=0, m=0, nu=(sign + 1) // 2, z=tuple(complex(x) for x in Y), residual=r)
        for (Y, sign), r in zip(items, residuals)
    ]
    return _divisor_report("C", samples, tolerance, {"divisor_points": str(len(Ys))})


class TauFamily:
    """
    TauFamily API

    Two sequences of functions τ_n^ν, ν ∈ {0, 1}, with shift vector V and
    constant C, optionally with the numerators α_n^ν of ψ_n^ν = α_n^ν/τ_n^ν.
    """

    def __init__(
        self,
        tau: TauFunction,
        V: ComplexArray,
        C: complex,
        alpha: Optional[TauFunction] = None,
    ):
        self._tau = tau
        self._alpha = alpha
        self.V = np.asarray(V, dtype=np.complex128)
        self.C = complex(C)

    @property
    def has_alpha(self) -> bool:
        return self._alpha is not None

    def tau(self, n: int, nu: int, z: Any) -> complex:
        return self._tau(n, nu % 2, np.asarray(z, dtype=np.complex128))

    def alpha(self, n: int, nu: int, z: Any) -> complex:
        if self._alpha is None:
            raise ValueError("This tau family has no wave function numerators")
        return self._alpha(n, nu % 2, np.asarray(z, dtype=np.complex128))

    def psi(self, n: int, nu: int, z: Any) -> complex:
        return self.alpha(n, nu, z) / self.tau(n, nu, z)

    def u(self, n: int, nu: int, z: Any) -> complex:
        """u_n^ν(z) = C·τ_{n+1}^{ν+1}(z)τ_n^{ν+1}(z+V) / (τ_{n+1}^ν(z+V)τ_n^ν(z))."""
        z = np.asarray(z, dtype=np.complex128)
        V = self.V
        return (
            self.C
            * self.tau(n + 1, nu + 1, z)
            * self.tau(n, nu + 1, z + V)
            / (self.tau(n + 1, nu, z + V) * self.tau(n, nu, z))
        )

    def with_constant(self, C: complex) -> "TauFamily":
        return TauFamily(self._tau, self.V, C, self._alpha)


def prym_tau_family(
    data: PrymData, k: SchroedingerConstants, policy: ThetaPolicy = DEFAULT_POLICY
) -> TauFamily:
    """Tau functions of Prym data with C = c₃.

    τ_n^ν(z) = θ(Un + (1 − ν)W + z)·exp((ν − ½)(L(z)·log c₁ + n·log c₂)) and
    α_n^ν(z) = θ(A + Un + νW + z)·w₁ⁿ w₂^{L(z)} w₃^ν·exp((½ − ν)(L(z)·log c₁ + n·log c₂)),
    where L(z) = (l, z) with l = conj(V)/|V|², so L(z + V) = L(z) + 1.
    """
    l = np.conj(data.V) / np.vdot(data.V, data.V).real
    lc1, lc2, lw2 = np.log(k.c1), np.log(k.c2), np.log(k.w2)

    def exponent(n: int, z: ComplexArray) -> complex:
        return complex(l @ z) * lc1 + n * lc2

    def tau(n: int, nu: int, z: ComplexArray) -> complex:
        value = theta_values(data.Pi, [n * data.U + (1 - nu) * data.W + z], (), policy)[0]
        return complex(value * np.exp((nu - 0.5) * exponent(n, z)))

    def alpha(n: int, nu: int, z: ComplexArray) -> complex:
        value = theta_values(data.Pi, [data.A + n * data.U + nu * data.W + z], (), policy)[0]
        weight = k.w1**n * np.exp(complex(l @ z) * lw2) * k.w3**nu
        return complex(value * weight * np.exp((0.5 - nu) * exponent(n, z)))

    return TauFamily(tau, data.V, k.c3, alpha)


def exponential_tau_family(a: complex, b: Any, V: Any) -> TauFamily:
    """τ_n^ν(z) = exp(an + (b, z)) with C = 1, for which every tau relation is an identity."""
    b = np.asarray(b, dtype=np.complex128)
    return TauFamily(lambda n, nu, z: complex(np.exp(a * n + b @ z)), V, 1.0)


def tau_divisor_point(data: PrymData, Y: Any, n: int, nu: int) -> ComplexArray:
    """The point z = Y − nU − (1 − ν)W of 𝒯_n^ν belonging to a theta zero Y."""
    return np.asarray(Y, dtype=np.complex128) - n * data.U - (1 - nu) * data.W


def taud_terms(family: TauFamily, n: int, nu: int, z: Any) -> Tuple[ComplexArray, ComplexArray]:
    """Both sides of the tau equation at z ∈ 𝒯_n^ν, two products each; the right side carries C²."""
    z = np.asarray(z, dtype=np.complex128)
    V = family.V
    t = family.tau
    left = np.array(
        [
            t(n + 1, nu + 1, z) * t(n, nu + 1, z + V) * t(n - 1, nu, z - V),
            t(n + 1, nu, z + V) * t(n, nu + 1, z - V) * t(n - 1, nu + 1, z),
        ]
    )
    right = family.C**2 * np.array(
        [
            t(n + 1, nu + 1, z) * t(n, nu + 1, z - V) * t(n - 1, nu, z + V),
            t(n + 1, nu, z - V) * t(n, nu + 1, z + V) * t(n - 1, nu + 1, z),
        ]
    )
    return left, right


def residue_relations(family: TauFamily, n: int, nu: int, z: Any) -> List[Tuple[complex, complex, complex]]:
    """(first, second, right) of the four residue relations first − second = right at z ∈ 𝒯_n^ν.

    The left sides are the differences ψ_{n+1}^{ν+1}(z) − ψ_n^{ν+1}(z+V),
    ψ_n^{ν+1}(z−V) − ψ_{n−1}^{ν+1}(z), ψ_{n+1}^{ν+1}(z) − ψ_n^{ν+1}(z−V) and
    ψ_n^{ν+1}(z+V) − ψ_{n−1}^{ν+1}(z); the right sides are α_n^ν(z) times tau
    ratios and powers of C.
    """
    z = np.asarray(z, dtype=np.complex128)
    V, C = family.V, family.C
    t, psi = family.tau, family.psi
    a = family.alpha(n, nu, z)
    return [
        (
            psi(n + 1, nu + 1, z),
            psi(n, nu + 1, z + V),
            -a * t(n + 1, nu, z + V) / (t(n + 1, nu + 1, z) * t(n, nu + 1, z + V)) / C,
        ),
        (
            psi(n, nu + 1, z - V),
            psi(n - 1, nu + 1, z),
            a * t(n - 1, nu, z - V) / (t(n, nu + 1, z - V) * t(n - 1, nu + 1, z)) / C,
        ),
        (
            psi(n + 1, nu + 1, z),
            psi(n, nu + 1, z - V),
            -a * t(n + 1, nu, z - V) / (t(n + 1, nu + 1, z) * t(n, nu + 1, z - V)) * C,
        ),
        (
            psi(n, nu + 1, z + V),
            psi(n - 1, nu + 1, z),
            a * t(n - 1, nu, z + V) / (t(n, nu + 1, z + V) * t(n - 1, nu + 1, z)) * C,
        ),
    ]


def skeleton_residual(family: TauFamily, n: int, nu: int, z: Any) -> float:
    """Distance between the tau equation and the combination of the residue right sides it is assembled from.

    −(C/α)·Π·[(R₁ − R₂) − (R₃ − R₄)] equals the left minus the right side of
    the tau equation, with Π = τ_{n+1}^{ν+1}(z)τ_n^{ν+1}(z+V)τ_n^{ν+1}(z−V)τ_{n−1}^{ν+1}(z).
    """
    z = np.asarray(z, dtype=np.complex128)
    V, C = family.V, family.C
    t = family.tau
    rights = [r for _, _, r in residue_relations(family, n, nu, z)]
    weight = t(n + 1, nu + 1, z) * t(n, nu + 1, z + V) * t(n, nu + 1, z - V) * t(n - 1, nu + 1, z)
    assembled = -C / family.alpha(n, nu, z) * weight * ((rights[0] - rights[1]) - (rights[2] - rights[3]))
    left, right = taud_terms(family, n, nu, z)
    return relative_residual(assembled - (np.sum(left) - np.sum(right)), list(left) + list(right))


def tau_residual(family: TauFamily, n: int, nu: int, z: Any) -> Dict[str, float]:
    """Residuals of the tau equation and, when α is known, of the residue relations and the skeleton."""
    left, right = taud_terms(family, n, nu, z)
    out = {"taud": relative_residual(complex(np.sum(left) - np.sum(right)), list(left) + list(right))}
    if family.has_alpha:
        for i, (first, second, rhs) in enumerate(residue_relations(family, n, nu, z), start=1):
            out[f"r{i}"] = relative_residual(first - second - rhs, [first, second, rhs])
        out["skeleton"] = skeleton_residual(family, n, nu, z)
    return out


def verify_tau_residues(
    family: TauFamily,
    sites: Sequence[Tuple[int, int, Any]],
    tolerance: float = 1e-8,
    executor: Optional[Executor] = None,
) -> IdentityReport:
    """Checks the tau equation and the residue relations at points (n, ν, z) with τ_n^ν(z) = 0.

    Each sample's residual is the largest of its component residuals; the
    largest value of every component is recorded in the notes.
    """
    results = evaluate(lambda site: tau_residual(family, site[0], site[1], site[2]), sites, executor)
    samples = [
        Sample(n=n, m=0, nu=nu, z=tuple(complex(x) for x in np.asarray(z)), residual=max(r.values()))
        for (n, nu, z), r in zip(sites, results)
    ]
    notes = {key: f"{max(r[key] for r in results):.3e}" for key in (results[0] if results else {})}
    return _divisor_report("tau", samples, tolerance, notes)


def recursion_expressions(family: TauFamily, n: int, nu: int, z: Any) -> Tuple[complex, complex, float]:
    """The two values of the first correction on 𝒯_n^ν from the shifted and unshifted recursions.

    E₁ = [C²τ_{n−1}^ν(z+V)τ_{n+1}^{ν+1}(z) − τ_{n+1}^ν(z+V)τ_{n−1}^{ν+1}(z)]/τ_n^{ν+1}(z+V) and
    E₂ = [τ_{n+1}^{ν+1}(z)τ_{n−1}^ν(z−V) − C²τ_{n−1}^{ν+1}(z)τ_{n+1}^ν(z−V)]/τ_n^{ν+1}(z−V).

    :return: (E₁, E₂, largest term magnitude).
    """
    z = np.asarray(z, dtype=np.complex128)
    V, C = family.V, family.C
    t = family.tau
    plus = t(n, nu + 1, z + V)
    minus = t(n, nu + 1, z - V)
    terms1 = (C**2 * t(n - 1, nu, z + V) * t(n + 1, nu + 1, z) / plus, t(n + 1, nu, z + V) * t(n - 1, nu + 1, z) / plus)
    terms2 = (t(n + 1, nu + 1, z) * t(n - 1, nu, z - V) / minus, C**2 * t(n - 1, nu + 1, z) * t(n + 1, nu, z - V) / minus)
    scale = max(abs(x) for x in terms1 + terms2)
    return terms1[0] - terms1[1], terms2[0] - terms2[1], scale


def verify_recursion_consistency(
    family: TauFamily,
    sites: Sequence[Tuple[int, int, Any]],
    tolerance: float = 1e-8,
    executor: Optional[Executor] = None,
) -> IdentityReport:
    """Checks that both expressions for the first wave function correction agree on 𝒯_n^ν."""

    def check(site: Tuple[int, int, Any]) -> float:
        first, second, scale = recursion_expressions(family, *site)
        return abs(first - second) / scale if scale > 0 else 0.0

    residuals = evaluate(check, sites, executor)
    samples = [
        Sample(n=n, m=0, nu=nu, z=tuple(complex(x) for x in np.asarray(z)), residual=r)
        for (n, nu, z), r in zip(sites, residuals)
    ]
    return _divisor_report("recursion", samples, tolerance, {})


def tau_sites(data: PrymData, points: Sequence[Any]) -> List[Tuple[int, int, ComplexArray]]:
    """Sites (n, ν, z) on 𝒯_n^ν generated from theta zeros, cycling through ``TAU_SITES``."""
    sites: List[Tuple[int, int, ComplexArray]] = []
    for i, p in enumerate(points):
        n, nu = TAU_SITES[i % len(TAU_SITES)]
        sites.append((n, nu, tau_divisor_point(data, getattr(p, "z", p), n, nu)))
    return sites
