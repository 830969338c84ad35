#!/usr/bin/env python3
import logging
from itertools import combinations, product
from typing import Any, List, Sequence, Tuple

import numpy as np

from ..base import DegenerateConfiguration, IdentityReport, Sample, ThetaPolicy, relative_residual
from ..theta import PeriodMatrix, theta_gradient, validate_period_matrix
from ..theta.riemann import DEFAULT_POLICY, theta_batch, theta_characteristic_batch

logger = logging.getLogger(__name__)

ODD = ([0.5], [0.5])


class FourPointWave:
    """
    FourPointWave API

    The genus-1 wave function with poles of order n at q₁⁺ and m at q₂⁺, zeros at
    q₁⁻ and q₂⁻ and one simple pole at γ₁:

    ψ(n, m; z) = θ(z + nÛ + mV̂ + Ẑ)/θ(z + Ẑ)·[θ₁(z − q₁⁻)/θ₁(z − q₁⁺)]ⁿ·[θ₁(z − q₂⁻)/θ₁(z − q₂⁺)]^m,

    with Û = q₁⁻ − q₁⁺, V̂ = q₂⁻ − q₂⁺, Ẑ = (1 + τ)/2 − γ₁ and θ₁ the odd theta.
    """

    def __init__(
        self,
        tau: complex,
        q1: Tuple[complex, complex],
        q2: Tuple[complex, complex],
        gamma: complex,
        policy: ThetaPolicy = DEFAULT_POLICY,
    ):
        self.B: PeriodMatrix = validate_period_matrix([[tau]])
        self.q1_plus, self.q1_minus = (complex(q) for q in q1)
        self.q2_plus, self.q2_minus = (complex(q) for q in q2)
        self.gamma = complex(gamma)
        self.policy = policy
        points = {
            "q1+": self.q1_plus,
            "q1-": self.q1_minus,
            "q2+": self.q2_plus,
            "q2-": self.q2_minus,
            "gamma": self.gamma,
        }
        for (a, x), (b, y) in combinations(points.items(), 2):
            if self.B.distance_to_lattice([x - y]) < 1e-8:
                raise DegenerateConfiguration(f"{a} and {b} coincide modulo the lattice")
        self.U = self.q1_minus - self.q1_plus
        self.V = self.q2_minus - self.q2_plus
        self.Z = (1 + complex(tau)) / 2 - self.gamma
        # θ₁′(0) through the characteristic prefactor, since θ₁(0) = 0
        shift = complex(tau) / 2 + 0.5
        prefactor = np.exp(1j * np.pi * complex(tau) / 4 + 2j * np.pi * 0.25)
        self.odd_slope = complex(prefactor * theta_gradient(self.B, [shift], policy)[0])

    def theta(self, z: complex) -> complex:
        return complex(theta_batch(self.B, [[z]], self.policy)[0])

    def odd_theta(self, z: complex) -> complex:
        return complex(theta_characteristic_batch(self.B, [[z]], *ODD, self.policy)[0])

    def psi(self, n: int, m: int, z: complex) -> complex:
        first = self.odd_theta(z - self.q1_minus) / self.odd_theta(z - self.q1_plus)
        second = self.odd_theta(z - self.q2_minus) / self.odd_theta(z - self.q2_plus)
        return self.theta(z + n * self.U + m * self.V + self.Z) / self.theta(z + self.Z) * first**n * second**m

    def _leading(self, q: complex, n: int, m: int, own: Tuple[complex, complex], other: Tuple[complex, complex], pole: bool, power: int) -> complex:
        """Leading coefficient of ψ in the local coordinate at a marked point."""
        theta_part = self.theta(q + n * self.U + m * self.V + self.Z) / self.theta(q + self.Z)
        own_plus, own_minus = own
        if pole:
            local = self.odd_theta(q - own_minus) / self.odd_slope
        else:
            local = self.odd_slope / self.odd_theta(q - own_plus)
        other_plus, other_minus = other
        remote = self.odd_theta(q - other_minus) / self.odd_theta(q - other_plus)
        own_power, other_power = (n, m) if power == 1 else (m, n)
        return theta_part * local**own_power * remote**other_power

    def xi_plus(self, n: int, m: int) -> complex:
        """Coefficient of kⁿ at q₁⁺, k = 1/(z − q₁⁺)."""
        q1, q2 = (self.q1_plus, self.q1_minus), (self.q2_plus, self.q2_minus)
        return self._leading(self.q1_plus, n, m, q1, q2, True, 1)

    def xi_minus(self, n: int, m: int) -> complex:
        """Coefficient of k^{−n} at q₁⁻, k = 1/(z − q₁⁻)."""
        q1, q2 = (self.q1_plus, self.q1_minus), (self.q2_plus, self.q2_minus)
        return self._leading(self.q1_minus, n, m, q1, q2, False, 1)

    def chi_plus(self, n: int, m: int) -> complex:
        """Coefficient of k^m at q₂⁺."""
        q1, q2 = (self.q1_plus, self.q1_minus), (self.q2_plus, self.q2_minus)
        return self._leading(self.q2_plus, n, m, q2, q1, True, 2)

    def chi_minus(self, n: int, m: int) -> complex:
        """Coefficient of k^{−m} at q₂⁻."""
        q1, q2 = (self.q1_plus, self.q1_minus), (self.q2_plus, self.q2_minus)
        return self._leading(self.q2_minus, n, m, q2, q1, False, 2)

    def coefficients(self, n: int, m: int) -> Tuple[complex, complex, complex, complex]:
        """(a, b, c, c′) of ψ_{n+1,m+1} − aψ_{n+1,m} − bψ_{n,m+1} + cψ_{n,m} = 0.

        a and b match the poles at q₁⁺ and q₂⁺; c comes from the zero at q₁⁻ and
        c′ from the zero at q₂⁻, so c = c′ is a consistency check.
        """
        a = self.xi_plus(n + 1, m + 1) / self.xi_plus(n + 1, m)
        b = self.chi_plus(n + 1, m + 1) / self.chi_plus(n, m + 1)
        c = b * self.xi_minus(n, m + 1) / self.xi_minus(n, m)
        c_other = a * self.chi_minus(n + 1, m) / self.chi_minus(n, m)
        return a, b, c, c_other


def verify_general_four_point_genus1(
    elliptic_tau: complex,
    marked: Tuple[complex, complex, complex, complex],
    gamma: complex,
    window: Tuple[Sequence[int], Sequence[int]],
    z_points: Sequence[Any],
    tolerance: float = 1e-8,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> IdentityReport:
    """Checks the four-point difference equation of a genus-1 wave function.

    :param complex elliptic_tau: Modulus of the elliptic curve ℂ/⟨1, τ⟩.
    :param marked: (q₁⁺, q₁⁻, q₂⁺, q₂⁻).
    :param complex gamma: The divisor point γ₁.
    :param window: (n range, m range).
    :param z_points: Points at which the equation is evaluated.
    :param float tolerance: Pass threshold.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: The residual report; note ``c_mismatch`` records the largest relative
        distance between the two expressions for c.
    :rtype: prymlab.base.IdentityReport

    :raises DegenerateConfiguration: Two of the marked points or γ₁ coincide.
    """
    wave = FourPointWave(elliptic_tau, (marked[0], marked[1]), (marked[2], marked[3]), gamma, policy)
    samples: List[Sample] = []
    mismatch = 0.0
    ns, ms = window
    for n, m in product(ns, ms):
        a, b, c, c_other = wave.coefficients(n, m)
        mismatch = max(mismatch, abs(c - c_other) / max(abs(c), abs(c_other)))
        for z in z_points:
            z = complex(np.asarray(z).reshape(-1)[0])
            terms = [
                wave.psi(n + 1, m + 1, z),
                -a * wave.psi(n + 1, m, z),
                -b * wave.psi(n, m + 1, z),
                c * wave.psi(n, m, z),
            ]
            samples.append(Sample(n=n, m=m, nu=(n + m) % 2, z=(z,), residual=relative_residual(sum(terms), terms)))
    report = IdentityReport.from_samples("four_point", samples, tolerance, {"c_mismatch": f"{mismatch:.3e}"})
    log = logger.info if report.passed else logger.warning
    log(f"four_point: max residual {report.max_rel_residual:.3e}, c mismatch {mismatch:.3e}")
    return report
