#!/usr/bin/env python3
import logging
from concurrent.futures import Executor
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from ..base import NearDivisor, ThetaPolicy
from ..prym.data import PrymData
from ..theta import ComplexArray, PeriodMatrix
from ..theta.riemann import DEFAULT_POLICY, theta_batch

logger = logging.getLogger(__name__)

#: Denominator thetas below this fraction of the largest theta in the same expression are rejected.
NEAR_DIVISOR_RATIO = 1e-12

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class SchroedingerConstants:
    """
    SchroedingerConstants API

    The six constants c₁, c₂, c₃, w₁, w₂, w₃ of the lattice potential u and the
    wave function ψ.
    """

    c1: complex
    c2: complex
    c3: complex
    w1: complex
    w2: complex
    w3: complex

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if value == 0 or not np.isfinite(value):
                raise ValueError(f"Constant {name} must be finite and nonzero, got {value}")

    def as_dict(self) -> Dict[str, complex]:
        return {
            "c1": complex(self.c1),
            "c2": complex(self.c2),
            "c3": complex(self.c3),
            "w1": complex(self.w1),
            "w2": complex(self.w2),
            "w3": complex(self.w3),
        }

    def as_array(self) -> ComplexArray:
        return np.array(list(self.as_dict().values()), dtype=np.complex128)

    @classmethod
    def from_array(cls, values: Sequence[complex]) -> "SchroedingerConstants":
        c1, c2, c3, w1, w2, w3 = (complex(v) for v in values)
        return cls(c1, c2, c3, w1, w2, w3)

    @classmethod
    def ones(cls) -> "SchroedingerConstants":
        return cls(1, 1, 1, 1, 1, 1)

    def inverted_parity(self) -> "SchroedingerConstants":
        """Constants of the relabelled convention ν → 1 − ν: c₁, c₂, w₃ are inverted."""
        return replace(self, c1=1 / self.c1, c2=1 / self.c2, w3=1 / self.w3)


@dataclass(frozen=True)
class LatticeIndex:
    """A lattice site (n, m) and its parity label ν.

    ν = 0 exactly when n + m is even; ``flipped`` selects the relabelled
    convention with ν and 1 − ν exchanged.
    """

    n: int
    m: int
    flipped: bool = False

    @property
    def nu(self) -> int:
        parity = (self.n + self.m) % 2
        return 1 - parity if self.flipped else parity

    def shifted(self, dn: int, dm: int) -> "LatticeIndex":
        return LatticeIndex(self.n + dn, self.m + dm, self.flipped)


def flip_parity(data: PrymData, constants: SchroedingerConstants) -> Tuple[PrymData, SchroedingerConstants]:
    """Data and constants of the relabelled parity convention.

    With W → −W and the arguments moved by W, fields evaluated with
    ``LatticeIndex(..., flipped=True)`` reproduce u exactly and ψ up to the
    constant factor 1/w₃.
    """
    return data.with_vectors(W=-data.W), constants.inverted_parity()


def theta_values(
    Pi: PeriodMatrix,
    args: Sequence[Any],
    denominators: Iterable[int] = (),
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> ComplexArray:
    """Evaluates θ at every argument in one batch.

    :param prymlab.theta.PeriodMatrix Pi: The period matrix.
    :param args: Complex g-vectors.
    :param denominators: Indices of arguments whose theta value is divided by.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :raises NearDivisor: A denominator is below ``NEAR_DIVISOR_RATIO`` times the largest value.
    """
    values = theta_batch(Pi, np.stack([np.asarray(a, dtype=np.complex128) for a in args]), policy)
    scale = float(np.max(np.abs(values)))
    for i in denominators:
        if abs(values[i]) <= NEAR_DIVISOR_RATIO * scale:
            raise NearDivisor(f"|θ| = {abs(values[i]):.3e} at a denominator, scale {scale:.3e}")
    return values


def evaluate(fn: Callable[[T], R], items: Sequence[T], executor: Optional[Executor] = None) -> List[R]:
    """Maps ``fn`` over ``items`` on the executor, keeping the input order."""
    if executor is None:
        return [fn(item) for item in items]
    return list(executor.map(fn, items))


def random_arguments(Pi: PeriodMatrix, rng: np.random.Generator, count: int, spread: float = 0.25) -> List[ComplexArray]:
    """Random points p + Πq with p uniform in [0, 1)^g and q uniform in [−spread, spread]^g."""
    return [
        Pi.lattice_vector(rng.uniform(0.0, 1.0, Pi.g), rng.uniform(-spread, spread, Pi.g)) for _ in range(count)
    ]


from .lattice import (  # type: ignore  # noqa: E402, F401
    psi_field,
    u_field,
    verify_A,
    verify_five_term,
    verify_quad,
)
from .kummer import recover_constants, verify_B  # type: ignore  # noqa: E402, F401
from .divisor import (  # type: ignore  # noqa: E402, F401
    sample_divisor_points,
    verify_C,
    verify_recursion_consistency,
    verify_tau_residues,
)
from .genus1 import verify_general_four_point_genus1  # type: ignore  # noqa: E402, F401
