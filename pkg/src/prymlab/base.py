#!/usr/bin/env python3
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple


class PrymlabError(Exception):
    """Base class of every error raised by prymlab.

    .. note::
        Errors split into ``ValidationError`` (the input is unusable) and
        ``NumericError`` (a computation could not reach its accuracy target).
    """


class ValidationError(PrymlabError):
    """The supplied data violate a precondition."""


class NumericError(PrymlabError):
    """A numeric procedure failed to meet its tolerance."""


class NotSymmetric(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class NotSquarefree(ValidationError):
    pass


class RamifiedAtZero(ValidationError):
    pass


class BadDegree(ValidationError):
    pass


class DegenerateMarkedPoints(ValidationError):
    pass


class DegenerateQuadruple(ValidationError):
    pass


class DegenerateConfiguration(ValidationError):
    pass


class ConfigError(ValidationError):
    """A run configuration could not be parsed.

    :param str field_path: Dotted path of the offending field, e.g. ``marked_x[1]``.
    :param str message: What is wrong with it.
    """

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class RadiusCapExceeded(NumericError):
    pass


class ZeroVector(NumericError):
    pass


class NoConvergence(NumericError):
    pass


class QuadratureNoConvergence(NumericError):
    pass


class SingularAPeriods(NumericError):
    pass


class PathThroughBranchPoint(NumericError):
    pass


class NearDivisor(NumericError):
    pass


class ZeroCoefficient(NumericError):
    pass


class InconsistentSystem(NumericError):
    pass


class WindowExhausted(NumericError):
    pass


class TruncationTooShallow(NumericError):
    pass


class CompatibilityFailure(NumericError):
    pass


class NonInvertibleLeading(NumericError):
    pass


class RankDeficientFit(NumericError):
    pass


class Side(IntEnum):
    """Enumeration specifying in which direction a pseudodifference series is infinite."""

    #: Series in descending powers of T₁; terms below the truncation are unknown.
    PLUS = 1

    #: Series in ascending powers of T₁; terms above the truncation are unknown.
    MINUS = -1


class Direction(IntEnum):
    """Enumeration specifying how T₂ is eliminated modulo the ideal generated by H."""

    #: Replace T₂ by a series in descending powers of T₁.
    PLUS = 1

    #: Replace T₂ by a series in ascending powers of T₁.
    MINUS = -1

    #: Finite normal form without mixed monomials T₁^i T₂^j, i·j ≠ 0.
    CROSS = 0


class Flavor(IntEnum):
    """Enumeration specifying the shift variables an operator uses."""

    #: Only powers of T₁ occur.
    ONE_VARIABLE = 1

    #: Powers of T₁ and T₂ occur.
    TWO_VARIABLE = 2


class ExitCode(IntEnum):
    """Process exit codes of the ``prymlab`` command."""

    #: Every requested identity passed.
    PASS = 0

    #: At least one identity failed.
    FAIL = 1

    #: The configuration or the input data were rejected.
    CONFIG_ERROR = 2

    #: A numeric procedure failed.
    NUMERIC_ERROR = 3


@dataclass(frozen=True)
class ThetaPolicy:
    """Truncation policy of the lattice sums.

    :param float target_abs_error: Bound on the omitted Gaussian tail after argument reduction.
    :param int max_radius: Cap on the enumeration box half-width in every lattice direction.
    """

    target_abs_error: float = 1e-14
    max_radius: int = 30

    def __post_init__(self):
        if not self.target_abs_error > 0:
            raise ValueError(f"target_abs_error must be positive, got {self.target_abs_error}")
        if self.max_radius < 1:
            raise ValueError(f"max_radius must be positive, got {self.max_radius}")


@dataclass(frozen=True)
class Sample:
    """One evaluated instance of an identity."""

    n: int
    m: int
    nu: int
    z: Tuple[complex, ...]
    residual: float


@dataclass
class IdentityReport:
    """Residual statistics of one verified identity.

    ``passed`` holds exactly when ``max_rel_residual`` does not exceed ``tolerance``.
    """

    name: str
    sample_count: int
    max_rel_residual: float
    mean_rel_residual: float
    tolerance: float
    passed: bool
    samples: List[Sample] = field(default_factory=list)  # type: ignore
    notes: Dict[str, str] = field(default_factory=dict)  # type: ignore

    @classmethod
    def from_samples(
        cls,
        name: str,
        samples: Sequence[Sample],
        tolerance: float,
        notes: Optional[Dict[str, str]] = None,
    ) -> "IdentityReport":
        """Aggregates samples in their given order.

        :param str name: Identity name as it appears in reports.
        :param samples: Evaluated samples, already sorted by index.
        :param float tolerance: Pass threshold for the maximum residual.
        :param notes: Free-form annotations carried into the report.

        :return: The aggregated report. An empty sample list never passes.
        :rtype: IdentityReport
        """
        residuals = [s.residual for s in samples]
        if residuals:
            max_res = max(residuals)
            mean_res = sum(residuals) / len(residuals)
        else:
            max_res = float("inf")
            mean_res = float("inf")
        return cls(
            name=name,
            sample_count=len(residuals),
            max_rel_residual=max_res,
            mean_rel_residual=mean_res,
            tolerance=tolerance,
            passed=bool(residuals) and max_res <= tolerance,
            samples=list(samples),
            notes=dict(notes or {}),
        )


def relative_residual(difference: complex, terms: Sequence[complex]) -> float:
    """Returns ``|difference|`` divided by the largest participating term magnitude."""
    scale = max(abs(t) for t in terms)
    if scale == 0.0:
        return 0.0 if difference == 0 else float("inf")
    return abs(difference) / scale


def hex_float(x: float) -> str:
    return float(x).hex()


def unhex_float(s: str) -> float:
    return float.fromhex(s)


def hex_complex(z: complex) -> List[str]:
    """Encodes a complex number as ``[re.hex(), im.hex()]`` for bit-exact reload."""
    z = complex(z)
    return [z.real.hex(), z.imag.hex()]


def unhex_complex(pair: Sequence[str]) -> complex:
    return complex(float.fromhex(pair[0]), float.fromhex(pair[1]))
