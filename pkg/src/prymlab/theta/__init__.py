#!/usr/bin/env python3
from functools import cached_property
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy import linalg  # type: ignore

from ..base import NotPositiveDefinite, NotSymmetric

ComplexArray = NDArray[np.complex128]
RealArray = NDArray[np.float64]


class PeriodMatrix:
    """
    PeriodMatrix API

    A complex symmetric g×g matrix with positive definite imaginary part, together
    with the derived quantities every lattice sum needs (the Cholesky factor of
    π·Im B, its inverse and the length of the shortest lattice vector).

    Instances are immutable once validated; use ``validate_period_matrix()`` to build one.
    """

    def __init__(self, entries: ComplexArray, cholesky: RealArray):
        self._entries = entries
        self._entries.setflags(write=False)
        #: Upper triangular T with TᵀT = π·Im B.
        self.cholesky = cholesky
        self.cholesky.setflags(write=False)

    @property
    def g(self) -> int:
        return int(self._entries.shape[0])

    @property
    def entries(self) -> ComplexArray:
        return self._entries

    @cached_property
    def imag(self) -> RealArray:
        return np.ascontiguousarray(self._entries.imag)

    @cached_property
    def imag_inv(self) -> RealArray:
        return linalg.inv(self.imag)  # type: ignore

    @cached_property
    def pi_imag_inv(self) -> RealArray:
        """Inverse of π·Im B, whose diagonal bounds the enumeration box."""
        return self.imag_inv / np.pi

    @cached_property
    def shortest_vector(self) -> float:
        """Length of the shortest nonzero vector of the lattice spanned by ``cholesky``.

        .. note::
            Searched in the box [-3, 3]^g; inputs are assumed reasonably reduced
            since no Siegel reduction is performed.
        """
        axes = [np.arange(-3, 4)] * self.g
        points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.g)
        points = points[np.any(points != 0, axis=1)]
        return float(np.min(np.linalg.norm(points @ self.cholesky.T, axis=1)))

    @cached_property
    def doubled(self) -> "PeriodMatrix":
        """The matrix 2B used by the second order thetas."""
        return PeriodMatrix(2.0 * self._entries, np.sqrt(2.0) * self.cholesky)

    def lattice_vector(self, p: Any, q: Any) -> ComplexArray:
        """Returns p + Bq for integer vectors p and q."""
        return np.asarray(p, dtype=np.complex128) + self._entries @ np.asarray(q, dtype=np.complex128)

    def lattice_coordinates(self, w: Any) -> RealArray:
        """Returns the real coordinates (p, q) with w = p + Bq, stacked as one 2g vector."""
        w = np.asarray(w, dtype=np.complex128)
        q = self.imag_inv @ w.imag
        p = w.real - self._entries.real @ q
        return np.concatenate([p, q])

    def distance_to_lattice(self, w: Any) -> float:
        """Max-norm distance of the real lattice coordinates of ``w`` to the nearest integers."""
        coords = self.lattice_coordinates(w)
        return float(np.max(np.abs(coords - np.round(coords))))

    def __repr__(self) -> str:
        return f"PeriodMatrix(g={self.g}, entries={self._entries.tolist()!r})"


def validate_period_matrix(M: Any, symmetry_tolerance: float = 0.0) -> PeriodMatrix:
    """Validates a candidate period matrix.

    :param M: A square complex matrix (any nested sequence numpy accepts).
    :param float symmetry_tolerance: Largest accepted entrywise asymmetry. The
        default demands exact symmetry of the supplied entries; a positive
        tolerance symmetrizes the accepted matrix.

    :return: The validated matrix.
    :rtype: prymlab.theta.PeriodMatrix

    :raises NotSymmetric: The asymmetry exceeds ``symmetry_tolerance``.
    :raises NotPositiveDefinite: The Cholesky factorization of Im M fails.
    """
    entries = np.array(M, dtype=np.complex128, copy=True)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] == 0:
        raise ValueError(f"Period matrix must be square, got shape {entries.shape}")
    asymmetry = float(np.max(np.abs(entries - entries.T)))
    if asymmetry > symmetry_tolerance:
        raise NotSymmetric(f"Period matrix asymmetry {asymmetry:.3e} exceeds {symmetry_tolerance:.3e}")
    if symmetry_tolerance > 0.0:
        entries = 0.5 * (entries + entries.T)
    try:
        cholesky = linalg.cholesky(np.pi * entries.imag, lower=False)  # type: ignore
    except linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Imaginary part is not positive definite: {e}") from e
    return PeriodMatrix(entries, np.asarray(cholesky, dtype=np.float64))


from .riemann import theta  # type: ignore  # noqa: E402, F401
from .riemann import theta_batch  # type: ignore  # noqa: E402, F401
from .riemann import theta_characteristic  # type: ignore  # noqa: E402, F401
from .riemann import theta_directional_derivative  # type: ignore  # noqa: E402, F401
from .riemann import theta_gradient  # type: ignore  # noqa: E402, F401
from .riemann import theta_log  # type: ignore  # noqa: E402, F401
from .riemann import theta_log_gradient  # type: ignore  # noqa: E402, F401
from .riemann import theta_quasi_factor  # type: ignore  # noqa: E402, F401
from .kummer import KummerPoint  # type: ignore  # noqa: E402, F401
from .kummer import kummer  # type: ignore  # noqa: E402, F401
from .kummer import theta_second_order  # type: ignore  # noqa: E402, F401
from .divisor import DivisorPoint  # type: ignore  # noqa: E402, F401
from .divisor import find_theta_zero  # type: ignore  # noqa: E402, F401
