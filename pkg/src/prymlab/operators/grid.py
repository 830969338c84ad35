#!/usr/bin/env python3
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Union

import numpy as np

from ..base import WindowExhausted, hex_complex, unhex_complex
from ..theta import ComplexArray

Scalar = Union[int, float, complex]


@dataclass(frozen=True)
class Window:
    """Inclusive ranges n_lo … n_hi and m_lo … m_hi of lattice sites."""

    n_lo: int
    n_hi: int
    m_lo: int
    m_hi: int

    @property
    def empty(self) -> bool:
        return self.n_lo > self.n_hi or self.m_lo > self.m_hi

    @property
    def shape(self):
        return (self.n_hi - self.n_lo + 1, self.m_hi - self.m_lo + 1)

    def ns(self) -> range:
        return range(self.n_lo, self.n_hi + 1)

    def ms(self) -> range:
        return range(self.m_lo, self.m_hi + 1)

    def shifted(self, i: int, j: int) -> "Window":
        """Window of t₁^i t₂^j f: site (n, m) reads f at (n + i, m + j)."""
        return Window(self.n_lo - i, self.n_hi - i, self.m_lo - j, self.m_hi - j)

    def intersect(self, other: "Window") -> "Window":
        return Window(
            max(self.n_lo, other.n_lo),
            min(self.n_hi, other.n_hi),
            max(self.m_lo, other.m_lo),
            min(self.m_hi, other.m_hi),
        )

    def shrink(self, n_lo: int = 0, n_hi: int = 0, m_lo: int = 0, m_hi: int = 0) -> "Window":
        return Window(self.n_lo + n_lo, self.n_hi - n_hi, self.m_lo + m_lo, self.m_hi - m_hi)

    def contains(self, other: "Window") -> bool:
        return (
            self.n_lo <= other.n_lo
            and other.n_hi <= self.n_hi
            and self.m_lo <= other.m_lo
            and other.m_hi <= self.m_hi
        )

    def require(self, label: str = "result") -> "Window":
        if self.empty:
            raise WindowExhausted(f"The {label} window {self} is empty")
        return self


class ComplexGrid:
    """
    ComplexGrid API

    Complex values on every site of a window. Arithmetic between grids is
    carried out on the intersection of their windows; shifting moves the
    window instead of dropping values.
    """

    def __init__(self, window: Window, values: Any):
        window.require("grid")
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != window.shape:
            raise ValueError(f"Values of shape {values.shape} do not fit window {window}")
        self._window = window
        self._values = values

    @property
    def window(self) -> Window:
        return self._window

    @property
    def values(self) -> ComplexArray:
        return self._values

    @classmethod
    def constant(cls, window: Window, value: Scalar) -> "ComplexGrid":
        return cls(window, np.full(window.shape, value, dtype=np.complex128))

    @classmethod
    def from_function(cls, window: Window, fn: Callable[[int, int], complex]) -> "ComplexGrid":
        return cls(window, [[fn(n, m) for m in window.ms()] for n in window.ns()])

    def at(self, n: int, m: int) -> complex:
        w = self._window
        if not (w.n_lo <= n <= w.n_hi and w.m_lo <= m <= w.m_hi):
            raise IndexError(f"Site ({n}, {m}) lies outside {w}")
        return complex(self._values[n - w.n_lo, m - w.m_lo])

    def restrict(self, window: Window) -> "ComplexGrid":
        if window == self._window:
            return self
        if not self._window.contains(window.require("restricted")):
            raise WindowExhausted(f"{window} is not inside {self._window}")
        w = self._window
        return ComplexGrid(
            window,
            self._values[
                window.n_lo - w.n_lo : window.n_hi - w.n_lo + 1,
                window.m_lo - w.m_lo : window.m_hi - w.m_lo + 1,
            ],
        )

    def shift(self, i: int, j: int = 0) -> "ComplexGrid":
        """The grid t₁^i t₂^j f with values f(n + i, m + j)."""
        if i == 0 and j == 0:
            return self
        return ComplexGrid(self._window.shifted(i, j), self._values)

    def _binary(self, other: Any, op: Callable[[Any, Any], Any]) -> "ComplexGrid":
        if isinstance(other, ComplexGrid):
            window = self._window.intersect(other._window).require()
            return ComplexGrid(window, op(self.restrict(window)._values, other.restrict(window)._values))
        return ComplexGrid(self._window, op(self._values, other))

    def __add__(self, other: Any) -> "ComplexGrid":
        return self._binary(other, np.add)

    def __radd__(self, other: Any) -> "ComplexGrid":
        return self._binary(other, lambda a, b: b + a)

    def __sub__(self, other: Any) -> "ComplexGrid":
        return self._binary(other, np.subtract)

    def __rsub__(self, other: Any) -> "ComplexGrid":
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other: Any) -> "ComplexGrid":
        return self._binary(other, np.multiply)

    def __rmul__(self, other: Any) -> "ComplexGrid":
        return self._binary(other, lambda a, b: b * a)

    def __truediv__(self, other: Any) -> "ComplexGrid":
        return self._binary(other, np.divide)

    def __rtruediv__(self, other: Any) -> "ComplexGrid":
        return self._binary(other, lambda a, b: b / a)

    def __neg__(self) -> "ComplexGrid":
        return ComplexGrid(self._window, -self._values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._values)))

    def min_abs(self) -> float:
        return float(np.min(np.abs(self._values)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self._values)))

    def to_json(self) -> Dict[str, Any]:
        w = self._window
        return {
            "window": [w.n_lo, w.n_hi, w.m_lo, w.m_hi],
            "values": [[hex_complex(x) for x in row] for row in self._values],
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "ComplexGrid":
        return cls(Window(*doc["window"]), [[unhex_complex(x) for x in row] for row in doc["values"]])

    def __repr__(self) -> str:
        return f"ComplexGrid({self._window}, max |value| {self.max_abs():.3e})"


def relative_difference(a: ComplexGrid, b: ComplexGrid, window: Optional[Window] = None) -> float:
    """max |a − b| / max(max |a|, max |b|) on the common window."""
    common = a.window.intersect(b.window)
    if window is not None:
        common = common.intersect(window)
    common.require("comparison")
    x, y = a.restrict(common).values, b.restrict(common).values
    scale = max(float(np.max(np.abs(x))), float(np.max(np.abs(y))))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(x - y))) / scale
