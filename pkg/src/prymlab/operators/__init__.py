#!/usr/bin/env python3
import logging
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple

from ..base import Flavor, NonInvertibleLeading, Side, WindowExhausted
from .grid import ComplexGrid, Window

logger = logging.getLogger(__name__)

#: Default number of T₁ orders carried by formal series.
DEFAULT_DEPTH = 8

#: Leading coefficients below this magnitude are not inverted.
LEADING_FLOOR = 1e-12

Exponent = Tuple[int, int]


def _retained(i: int, side: Side, truncation: Optional[int]) -> bool:
    if truncation is None:
        return True
    return i >= truncation if side == Side.PLUS else i <= truncation


class PseudoDiffOp:
    """
    PseudoDiffOp API

    A pseudodifference operator Σ a_ij T₁^i T₂^j with coefficients to the left.
    The shift T₁ acts on sequences by (T₁ψ)(n, m) = ψ(n + 1, m), and T₂ by
    (T₂ψ)(n, m) = ψ(n, m + 1).

    An operator is either exact (``truncation`` is None, finitely many terms)
    or a truncated series: on ``Side.PLUS`` every T₁ exponent below
    ``truncation`` is unknown, on ``Side.MINUS`` every exponent above it.
    All coefficient grids share one window, the intersection of the windows
    the coefficients were given on.
    """

    def __init__(
        self,
        terms: Mapping[Exponent, ComplexGrid],
        window: Window,
        side: Side = Side.PLUS,
        truncation: Optional[int] = None,
    ):
        kept = {key: grid for key, grid in terms.items() if _retained(key[0], side, truncation)}
        for grid in kept.values():
            window = window.intersect(grid.window)
        window.require("operator")
        self._window = window
        self._side = Side(side)
        self._truncation = truncation
        self._terms: Dict[Exponent, ComplexGrid] = {
            key: kept[key].restrict(window) for key in sorted(kept)
        }

    @property
    def window(self) -> Window:
        return self._window

    @property
    def side(self) -> Side:
        return self._side

    @property
    def truncation(self) -> Optional[int]:
        return self._truncation

    @property
    def exact(self) -> bool:
        return self._truncation is None

    @property
    def flavor(self) -> Flavor:
        if all(j == 0 for _, j in self._terms):
            return Flavor.ONE_VARIABLE
        return Flavor.TWO_VARIABLE

    @property
    def terms(self) -> Dict[Exponent, ComplexGrid]:
        return dict(self._terms)

    def items(self) -> Iterator[Tuple[Exponent, ComplexGrid]]:
        return iter(self._terms.items())

    def t1_exponents(self) -> List[int]:
        return sorted({i for i, _ in self._terms})

    def max_t1(self) -> int:
        return max(i for i, _ in self._terms)

    def min_t1(self) -> int:
        return min(i for i, _ in self._terms)

    def coefficient(self, i: int, j: int = 0) -> ComplexGrid:
        """The coefficient of T₁^i T₂^j, a zero grid when the term is absent."""
        grid = self._terms.get((i, j))
        if grid is None:
            return ComplexGrid.constant(self._window, 0.0)
        return grid

    def known(self, i: int) -> bool:
        return _retained(i, self._side, self._truncation)

    def restrict(self, window: Window) -> "PseudoDiffOp":
        return PseudoDiffOp(
            {key: grid.restrict(window) for key, grid in self._terms.items()},
            window,
            self._side,
            self._truncation,
        )

    def with_truncation(self, truncation: Optional[int], side: Optional[Side] = None) -> "PseudoDiffOp":
        return PseudoDiffOp(self._terms, self._window, self._side if side is None else side, truncation)

    def max_abs(self) -> float:
        return max((grid.max_abs() for grid in self._terms.values()), default=0.0)

    def scaled(self, factor: Any) -> "PseudoDiffOp":
        """Left multiplication by a scalar or a grid."""
        window = self._window.intersect(factor.window) if isinstance(factor, ComplexGrid) else self._window
        terms = {key: grid * factor for key, grid in self._terms.items()}
        return PseudoDiffOp(terms, window, self._side, self._truncation)

    def _merged(self, other: "PseudoDiffOp", sign: int) -> "PseudoDiffOp":
        side, truncation = combine_sums(self, other)
        window = self._window.intersect(other._window).require()
        terms: Dict[Exponent, ComplexGrid] = {key: grid.restrict(window) for key, grid in self._terms.items()}
        for key, grid in other._terms.items():
            grid = grid.restrict(window)
            terms[key] = terms[key] + sign * grid if key in terms else sign * grid
        return PseudoDiffOp(terms, window, side, truncation)

    def __add__(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        return self._merged(other, 1)

    def __sub__(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        return self._merged(other, -1)

    def __neg__(self) -> "PseudoDiffOp":
        return self.scaled(-1.0)

    def __matmul__(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        return op_mul(self, other)

    @classmethod
    def monomial(cls, window: Window, i: int, j: int = 0, coefficient: Any = 1.0) -> "PseudoDiffOp":
        if isinstance(coefficient, ComplexGrid):
            grid = coefficient
        else:
            grid = ComplexGrid.constant(window, coefficient)
        return cls({(i, j): grid}, window)

    @classmethod
    def identity(cls, window: Window) -> "PseudoDiffOp":
        return cls.monomial(window, 0)

    @classmethod
    def zero(cls, window: Window, side: Side = Side.PLUS, truncation: Optional[int] = None) -> "PseudoDiffOp":
        return cls({}, window, side, truncation)

    def to_json(self) -> Dict[str, Any]:
        w = self._window
        return {
            "window": [w.n_lo, w.n_hi, w.m_lo, w.m_hi],
            "side": int(self._side),
            "truncation": self._truncation,
            "terms": [{"i": i, "j": j, "coefficient": grid.to_json()} for (i, j), grid in self._terms.items()],
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "PseudoDiffOp":
        terms = {(t["i"], t["j"]): ComplexGrid.from_json(t["coefficient"]) for t in doc["terms"]}
        return cls(terms, Window(*doc["window"]), Side(doc["side"]), doc["truncation"])

    def __repr__(self) -> str:
        keys = ", ".join(f"T1^{i} T2^{j}" for i, j in self._terms)
        return f"PseudoDiffOp([{keys}], side={self._side.name}, truncation={self._truncation}, {self._window})"


def _common_side(a: PseudoDiffOp, b: PseudoDiffOp) -> Side:
    if not a.exact and not b.exact and a.side != b.side:
        raise ValueError("Cannot combine series truncated on opposite sides")
    if not a.exact:
        return a.side
    return b.side


def combine_sums(a: PseudoDiffOp, b: PseudoDiffOp) -> Tuple[Side, Optional[int]]:
    """Side and truncation of a + b."""
    side = _common_side(a, b)
    known = [t for t in (a.truncation, b.truncation) if t is not None]
    if not known:
        return side, None
    return side, (max(known) if side == Side.PLUS else min(known))


def _extent(op: PseudoDiffOp, side: Side) -> int:
    """The highest exponent on the PLUS side or the lowest on the MINUS side."""
    if not op._terms:
        # only the unknown tail
        assert op.truncation is not None
        return op.truncation - side
    return op.max_t1() if side == Side.PLUS else op.min_t1()


def combine_products(a: PseudoDiffOp, b: PseudoDiffOp) -> Tuple[Side, Optional[int]]:
    """Side and truncation of a·b: the first exponent reached by an unknown term."""
    side = _common_side(a, b)
    bounds: List[int] = []
    if a.truncation is not None and (b._terms or not b.exact):
        bounds.append(a.truncation + _extent(b, side))
    if b.truncation is not None and (a._terms or not a.exact):
        bounds.append(_extent(a, side) + b.truncation)
    if not bounds:
        return side, None
    return side, (max(bounds) if side == Side.PLUS else min(bounds))


def op_mul(D1: PseudoDiffOp, D2: PseudoDiffOp) -> PseudoDiffOp:
    """Composition D1·D2 with (a T₁^i T₂^j)(b T₁^k T₂^l) = a·(t₁^i t₂^j b)·T₁^{i+k} T₂^{j+l}.

    :raises WindowExhausted: No site keeps every shifted coefficient.
    """
    side, truncation = combine_products(D1, D2)
    window = D1.window
    terms: Dict[Exponent, ComplexGrid] = {}
    for (i, j), a in D1.items():
        for (k, l), b in D2.items():
            if not _retained(i + k, side, truncation):
                continue
            product = a * b.shift(i, j)
            key = (i + k, j + l)
            terms[key] = terms[key] + product if key in terms else product
    for (i, j), _ in D1.items():
        window = window.intersect(D2.window.shifted(i, j))
    if window.empty:
        raise WindowExhausted(f"Product of operators on {D1.window} and {D2.window} leaves no sites")
    return PseudoDiffOp(terms, window, side, truncation)


def op_power(D: PseudoDiffOp, j: int) -> PseudoDiffOp:
    result = D
    for _ in range(j - 1):
        result = op_mul(result, D)
    return result


def op_adjoint(D: PseudoDiffOp) -> PseudoDiffOp:
    """The formal adjoint, (a T₁^i T₂^j)* = T₁^{−i} T₂^{−j} a, in coefficient-left form."""
    window = D.window
    for i, j in D.terms:
        window = window.intersect(D.window.shifted(-i, -j))
    terms = {(-i, -j): a.shift(-i, -j) for (i, j), a in D.items()}
    truncation = None if D.truncation is None else -D.truncation
    return PseudoDiffOp(terms, window.require("adjoint"), Side(-D.side), truncation)


def op_residue(D: PseudoDiffOp) -> ComplexGrid:
    """The T₁⁰ coefficient of a one-variable operator."""
    if D.flavor != Flavor.ONE_VARIABLE:
        raise ValueError("The residue is defined for one-variable operators")
    if not D.known(0):
        raise ValueError(f"The T1^0 coefficient lies beyond the truncation {D.truncation}")
    return D.coefficient(0)


def residue_pairing(D1: PseudoDiffOp, D2: PseudoDiffOp) -> ComplexGrid:
    """Σ_s a_s(n − s)·d_{−s}(n) for D1 = Σ a_s T₁^s and D2 = Σ d_s T₁^s."""
    window = D1.window.intersect(D2.window)
    total = ComplexGrid.constant(window, 0.0)
    for (s, _), a in D1.items():
        if (-s, 0) in D2.terms:
            total = total + a.shift(-s) * D2.coefficient(-s)
    return total


def op_apply(D: PseudoDiffOp, psi: ComplexGrid) -> ComplexGrid:
    """(Dψ)(n, m) = Σ a_ij(n, m)·ψ(n + i, m + j) over the known terms."""
    result: Optional[ComplexGrid] = None
    for (i, j), a in D.items():
        term = a * psi.shift(i, j)
        result = term if result is None else result + term
    if result is None:
        return ComplexGrid.constant(D.window.intersect(psi.window).require(), 0.0)
    return result


def op_inverse(D: PseudoDiffOp, side: Optional[Side] = None, depth: Optional[int] = None) -> PseudoDiffOp:
    """Inverse of a one-variable operator as a series on the given side.

    On ``Side.PLUS`` the series starts at T₁^{−M} for the leading exponent M
    of D and descends; on ``Side.MINUS`` it starts at T₁^{−m} for the lowest
    exponent m and ascends. A truncated D determines exactly as many terms as
    its own known range allows; for an exact D ``depth`` further terms are
    computed.

    :param PseudoDiffOp D: The operator.
    :param side: Direction of the series; taken from D when D is truncated.
    :param int depth: Number of terms after the leading one, for exact D.

    :return: The inverse series.
    :rtype: PseudoDiffOp

    :raises NonInvertibleLeading: The leading coefficient nearly vanishes.
    """
    if D.flavor != Flavor.ONE_VARIABLE:
        raise ValueError("Only one-variable operators are inverted")
    if not D.terms:
        raise NonInvertibleLeading("The zero operator has no inverse")
    if not D.exact:
        side = D.side
    side = Side.PLUS if side is None else Side(side)
    top = D.max_t1() if side == Side.PLUS else D.min_t1()
    if D.truncation is not None:
        steps = side * (top - D.truncation)
    else:
        steps = DEFAULT_DEPTH if depth is None else depth
    lead = D.coefficient(top)
    if lead.min_abs() < LEADING_FLOOR:
        raise NonInvertibleLeading(f"Leading coefficient of T1^{top} drops to {lead.min_abs():.3e}")

    # direction of descent through D's terms
    step = -side
    inverse: Dict[int, ComplexGrid] = {-top: (1.0 / lead).shift(-top)}
    for r in range(1, steps + 1):
        acc: Optional[ComplexGrid] = None
        for k in range(1, r + 1):
            if (top + step * k, 0) not in D.terms:
                continue
            term = D.coefficient(top + step * k) * inverse[-top + step * (r - k)].shift(top + step * k)
            acc = term if acc is None else acc + term
        if acc is None:
            acc = ComplexGrid.constant(lead.window, 0.0)
        inverse[-top + step * r] = (-acc / lead).shift(-top)
    truncation = -top + step * steps
    window = D.window
    for grid in inverse.values():
        window = window.intersect(grid.window)
    return PseudoDiffOp({(i, 0): g for i, g in inverse.items()}, window.require("inverse"), side, truncation)


def shift_operator(window: Window) -> PseudoDiffOp:
    """T₁ − T₁⁻¹."""
    return PseudoDiffOp(
        {(1, 0): ComplexGrid.constant(window, 1.0), (-1, 0): ComplexGrid.constant(window, -1.0)},
        window,
    )


def shift_operator_inverse(window: Window, side: Side, depth: int = DEFAULT_DEPTH) -> PseudoDiffOp:
    """(T₁ − T₁⁻¹)⁻¹: Σ_k T₁^{−1−2k} on the PLUS side, −Σ_k T₁^{1+2k} on the MINUS side."""
    one = ComplexGrid.constant(window, 1.0)
    if side == Side.PLUS:
        terms = {(-1 - 2 * k, 0): one for k in range(depth + 1)}
        return PseudoDiffOp(terms, window, Side.PLUS, -1 - 2 * depth - 1)
    terms = {(1 + 2 * k, 0): -one for k in range(depth + 1)}
    return PseudoDiffOp(terms, window, Side.MINUS, 1 + 2 * depth + 1)


def op_difference(D1: PseudoDiffOp, D2: PseudoDiffOp, window: Optional[Window] = None) -> float:
    """Largest coefficient difference over the exponents known in both operators."""
    common = D1.window.intersect(D2.window)
    if window is not None:
        common = common.intersect(window)
    common.require("comparison")
    keys = {key for key in list(D1.terms) + list(D2.terms) if D1.known(key[0]) and D2.known(key[0])}
    worst = 0.0
    for i, j in keys:
        difference = D1.coefficient(i, j).restrict(common) - D2.coefficient(i, j).restrict(common)
        worst = max(worst, difference.max_abs())
    return worst


from .grid import relative_difference  # type: ignore  # noqa: E402, F401
from .wave import FormalKSeries, formal_wave_solution, wave_operator, lax_operator  # type: ignore  # noqa: E402, F401
from .reduction import reduce_mod_H, schroedinger_operator, t2_series  # type: ignore  # noqa: E402, F401
from .hierarchy import (  # type: ignore  # noqa: E402, F401
    ansatz_fields,
    build_Lj,
    hs_solve,
    nnov7_fit,
    normalized_tau_grid,
    nv_structure_check,
)
