#!/usr/bin/env python3
import json
import logging
from dataclasses import dataclass, replace
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..base import DegenerateMarkedPoints, ThetaPolicy, hex_complex, unhex_complex
from ..theta import ComplexArray, PeriodMatrix, validate_period_matrix
from ..theta.kummer import kummer_batch
from ..theta.riemann import DEFAULT_POLICY
from . import DoubleCoverCurve
from .abel import abel_prym
from .periods import DEFAULT_MAX_ORDER, DEFAULT_ORDER, DEFAULT_TOLERANCE, CycleBasis, period_matrix, standard_basis

logger = logging.getLogger(__name__)

#: Smallest accepted lattice distance between the vectors and of twice each vector.
ORDER_TWO_THRESHOLD = 1e-6

#: Sign patterns (A, U, V, W) of the two secant quadruples; the fourth entry of each is the −1 term.
EVEN_SIGNS = ((1, 1, 1, -1), (1, 1, -1, 1), (1, -1, 1, 1), (1, -1, -1, -1))
ODD_SIGNS = ((1, 1, 1, 1), (1, 1, -1, -1), (1, -1, 1, -1), (1, -1, -1, 1))


@dataclass(frozen=True)
class LiftChoice:
    """The committed representative of the Abel–Prym vectors.

    ``shift_u`` etc. are (p, q) with the vector moved by (p + Πq)/2; ``score`` is the
    largest normalized singular value ratio of the two secant systems.
    """

    w_sign: int
    shift_u: Tuple[Tuple[int, ...], Tuple[int, ...]]
    shift_v: Tuple[Tuple[int, ...], Tuple[int, ...]]
    shift_w: Tuple[Tuple[int, ...], Tuple[int, ...]]
    score: float
    candidates: int


@dataclass(frozen=True)
class PrymData:
    """
    PrymData API

    Period matrix Π of a Prym variety together with the vectors A, U, V, W
    that enter every identity.
    """

    Pi: PeriodMatrix
    A: ComplexArray
    U: ComplexArray
    V: ComplexArray
    W: ComplexArray
    marked_x: Tuple[complex, complex, complex]
    extra_x: complex
    base_point: complex
    lift: Optional[LiftChoice] = None

    @property
    def g(self) -> int:
        return self.Pi.g

    def vectors(self) -> Dict[str, ComplexArray]:
        return {"A": self.A, "U": self.U, "V": self.V, "W": self.W}

    def with_vectors(self, **vectors: ComplexArray) -> "PrymData":
        return replace(self, **{k: np.asarray(v, dtype=np.complex128) for k, v in vectors.items()})

    def with_period_matrix(self, Pi: PeriodMatrix) -> "PrymData":
        return replace(self, Pi=Pi)

    def to_json(self) -> str:
        """Serializes with hex floats so ``from_json`` reloads bit-exactly."""
        doc: Dict[str, Any] = {
            "Pi": [[hex_complex(z) for z in row] for row in self.Pi.entries],
            "marked_x": [hex_complex(x) for x in self.marked_x],
            "extra_x": hex_complex(self.extra_x),
            "base_point": hex_complex(self.base_point),
        }
        for name, vec in self.vectors().items():
            doc[name] = [hex_complex(z) for z in vec]
        if self.lift is not None:
            doc["lift"] = {
                "w_sign": self.lift.w_sign,
                "shift_u": self.lift.shift_u,
                "shift_v": self.lift.shift_v,
                "shift_w": self.lift.shift_w,
                "score": self.lift.score.hex(),
                "candidates": self.lift.candidates,
            }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PrymData":
        doc = json.loads(text)
        Pi = validate_period_matrix([[unhex_complex(z) for z in row] for row in doc["Pi"]])

        def vec(name: str) -> ComplexArray:
            return np.array([unhex_complex(z) for z in doc[name]], dtype=np.complex128)

        lift = None
        if "lift" in doc:
            raw = doc["lift"]

            def shift(key: str) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
                return (tuple(raw[key][0]), tuple(raw[key][1]))

            lift = LiftChoice(
                w_sign=raw["w_sign"],
                shift_u=shift("shift_u"),
                shift_v=shift("shift_v"),
                shift_w=shift("shift_w"),
                score=float.fromhex(raw["score"]),
                candidates=raw["candidates"],
            )
        marked = [unhex_complex(x) for x in doc["marked_x"]]
        return cls(
            Pi=Pi,
            A=vec("A"),
            U=vec("U"),
            V=vec("V"),
            W=vec("W"),
            marked_x=(marked[0], marked[1], marked[2]),
            extra_x=unhex_complex(doc["extra_x"]),
            base_point=unhex_complex(doc["base_point"]),
            lift=lift,
        )


def check_prym_vectors(Pi: PeriodMatrix, vectors: Dict[str, ComplexArray]) -> None:
    """Rejects vectors that coincide modulo the lattice or are of order at most two.

    :raises DegenerateMarkedPoints: A distance falls below ``ORDER_TWO_THRESHOLD``.
    """
    names = list(vectors)
    for name in names:
        distance = Pi.distance_to_lattice(2.0 * vectors[name])
        if distance <= ORDER_TWO_THRESHOLD:
            raise DegenerateMarkedPoints(f"{name} is of order at most two (distance {distance:.2e})")
    for i, first in enumerate(names):
        for second in names[i + 1 :]:
            distance = Pi.distance_to_lattice(vectors[first] - vectors[second])
            if distance <= ORDER_TWO_THRESHOLD:
                raise DegenerateMarkedPoints(f"{first} and {second} coincide modulo the lattice")


def make_prym_data(
    curve: DoubleCoverCurve,
    marked_x: Sequence[complex],
    extra_x: complex,
    quad_order: int = DEFAULT_ORDER,
    max_order: int = DEFAULT_MAX_ORDER,
    tolerance: float = DEFAULT_TOLERANCE,
    basis: Optional[CycleBasis] = None,
) -> PrymData:
    """Builds Prym data from three marked points and one extra point.

    P_i⁺ = (x_i, y_i) with y_i on sheet 1 and P_i⁻ = σ(P_i⁺). Since A(P⁻) = −A(P⁺),
    U = −A(P₁⁺), V = −A(P₂⁺), W = −A(P₃⁺) realize 2U = A(P₁⁻) − A(P₁⁺); A is the
    image of the extra point.

    :param prymlab.prym.DoubleCoverCurve curve: The cover.
    :param marked_x: x coordinates of P₁⁺, P₂⁺, P₃⁺.
    :param complex extra_x: x coordinate of the point defining A.
    :param int quad_order: Initial quadrature order.
    :param int max_order: Largest quadrature order tried for the periods and the Abel paths.
    :param float tolerance: Relative stability threshold of the quadratures.
    :param prymlab.prym.periods.CycleBasis basis: Homology basis and Abel base point; ``standard_basis(curve)`` if omitted.

    :return: Prym data without a committed lift.
    :rtype: prymlab.prym.data.PrymData

    :raises DegenerateMarkedPoints: The points are not distinct or a vector is of order two.
    """
    xs = [complex(x) for x in marked_x]
    if len(xs) != 3:
        raise DegenerateMarkedPoints(f"Expected three marked points, got {len(xs)}")
    points = xs + [complex(extra_x)]
    for i, x in enumerate(points):
        if abs(x) < 1e-12:
            raise DegenerateMarkedPoints(f"Point {i} lies over t = 0")
        if np.min(np.abs(curve.branch_points - x**2)) < 1e-8:
            raise DegenerateMarkedPoints(f"Point {i} lies over a branch point")
        for j in range(i):
            if abs(points[j] ** 2 - x**2) < 1e-10:
                raise DegenerateMarkedPoints(f"Points {j} and {i} lie over the same t")

    basis = basis if basis is not None else standard_basis(curve)
    Pi, a_periods = period_matrix(curve, basis, quad_order, max_order, tolerance)

    def image(x: complex) -> ComplexArray:
        y = complex(curve.sheet_sqrt(x**2))
        return abel_prym(
            curve, x, y, a_periods, quad_order, max_order=max_order, tolerance=tolerance, basis=basis
        )

    U, V, W = (-image(x) for x in xs)
    A = image(complex(extra_x))
    check_prym_vectors(Pi, {"A": A, "U": U, "V": V, "W": W})
    logger.info(f"Prym data built: g={Pi.g}, Π diagonal {np.diag(Pi.entries).tolist()}")
    return PrymData(
        Pi=Pi,
        A=A,
        U=U,
        V=V,
        W=W,
        marked_x=(xs[0], xs[1], xs[2]),
        extra_x=complex(extra_x),
        base_point=basis.base,
    )


def secant_points(A: Any, U: Any, V: Any, W: Any) -> Tuple[ComplexArray, ComplexArray]:
    """Arguments (±A±U±V±W)/2 of the even and the odd secant quadruple, shape (4, g) each."""
    vecs = np.stack([np.asarray(v, dtype=np.complex128) for v in (A, U, V, W)])
    even = np.array(EVEN_SIGNS, dtype=np.float64) @ vecs / 2.0
    odd = np.array(ODD_SIGNS, dtype=np.float64) @ vecs / 2.0
    return even, odd


def null_vector(points: ComplexArray) -> Tuple[ComplexArray, float]:
    """Null vector κ of the 2^g×4 matrix of normalized Kummer columns, scaled to κ₄ = −1.

    :return: (κ, σ_min/σ_max); the ratio is 0 when 2^g < 4.
    """
    columns = points / np.max(np.abs(points), axis=0, keepdims=True)
    _, sigma, vh = np.linalg.svd(columns)
    kappa = np.conj(vh[-1])
    ratio = float(sigma[-1] / sigma[0]) if columns.shape[0] >= 4 else 0.0
    scales = np.max(np.abs(points), axis=0)
    kappa = kappa / scales
    return -kappa / kappa[3], ratio


def _half_periods(g: int) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    bits = list(product((0, 1), repeat=g))
    return [(p, q) for p in bits for q in bits]


def resolve_lift(data: PrymData, policy: ThetaPolicy = DEFAULT_POLICY) -> PrymData:
    """Chooses the representative of U, V, W under which both secant systems degenerate.

    Candidates flip the sign of W and move U, V and W by half periods
    (p + Πq)/2, p, q ∈ {0, 1}^g. Each is scored by the worse of the two
    normalized singular value ratios of the lifted Kummer quadruples, with
    candidates whose null vector has a vanishing entry excluded. The first
    candidate within 10× of the best score is committed, so g = 1 keeps the
    unshifted vectors.

    :param prymlab.prym.data.PrymData data: Prym data from ``make_prym_data()``.
    :param prymlab.base.ThetaPolicy policy: Truncation policy.

    :return: The data with lifted vectors and the recorded ``LiftChoice``.
    :rtype: prymlab.prym.data.PrymData
    """
    g = data.g
    shifts = _half_periods(g)
    if 2**g < 4:
        # every 2×4 system has a null vector, so all candidates score 0
        zero = shifts[0]
        lift = LiftChoice(1, zero, zero, zero, 0.0, 2 * len(shifts) ** 3)
        return replace(data, lift=lift)
    candidates: List[Tuple[int, int, int, int]] = [
        (sign, iu, iv, iw)
        for sign in (1, -1)
        for iu in range(len(shifts))
        for iv in range(len(shifts))
        for iw in range(len(shifts))
    ]

    def half(index: int) -> ComplexArray:
        p, q = shifts[index]
        return data.Pi.lattice_vector(p, q) / 2.0

    args: List[ComplexArray] = []
    for sign, iu, iv, iw in candidates:
        even, odd = secant_points(data.A, data.U + half(iu), data.V + half(iv), sign * data.W + half(iw))
        args.append(np.concatenate([even, odd]))
    images = kummer_batch(data.Pi, np.concatenate(args), policy).reshape(len(candidates), 8, 2**g)

    scores = np.empty(len(candidates))
    for c in range(len(candidates)):
        worst = 0.0
        for block in (images[c, :4].T, images[c, 4:].T):
            kappa, ratio = null_vector(block)
            if np.min(np.abs(kappa)) <= 1e-8 * np.max(np.abs(kappa)) or not np.all(np.isfinite(kappa)):
                ratio = float("inf")
            worst = max(worst, ratio)
        scores[c] = worst
    best = float(np.min(scores))
    chosen = int(np.argmax(scores <= 10.0 * best)) if np.isfinite(best) else 0
    sign, iu, iv, iw = candidates[chosen]
    lift = LiftChoice(
        w_sign=sign,
        shift_u=shifts[iu],
        shift_v=shifts[iv],
        shift_w=shifts[iw],
        score=float(scores[chosen]),
        candidates=len(candidates),
    )
    logger.info(f"Lift resolved: W sign {sign}, score {lift.score:.2e} over {len(candidates)} candidates")
    return replace(
        data,
        U=data.U + half(iu),
        V=data.V + half(iv),
        W=sign * data.W + half(iw),
        lift=lift,
    )


def perturb_period_matrix(data: PrymData, eps: float, rng: np.random.Generator) -> PrymData:
    """Adds eps·S to Π for a random complex symmetric S with unit largest entry; vectors are kept."""
    g = data.g
    S = rng.normal(size=(g, g)) + 1j * rng.normal(size=(g, g))
    S = S + S.T
    S = S / np.max(np.abs(S))
    return data.with_period_matrix(validate_period_matrix(data.Pi.entries + eps * S))
