#!/usr/bin/env python3
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..base import (
    CompatibilityFailure,
    Direction,
    IdentityReport,
    RankDeficientFit,
    Sample,
    Side,
    ThetaPolicy,
    TruncationTooShallow,
)
from ..identities import SchroedingerConstants
from ..prym.data import PrymData
from ..theta.riemann import DEFAULT_POLICY, theta_log_batch, theta_log_gradient_batch
from . import (
    DEFAULT_DEPTH,
    PseudoDiffOp,
    op_adjoint,
    op_difference,
    op_mul,
    op_power,
    shift_operator,
    shift_operator_inverse,
)
from .grid import ComplexGrid, Window, relative_difference
from .reduction import reduce_mod_H, schroedinger_operator, t2_series
from .wave import formal_wave_solution, lax_operator, lax_route_residual

logger = logging.getLogger(__name__)


def ansatz_fields(tau: ComplexGrid, C: complex) -> Tuple[ComplexGrid, ComplexGrid]:
    """u = C·t₁τ·t₂τ/(t₁t₂τ·τ) and v₀ = t₁τ·t₁⁻¹τ/τ²."""
    u = C * tau.shift(1, 0) * tau.shift(0, 1) / (tau.shift(1, 1) * tau)
    v0 = tau.shift(1, 0) * tau.shift(-1, 0) / (tau * tau)
    return u, v0


def h0_grid(u: ComplexGrid, v0: ComplexGrid) -> ComplexGrid:
    """v₀·t₁⁻¹u − u·t₂v₀, the leading compatibility condition of 𝓛 with H."""
    return v0 * u.shift(-1) - u * v0.shift(0, 1)


def hs_solve(u: ComplexGrid, v0: ComplexGrid, depth: int = DEFAULT_DEPTH) -> List[ComplexGrid]:
    """Coefficients v_0 … v_S of 𝓛 = Σ v_s T₁^{1−s} compatible with H.

    Order p of (t₂𝓛)·E = E·𝓛, with E the T₂ series of ``t2_series()``, reads

    t₂v_p·t₁^{−p}u = t₁⁻¹u·v_p + Σ_{s<p} (e_{p−s}·t₁^{s−p}v_s − t₂v_s·t₁^{1−s}e_{p−s}),

    which propagates v_p in m from v_p = 0 on the first row of the window.

    :param ComplexGrid u: The potential.
    :param ComplexGrid v0: The leading coefficient.
    :param int depth: Last computed order S.

    :return: [v_0, …, v_S] on windows that shrink with the order.
    :rtype: List[ComplexGrid]
    """
    E = t2_series(u, Side.PLUS, depth)
    e = [E.coefficient(-k) for k in range(depth + 1)]
    inverse = 1.0 / u
    vs = [v0]
    for p in range(1, depth + 1):
        Q: Optional[ComplexGrid] = None
        for s in range(p):
            term = e[p - s] * vs[s].shift(s - p) - vs[s].shift(0, 1) * e[p - s].shift(1 - s)
            Q = term if Q is None else Q + term
        assert Q is not None
        previous = u.shift(-1)
        divisor = inverse.shift(-p)
        window = Q.window.intersect(previous.window).intersect(divisor.window).require(f"order {p}")
        q = Q.restrict(window).values
        a = previous.restrict(window).values
        b = divisor.restrict(window).values
        rows = window.m_hi - window.m_lo + 2
        vp = np.zeros((q.shape[0], rows), dtype=np.complex128)
        for r in range(rows - 1):
            vp[:, r + 1] = (a[:, r] * vp[:, r] + q[:, r]) * b[:, r]
        vs.append(ComplexGrid(Window(window.n_lo, window.n_hi, window.m_lo, window.m_hi + 1), vp))
        logger.debug(f"v_{p} on {vs[-1].window}, max |v| {vs[-1].max_abs():.3e}")
    return vs


def lax_from_coefficients(vs: Sequence[ComplexGrid]) -> PseudoDiffOp:
    """𝓛 = Σ_s v_s T₁^{1−s}, truncated after the last given order."""
    window = vs[0].window
    for v in vs[1:]:
        window = window.intersect(v.window)
    return PseudoDiffOp({(1 - s, 0): v for s, v in enumerate(vs)}, window.require("Lax"), Side.PLUS, 2 - len(vs))


def lj_decomposition(calL: PseudoDiffOp, j: int) -> Dict[int, ComplexGrid]:
    """Coefficients f_i, i ≤ j − 1, of 𝓛^j = Σ_i f_i T₁^i (T₁ − T₁⁻¹), down to f_{−1}.

    Matching powers gives d_k = f_{k−1} − f_{k+1} for 𝓛^j = Σ d_k T₁^k.

    :raises TruncationTooShallow: The T₁⁰ coefficient of 𝓛^j is not known.
    """
    power = op_power(calL, j)
    if not power.known(0):
        raise TruncationTooShallow(f"L^{j} is only known down to T1^{power.truncation}")
    zero = ComplexGrid.constant(power.window, 0.0)
    f: Dict[int, ComplexGrid] = {}
    for k in range(j, -1, -1):
        f[k - 1] = power.coefficient(k) + f.get(k + 1, zero)
    return f


def build_Lj(calL: PseudoDiffOp, j: int, tolerance: float = 1e-10) -> PseudoDiffOp:
    """The difference operator L_j = (f₀ + Σ_{i=1}^{j−1}(f_i T₁^i + T₁^{−i} f_i))(T₁ − T₁⁻¹).

    Its positive part agrees with the positive part of 𝓛^j.

    :param PseudoDiffOp calL: The Lax operator 𝓛 = Σ v_s T₁^{1−s}.
    :param int j: Index of the flow.
    :param float tolerance: Largest accepted relative mismatch of the positive parts.

    :return: L_j, an exact operator.
    :rtype: PseudoDiffOp

    :raises TruncationTooShallow: 𝓛 is not known to enough orders for this j.
    :raises CompatibilityFailure: (L_j)₊ and (𝓛^j)₊ differ by more than ``tolerance``.
    """
    f = lj_decomposition(calL, j)
    terms = {(0, 0): f[0]}
    for i in range(1, j):
        terms[(i, 0)] = f[i]
        terms[(-i, 0)] = f[i].shift(-i)
    symmetric = PseudoDiffOp(terms, f[0].window)
    L = op_mul(symmetric, shift_operator(symmetric.window))
    mismatch = part_residual(positive_part(L), positive_part(op_power(calL, j)))
    if mismatch > tolerance:
        raise CompatibilityFailure(f"L_{j}: positive parts differ by {mismatch:.3e}")
    logger.debug(f"L_{j}: positive parts differ by {mismatch:.3e}")
    return L


def f_tilde(f: Dict[int, ComplexGrid]) -> ComplexGrid:
    """F̃_j = f_1 − t₁f_{−1}."""
    shifted = f[-1].shift(1)
    return f[1] - shifted if 1 in f else -shifted


def positive_part(D: PseudoDiffOp) -> PseudoDiffOp:
    """The terms with T₁ exponent ≥ 1."""
    if D.side == Side.MINUS and not D.exact:
        raise TruncationTooShallow("The positive part of a MINUS series is not finite")
    return PseudoDiffOp({key: grid for key, grid in D.items() if key[0] >= 1}, D.window)


def negative_part(D: PseudoDiffOp) -> PseudoDiffOp:
    """The terms with T₁ exponent ≤ −1."""
    if not D.exact and (D.side == Side.PLUS or D.truncation < -1):
        raise TruncationTooShallow(f"Negative part not known beyond truncation {D.truncation}")
    return PseudoDiffOp({key: grid for key, grid in D.items() if key[0] <= -1}, D.window)


def part_residual(a: PseudoDiffOp, b: PseudoDiffOp) -> float:
    scale = max(a.max_abs(), b.max_abs())
    if scale == 0.0:
        return 0.0
    return op_difference(a, b) / scale


def adjoint_residual(L: PseudoDiffOp, depth: int = DEFAULT_DEPTH) -> float:
    """Relative size of L* + (T₁ − T₁⁻¹)·L·(T₁ − T₁⁻¹)⁻¹ over the known orders."""
    delta = shift_operator(L.window)
    rhs = op_mul(op_mul(delta, L), shift_operator_inverse(L.window, Side.PLUS, depth)).scaled(-1.0)
    lhs = op_adjoint(L)
    return op_difference(lhs, rhs) / max(L.max_abs(), lhs.max_abs())


def conjugated_negative_residual(calL: PseudoDiffOp, L: PseudoDiffOp, j: int, depth: int = DEFAULT_DEPTH) -> float:
    """Relative size of (L_j)₋ + (𝓛̃^j)₋ with 𝓛̃ = (T₁ − T₁⁻¹)⁻¹𝓛*(T₁ − T₁⁻¹)."""
    star = op_adjoint(calL)
    delta = shift_operator(star.window)
    tilde = op_mul(op_mul(shift_operator_inverse(star.window, Side.MINUS, depth), star), delta)
    return part_residual(negative_part(L), negative_part(op_power(tilde, j)).scaled(-1.0))


def _site_samples(grid: ComplexGrid, scale: float) -> List[Sample]:
    values = np.abs(grid.values) / (scale if scale > 0.0 else 1.0)
    w = grid.window
    return [
        Sample(n=n, m=m, nu=(n + m) % 2, z=(), residual=float(values[n - w.n_lo, m - w.m_lo]))
        for n in w.ns()
        for m in w.ms()
    ]


def nv_structure_check(
    tau: ComplexGrid,
    C: complex,
    j: int = 1,
    depth: int = DEFAULT_DEPTH,
    tolerance: float = 1e-9,
) -> IdentityReport:
    """Checks that L_j generates a flow of the lattice Schrödinger operator.

    Builds u and v₀ from the tau grid, solves for 𝓛 order by order, forms L_j
    and reduces [L_j, H] to its cross normal form. The result must be
    −b_j(T₁ − T₂) with b_j = u(t₂F̃_j − F̃_j); every other coefficient, the
    mismatch of both b_j coefficients and h₀ are reported per site.

    The Lax operator is rebuilt from the wave operator Φ𝓛Φ⁻¹ of the formal
    solution as a cross-check; the largest disagreement of the coefficients
    and of v with v₀ is recorded in the notes.

    :param ComplexGrid tau: Tau values on a window.
    :param complex C: The constant paired with ``tau``.
    :param int j: Index of the flow.
    :param int depth: Number of orders of the series.
    :param float tolerance: Pass threshold for every component.

    :return: The report with one sample per site of the bracket window.
    :rtype: prymlab.base.IdentityReport

    :raises CompatibilityFailure: The formal wave solution is inconsistent.
    """
    u, v0 = ansatz_fields(tau, C)
    h0 = h0_grid(u, v0)
    h0_scale = max((v0 * u.shift(-1)).max_abs(), (u * v0.shift(0, 1)).max_abs())

    vs = hs_solve(u, v0, depth)
    calL = lax_from_coefficients(vs)
    series = formal_wave_solution(u, v0, depth, C)
    wave_L = lax_operator(series)
    notes = {
        "lax_route": f"{lax_route_residual(series, vs):.3e}",
        "wave_lax_mismatch": f"{max(relative_difference(wave_L.coefficient(1 - s), v) for s, v in enumerate(vs)):.3e}",
        "v_ratio": f"{relative_difference(wave_L.coefficient(1), v0):.3e}",
    }

    f = lj_decomposition(calL, j)
    L = build_Lj(calL, j)
    H = schroedinger_operator(u)
    bracket = reduce_mod_H(op_mul(L, H) - op_mul(H, L), u, Direction.CROSS)
    b = u * (f_tilde(f).shift(0, 1) - f_tilde(f))
    scale = max(L.max_abs() * H.max_abs(), bracket.max_abs())

    window = bracket.window.intersect(b.window).intersect(h0.window).require("structure check")
    off_shape = ComplexGrid.constant(window, 0.0)
    for (i, jj), grid in bracket.items():
        if (i, jj) not in ((1, 0), (0, 1)):
            off_shape = ComplexGrid(window, np.maximum(np.abs(off_shape.values), np.abs(grid.restrict(window).values)))
    b_mismatch = ComplexGrid(
        window,
        np.maximum(
            np.abs((bracket.coefficient(1, 0) + b).restrict(window).values),
            np.abs((bracket.coefficient(0, 1) - b).restrict(window).values),
        ),
    )
    h0_rel = np.abs(h0.restrict(window).values) / (h0_scale if h0_scale > 0.0 else 1.0)
    notes["off_shape"] = f"{off_shape.max_abs() / (scale or 1.0):.3e}"
    notes["b_mismatch"] = f"{b_mismatch.max_abs() / (scale or 1.0):.3e}"
    notes["h0"] = f"{float(np.max(h0_rel)):.3e}"

    combined = ComplexGrid(
        window,
        np.maximum(np.maximum(off_shape.values.real, b_mismatch.values.real) / (scale or 1.0), h0_rel),
    )
    report = IdentityReport.from_samples(f"nv_{j}", _site_samples(combined, 1.0), tolerance, notes)
    log = logger.info if report.passed else logger.warning
    log(f"nv_{j}: max residual {report.max_rel_residual:.3e} (off shape {notes['off_shape']}, b {notes['b_mismatch']})")
    return report


def prym_log_tau_grid(
    data: PrymData,
    k: SchroedingerConstants,
    Z: Any,
    window: Window,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> ComplexGrid:
    """log τ(n, m) = log θ(Z + nU + mV + (1 − ν)W) + (ν − ½)(m·log c₁ + n·log c₂), ν = (n + m) mod 2.

    Paired with C = c₃ these tau values reproduce the lattice potential u_{nm}.
    """
    Z = np.asarray(Z, dtype=np.complex128)
    sites = [(n, m) for n in window.ns() for m in window.ms()]
    args = [Z + n * data.U + m * data.V + (1 - (n + m) % 2) * data.W for n, m in sites]
    logs = theta_log_batch(data.Pi, args, policy)
    lc1, lc2 = np.log(k.c1), np.log(k.c2)
    factors = np.array([((n + m) % 2 - 0.5) * (m * lc1 + n * lc2) for n, m in sites])
    return ComplexGrid(window, (logs + factors).reshape(window.shape))


def normalized_tau_grid(
    log_tau: ComplexGrid,
    C: complex,
    quadratic: Optional[Tuple[float, float, float]] = None,
) -> Tuple[ComplexGrid, complex, Tuple[float, float, float]]:
    """Removes the Gaussian growth of a tau grid.

    τ̂ = τ·exp(−q) for the real quadratic q = αn² + βm² + γnm + δn + εm + κ
    fitted to Re log τ; u is unchanged when C is replaced by C·e^{−γ}. The
    second-order part may be fixed so that several grids share one gauge.

    :return: (τ̂, Ĉ, (α, β, γ)).
    :rtype: Tuple[ComplexGrid, complex, Tuple[float, float, float]]
    """
    w = log_tau.window
    n, m = np.meshgrid(np.arange(w.n_lo, w.n_hi + 1), np.arange(w.m_lo, w.m_hi + 1), indexing="ij")
    target = log_tau.values.real.ravel()
    linear = np.stack([n.ravel(), m.ravel(), np.ones(n.size)], axis=1).astype(np.float64)
    if quadratic is None:
        design = np.concatenate([np.stack([n.ravel() ** 2, m.ravel() ** 2, (n * m).ravel()], axis=1), linear], axis=1)
        coef, _, _, _ = np.linalg.lstsq(design.astype(np.float64), target, rcond=None)
        quadratic = (float(coef[0]), float(coef[1]), float(coef[2]))
    alpha, beta, gamma = quadratic
    second = alpha * n**2 + beta * m**2 + gamma * n * m
    coef, _, _, _ = np.linalg.lstsq(linear, target - second.ravel(), rcond=None)
    q = second + (linear @ coef).reshape(w.shape)
    return ComplexGrid(w, np.exp(log_tau.values - q)), complex(C) * np.exp(-gamma), quadratic


def log_derivative_grids(
    data: PrymData,
    Z: Any,
    window: Window,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> List[ComplexGrid]:
    """∂_k log T(n, m) − ∂_k log T(n + 1, m) for T(n, m) = θ(Z + nU + mV + (1 − ν)W)."""
    Z = np.asarray(Z, dtype=np.complex128)
    wide = Window(window.n_lo, window.n_hi + 1, window.m_lo, window.m_hi)
    sites = [(n, m) for n in wide.ns() for m in wide.ms()]
    args = [Z + n * data.U + m * data.V + (1 - (n + m) % 2) * data.W for n, m in sites]
    grads = theta_log_gradient_batch(data.Pi, args, policy).reshape(wide.shape + (data.g,))
    return [ComplexGrid(window, grads[:-1, :, k] - grads[1:, :, k]) for k in range(data.g)]


@dataclass(frozen=True)
class DirectionFit:
    """Least-squares fit of F̃₁ = offset(n) + ζ·(−1)^{n+m} + Σ_k V_k·D_k.

    :param V: The fitted direction.
    :param complex alternating: The coefficient ζ of the parity column.
    :param float residual: ‖model − F̃₁‖/‖F̃₁‖.
    :param int unknowns: Number of fitted coefficients.
    """

    V: Tuple[complex, ...]
    alternating: complex
    residual: float
    unknowns: int


def nnov7_fit(
    F1s: Sequence[ComplexGrid],
    derivatives: Sequence[Sequence[ComplexGrid]],
    min_samples: Optional[int] = None,
) -> DirectionFit:
    """Fits a common direction V to F̃₁ over several tau samples.

    Every sample σ carries its own offset for each n-row, since the
    propagated F̃₁ is fixed only up to a function of n. One coefficient ζ
    of (−1)^{n+m} is shared by all samples: F̃₁ pairs τ^ν with τ^{ν+1}, and
    the two families carry different normalizing constants.

    :param F1s: F̃₁ grid per sample.
    :param derivatives: Per sample, the g grids of ``log_derivative_grids()``.
    :param int min_samples: Smallest accepted number of samples.

    :return: The fit.
    :rtype: DirectionFit

    :raises RankDeficientFit: Too few samples or a singular design matrix.
    """
    if min_samples is not None and len(F1s) < min_samples:
        raise RankDeficientFit(f"{len(F1s)} samples given, at least {min_samples} needed")
    g = len(derivatives[0])
    blocks: List[Tuple[ComplexGrid, List[ComplexGrid]]] = []
    for F, D in zip(F1s, derivatives):
        window = F.window
        for grid in D:
            window = window.intersect(grid.window)
        window.require("fit")
        blocks.append((F.restrict(window), [grid.restrict(window) for grid in D]))
    offsets: Dict[Tuple[int, int], int] = {}
    for sigma, (F, _) in enumerate(blocks):
        for n in F.window.ns():
            offsets[(sigma, n)] = len(offsets)
    unknowns = len(offsets) + 1 + g
    design: List[np.ndarray] = []
    target: List[complex] = []
    for sigma, (F, D) in enumerate(blocks):
        w = F.window
        for n in w.ns():
            for m in w.ms():
                row = np.zeros(unknowns, dtype=np.complex128)
                row[offsets[(sigma, n)]] = 1.0
                row[len(offsets)] = (-1) ** ((n + m) % 2)
                for kk in range(g):
                    row[len(offsets) + 1 + kk] = D[kk].at(n, m)
                design.append(row)
                target.append(F.at(n, m))
    A = np.array(design)
    f = np.array(target)
    rank = int(np.linalg.matrix_rank(A))
    if rank < unknowns:
        raise RankDeficientFit(f"Design matrix has rank {rank} for {unknowns} unknowns")
    x, _, _, _ = np.linalg.lstsq(A, f, rcond=None)
    residual = float(np.linalg.norm(A @ x - f) / np.linalg.norm(f))
    logger.info(f"Direction fit over {len(F1s)} samples: residual {residual:.3e}")
    return DirectionFit(
        V=tuple(complex(v) for v in x[len(offsets) + 1 :]),
        alternating=complex(x[len(offsets)]),
        residual=residual,
        unknowns=unknowns,
    )


def prym_f1_samples(
    data: PrymData,
    k: SchroedingerConstants,
    Zs: Sequence[Any],
    window: Window,
    depth: int = DEFAULT_DEPTH,
    policy: ThetaPolicy = DEFAULT_POLICY,
) -> Tuple[List[ComplexGrid], List[List[ComplexGrid]]]:
    """F̃₁ and the log-derivative grids of Prym tau grids at several Z, in one shared gauge."""
    F1s: List[ComplexGrid] = []
    derivatives: List[List[ComplexGrid]] = []
    quadratic = None
    for Z in Zs:
        tau, C, quadratic = normalized_tau_grid(prym_log_tau_grid(data, k, Z, window, policy), k.c3, quadratic)
        u, v0 = ansatz_fields(tau, C)
        calL = lax_from_coefficients(hs_solve(u, v0, depth))
        F1 = f_tilde(lj_decomposition(calL, 1))
        F1s.append(F1)
        derivatives.append(log_derivative_grids(data, Z, F1.window, policy))
    return F1s, derivatives
