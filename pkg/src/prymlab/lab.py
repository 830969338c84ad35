#!/usr/bin/env python3
import logging
from concurrent.futures import ThreadPoolExecutor
from types import TracebackType
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type

import numpy as np

from .base import (
    DegenerateConfiguration,
    IdentityReport,
    NumericError,
    Sample,
)
from .config import RunConfig, identity_key
from .identities import SchroedingerConstants, random_arguments
from .identities.divisor import (
    prym_tau_family,
    sample_divisor_points,
    tau_sites,
    verify_C,
    verify_recursion_consistency,
    verify_tau_residues,
)
from .identities.genus1 import verify_general_four_point_genus1
from .identities.kummer import fit_constants, lattice_trial, verify_B
from .identities.lattice import verify_A, verify_five_term, verify_quad
from .operators.grid import Window
from .operators.hierarchy import (
    nnov7_fit,
    normalized_tau_grid,
    nv_structure_check,
    prym_f1_samples,
    prym_log_tau_grid,
)
from .prym import DoubleCoverCurve, build_cover, from_roots
from .prym.data import PrymData, make_prym_data, perturb_period_matrix, resolve_lift
from .prym.elliptic import cross_check_elliptic
from .prym.periods import period_matrix
from .theta import DivisorPoint

logger = logging.getLogger(__name__)

#: Identities of the full suite, in report order.
SUITE = ("A", "B", "C", "quad", "five-term", "tau", "recursion", "four-point", "nv")

#: Identities evaluated on the perturbed period matrix; the other two do not read Π.
NEGATIVE_CONTROL_SUITE = ("A", "B", "C", "quad", "five-term", "tau", "recursion")

#: Independent random streams; each identity draws from its own so results do not depend on the command.
STREAMS = {"arguments": 0, "divisor": 1, "four-point": 2, "perturbation": 3, "control-divisor": 4}

#: Number of arguments used to choose the constants.
TRIAL_ARGUMENTS = 3

PERIOD_TOLERANCE = 1e-8


class Lab:
    """
    Lab API

    Owns the theta policy, the seeded random streams and the worker pool of one run,
    and builds the pipeline stages of a configuration on demand. Use as a
    context manager so the pool is shut down.
    """

    def __init__(self, config: RunConfig):
        """
        :param prymlab.config.RunConfig config: The run configuration.
        """
        self.config = config
        self.policy = config.theta
        self.executor: Optional[ThreadPoolExecutor] = None
        self.curve: Optional[DoubleCoverCurve] = None
        self.data: Optional[PrymData] = None
        self.constants: Optional[SchroedingerConstants] = None
        self.pairing: Optional[str] = None
        self.w_sign = 1
        self.arguments: List[np.ndarray] = []
        self.divisor_points: List[DivisorPoint] = []

    def __enter__(self) -> "Lab":
        if self.config.threads > 1:
            self.executor = ThreadPoolExecutor(max_workers=self.config.threads)
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc_val: Optional[BaseException],
        exc_tb: Optional[TracebackType],
    ) -> None:
        self.close()

    def close(self) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None

    def stream(self, name: str) -> np.random.Generator:
        """A generator seeded by (seed, stream index), independent of the other streams."""
        return np.random.default_rng([self.config.seed, STREAMS[name]])

    def build_curve(self) -> DoubleCoverCurve:
        if self.curve is None:
            curve_config = self.config.curve
            if curve_config.h_roots is not None:
                self.curve = from_roots(curve_config.h_roots)
            else:
                self.curve = build_cover(curve_config.h_coeffs or ())
            logger.info(f"Curve built: {self.curve}")
        return self.curve

    def build_data(self) -> PrymData:
        """Prym data with the lift resolved; vectors are not yet sign-checked against the constants."""
        if self.data is None:
            quad = self.config.quadrature
            data = make_prym_data(
                self.build_curve(),
                self.config.marked_x,
                self.config.extra_x,
                quad.order,
                quad.max_order,
                quad.tolerance,
            )
            self.data = resolve_lift(data, self.policy)
        return self.data

    def prepare(self) -> "Lab":
        """Builds the data, draws the arguments and divisor points and recovers the constants.

        Both signs of W are tried; the one with the smaller lattice-equation
        trial residual is committed.

        :return: self
        :rtype: prymlab.lab.Lab

        :raises InconsistentSystem: Neither sign of W yields constants.
        """
        data = self.build_data()
        self.arguments = random_arguments(data.Pi, self.stream("arguments"), self.config.samples.z)
        trials = self.arguments[:TRIAL_ARGUMENTS]
        results: List[Tuple[float, int, PrymData, SchroedingerConstants, str]] = []
        first_error: Optional[NumericError] = None
        for sign in (1, -1):
            candidate = data if sign == 1 else data.with_vectors(W=-data.W)
            try:
                k, pairing = fit_constants(candidate, trials, self.policy)
            except NumericError as e:
                logger.debug(f"W sign {sign} rejected: {e}")
                first_error = first_error or e
                continue
            score = lattice_trial(candidate, trials, policy=self.policy)(k)
            results.append((score, sign, candidate, k, pairing))
        if not results:
            assert first_error is not None
            raise first_error
        score, self.w_sign, self.data, self.constants, self.pairing = min(results, key=lambda r: (r[0], -r[1]))
        logger.info(f"W sign {self.w_sign} committed, trial residual {score:.3e}")
        self.divisor_points = sample_divisor_points(
            self.data.Pi, self.stream("divisor"), self.config.samples.divisor, policy=self.policy
        )
        return self

    def _require(self) -> Tuple[PrymData, SchroedingerConstants]:
        if self.data is None or self.constants is None:
            self.prepare()
        assert self.data is not None and self.constants is not None
        return self.data, self.constants

    def tolerance(self, name: str) -> float:
        return self.config.tolerance(name)

    def verify_periods(self) -> IdentityReport:
        """Period matrix checks: symmetry, and for real quartics the AGM period ratio."""
        curve = self.build_curve()
        quad = self.config.quadrature
        Pi, _ = period_matrix(curve, quad_order=quad.order, max_order=quad.max_order, tolerance=quad.tolerance)
        entries = Pi.entries
        samples = [Sample(n=0, m=0, nu=0, z=(), residual=float(np.max(np.abs(entries - entries.T))))]
        notes = {"Pi": repr([[complex(z) for z in row] for row in entries])}
        if curve.g == 1 and np.max(np.abs(curve.branch_points.imag)) == 0.0:
            check = cross_check_elliptic(curve)
            samples.append(Sample(n=1, m=0, nu=0, z=(check.agm_tau,), residual=check.discrepancy))
            notes["agm_tau"] = repr(check.agm_tau)
        report = IdentityReport.from_samples("periods", samples, PERIOD_TOLERANCE, notes)
        logger.info(f"periods: g={Pi.g}, max residual {report.max_rel_residual:.3e}")
        return report

    def verify(
        self,
        name: str,
        data: Optional[PrymData] = None,
        constants: Optional[SchroedingerConstants] = None,
        points: Optional[Sequence[Any]] = None,
    ) -> IdentityReport:
        """Runs one identity of the suite.

        :param str name: One of ``SUITE``.
        :param data: Data to evaluate on; the prepared data by default.
        :param constants: Constants to use; the recovered ones by default.
        :param points: Theta divisor points of ``data``; the prepared ones by default.

        :return: The identity report.
        :rtype: prymlab.base.IdentityReport
        """
        prepared, recovered = self._require()
        data = data or prepared
        k = constants or recovered
        points = self.divisor_points if points is None else points
        tol = self.tolerance(name)
        window = self.config.window.ranges()
        key = identity_key(name)
        runners: Dict[str, Callable[[], IdentityReport]] = {
            "A": lambda: verify_A(data, k, window, self.arguments, tol, executor=self.executor, policy=self.policy),
            "B": lambda: verify_B(data, k, tolerance=tol, policy=self.policy)[0],
            "C": lambda: verify_C(data, k, points, tol, self.executor, self.policy),
            "quad": lambda: verify_quad(data, k, self.arguments, tol, self.executor, self.policy),
            "five_term": lambda: verify_five_term(data, k, window, self.arguments, tol, self.executor, self.policy),
            "tau": lambda: verify_tau_residues(
                prym_tau_family(data, k, self.policy), tau_sites(data, points), tol, self.executor
            ),
            "recursion": lambda: verify_recursion_consistency(
                prym_tau_family(data, k, self.policy), tau_sites(data, points), tol, self.executor
            ),
            "four_point": self.verify_four_point,
            "nv": lambda: self.nv_check(data, k),
        }
        if key not in runners:
            raise ValueError(f"Unknown identity {name}")
        return runners[key]()

    def recover_constants(self) -> IdentityReport:
        """Recovers the constants from the secant null vectors and reports the secant relations under them."""
        data = self.build_data()
        arguments = random_arguments(data.Pi, self.stream("arguments"), TRIAL_ARGUMENTS)
        report, k = verify_B(data, None, arguments, self.tolerance("B"), self.policy)
        self.constants = self.constants or k
        return report

    def verify_four_point(self) -> IdentityReport:
        """Four-point equation on an elliptic curve with random marked points.

        The modulus is Π itself in genus 1 and 0.3 + 1.1i otherwise.
        """
        data = self.build_data()
        tau = complex(data.Pi.entries[0, 0]) if data.g == 1 else 0.3 + 1.1j
        rng = self.stream("four-point")
        window = self.config.window
        ranges = (range(window.n[0], window.n[0] + 4), range(window.m[0], window.m[0] + 4))
        for _ in range(20):
            q1p, q1m, q2p, q2m, gamma, *z_points = (complex(rng.uniform(0, 1) + tau * rng.uniform(0, 1)) for _ in range(9))
            try:
                return verify_general_four_point_genus1(
                    tau,
                    (q1p, q1m, q2p, q2m),
                    gamma,
                    ranges,
                    z_points,
                    self.tolerance("four-point"),
                    self.policy,
                )
            except DegenerateConfiguration as e:
                logger.debug(f"Four-point configuration redrawn: {e}")
        raise DegenerateConfiguration("No admissible four-point configuration in 20 draws")

    def tau_window(self) -> Window:
        ops = self.config.operators
        return Window(-ops.half_width, ops.half_width, 0, ops.tau_window_m)

    def nv_check(
        self, data: Optional[PrymData] = None, constants: Optional[SchroedingerConstants] = None
    ) -> IdentityReport:
        """Flow structure of L_j on the normalized Prym tau grid, plus the direction fit of F̃₁.

        The fit residual is recorded in the notes only.
        """
        prepared, recovered = self._require()
        data = data or prepared
        k = constants or recovered
        ops = self.config.operators
        window = self.tau_window()
        log_tau = prym_log_tau_grid(data, k, self.arguments[0], window, self.policy)
        tau, C, _ = normalized_tau_grid(log_tau, k.c3)
        report = nv_structure_check(tau, C, ops.j, ops.s_max, self.tolerance("nv"))
        count = min(len(self.arguments), 3 * data.g + 3)
        try:
            F1s, derivatives = prym_f1_samples(data, k, self.arguments[:count], window, ops.s_max, self.policy)
            fit = nnov7_fit(F1s, derivatives, min_samples=3 * data.g + 3)
            report.notes["direction_fit_residual"] = f"{fit.residual:.3e}"
            report.notes["direction"] = repr(list(fit.V))
        except NumericError as e:
            report.notes["direction_fit_residual"] = f"not available: {e}"
        return report

    def suite(self, names: Sequence[str] = SUITE) -> List[IdentityReport]:
        return [self.verify(name) for name in names]

    def negative_control(self, perturbation: Optional[float] = None) -> Tuple[List[IdentityReport], Dict[str, str]]:
        """Runs the suite on Π perturbed symmetrically by ``perturbation``, keeping vectors and constants.

        Divisor points are redrawn on the perturbed Π. A perturbation of 0 runs the
        unmodified full suite.

        :return: (reports, notes); the note ``negative_control`` states whether every identity failed.
        """
        eps = self.config.perturbation if perturbation is None else perturbation
        data, k = self._require()
        if eps == 0.0:
            return self.suite(), {"negative_control": "unperturbed"}
        perturbed = perturb_period_matrix(data, eps, self.stream("perturbation"))
        points = sample_divisor_points(
            perturbed.Pi, self.stream("control-divisor"), self.config.samples.divisor, policy=self.policy
        )
        reports = [self.verify(name, perturbed, k, points) for name in NEGATIVE_CONTROL_SUITE]
        failing = [r.name for r in reports if not r.passed]
        if not failing:
            verdict = "indistinguishable at tolerance"
        elif len(failing) == len(reports):
            verdict = "every identity fails"
        else:
            verdict = f"failing: {', '.join(failing)}"
        logger.info(f"Negative control at {eps:.1e}: {verdict}")
        return reports, {"negative_control": verdict, "perturbation": f"{eps:.3e}"}
