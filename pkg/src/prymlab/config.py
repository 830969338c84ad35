#!/usr/bin/env python3
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Mapping, Optional, Tuple

from .base import ConfigError, ThetaPolicy

logger = logging.getLogger(__name__)

COMMANDS = (
    "periods",
    "prym-data",
    "verify",
    "recover-constants",
    "nv-check",
    "negative-control",
    "all",
)

#: Identity names accepted by ``verify``; reports use the underscored form.
IDENTITIES = ("A", "B", "C", "quad", "five-term", "tau", "recursion", "four-point", "nv")

DEFAULT_TOLERANCES: Dict[str, float] = {
    "A": 1e-8,
    "B": 1e-6,
    "C": 1e-6,
    "quad": 1e-6,
    "five_term": 1e-6,
    "tau": 1e-6,
    "recursion": 1e-6,
    "four_point": 1e-8,
    "nv": 1e-9,
}


def identity_key(name: str) -> str:
    """``five-term`` → ``five_term``."""
    return name.replace("-", "_")


@dataclass(frozen=True)
class CurveConfig:
    """The polynomial h of y² = h(x²), given by its roots or by its coefficients (highest first)."""

    h_roots: Optional[Tuple[complex, ...]] = None
    h_coeffs: Optional[Tuple[complex, ...]] = None


@dataclass(frozen=True)
class QuadratureConfig:
    order: int = 64
    max_order: int = 4096
    tolerance: float = 1e-10


@dataclass(frozen=True)
class WindowConfig:
    """Inclusive ranges of n and m."""

    n: Tuple[int, int] = (0, 5)
    m: Tuple[int, int] = (0, 5)

    def ranges(self) -> Tuple[range, range]:
        return range(self.n[0], self.n[1] + 1), range(self.m[0], self.m[1] + 1)


@dataclass(frozen=True)
class SampleConfig:
    z: int = 25
    divisor: int = 10


@dataclass(frozen=True)
class OperatorConfig:
    """Truncation and tau window of the operator checks; ``tau_window_n`` defaults to 4·s_max + 6."""

    s_max: int = 8
    j: int = 1
    tau_window_n: Optional[int] = None
    tau_window_m: int = 5

    @property
    def half_width(self) -> int:
        return self.tau_window_n if self.tau_window_n is not None else 4 * self.s_max + 6


@dataclass(frozen=True)
class RunConfig:
    """
    RunConfig API

    A complete, immutable description of one run. Every field has a default
    except the curve and the points.
    """

    curve: CurveConfig
    marked_x: Tuple[complex, complex, complex]
    extra_x: complex
    command: str = "all"
    identity: Optional[str] = None
    theta: ThetaPolicy = field(default_factory=ThetaPolicy)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    samples: SampleConfig = field(default_factory=SampleConfig)
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    threads: int = 1
    perturbation: float = 1e-3
    operators: OperatorConfig = field(default_factory=OperatorConfig)

    def tolerance(self, name: str) -> float:
        return self.tolerances[identity_key(name)]

    def with_overrides(
        self,
        command: Optional[str] = None,
        identity: Optional[str] = None,
        threads: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> "RunConfig":
        """Applies command line values; ``None`` keeps the document value."""
        changes: Dict[str, Any] = {}
        if command is not None:
            changes["command"] = _command(command, "command")
        if identity is not None:
            changes["identity"] = _identity(identity, "identity")
        if threads is not None:
            changes["threads"] = _positive_int(threads, "threads")
        if seed is not None:
            changes["seed"] = _int(seed, "seed")
        config = replace(self, **changes)
        if config.command == "verify" and config.identity is None:
            raise ConfigError("identity", "verify needs an identity")
        return config

    def to_dict(self) -> Dict[str, Any]:
        """Canonical plain form; complex numbers become [re, im]."""
        return _plain(asdict(self))


def _plain(value: Any) -> Any:
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON of the parsed config (sorted keys, no whitespace)."""
    text = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _positive_int(value: Any, path: str) -> int:
    value = _int(value, path)
    if value < 1:
        raise ConfigError(path, f"must be positive, got {value}")
    return value


def _positive(value: Any, path: str) -> float:
    value = _number(value, path)
    if not value > 0:
        raise ConfigError(path, f"must be positive, got {value}")
    return value


def _complex(value: Any, path: str) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(path, f"expected [re, im], got {value!r}")
        return complex(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))
    return complex(_number(value, path))


def _complex_list(value: Any, path: str) -> Tuple[complex, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(path, f"expected a nonempty list, got {value!r}")
    return tuple(_complex(v, f"{path}[{i}]") for i, v in enumerate(value))


def _range(value: Any, path: str) -> Tuple[int, int]:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(path, f"expected [first, last], got {value!r}")
    lo, hi = _int(value[0], f"{path}[0]"), _int(value[1], f"{path}[1]")
    if lo > hi:
        raise ConfigError(path, f"empty range {lo}..{hi}")
    return lo, hi


def _section(doc: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(key, f"expected an object, got {value!r}")
    unknown = set(value) - _FIELDS[key]
    if unknown:
        raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown field")
    return value


def _command(value: Any, path: str) -> str:
    if value not in COMMANDS:
        raise ConfigError(path, f"unknown command {value!r}, expected one of {', '.join(COMMANDS)}")
    return value


def _identity(value: Any, path: str) -> str:
    if value not in IDENTITIES:
        raise ConfigError(path, f"unknown identity {value!r}, expected one of {', '.join(IDENTITIES)}")
    return value


_FIELDS = {
    "curve": {"h_roots", "h_coeffs"},
    "theta": {"target_abs_error", "max_radius"},
    "quadrature": {"order", "max_order", "tolerance"},
    "window": {"n", "m"},
    "samples": {"z", "divisor"},
    "operators": {"s_max", "j", "tau_window_n", "tau_window_m"},
}

_TOP_LEVEL = set(_FIELDS) | {
    "command",
    "identity",
    "marked_x",
    "extra_x",
    "tolerances",
    "seed",
    "threads",
    "perturbation",
}


def _curve(doc: Mapping[str, Any]) -> CurveConfig:
    if "curve" not in doc:
        raise ConfigError("curve", "missing")
    section = _section(doc, "curve")
    if ("h_roots" in section) == ("h_coeffs" in section):
        raise ConfigError("curve", "give exactly one of h_roots and h_coeffs")
    if "h_roots" in section:
        return CurveConfig(h_roots=_complex_list(section["h_roots"], "curve.h_roots"))
    return CurveConfig(h_coeffs=_complex_list(section["h_coeffs"], "curve.h_coeffs"))


def _tolerances(doc: Mapping[str, Any]) -> Dict[str, float]:
    value = doc.get("tolerances", {})
    if not isinstance(value, dict):
        raise ConfigError("tolerances", f"expected an object, got {value!r}")
    tolerances = dict(DEFAULT_TOLERANCES)
    for name, tol in value.items():
        key = identity_key(name)
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{name}", "unknown identity")
        tolerances[key] = _positive(tol, f"tolerances.{name}")
    return tolerances


def parse_config(doc: Mapping[str, Any]) -> RunConfig:
    """Builds a ``RunConfig`` from a parsed JSON document.

    :param doc: The document.

    :return: The configuration.
    :rtype: prymlab.config.RunConfig

    :raises ConfigError: A field is missing, unknown or malformed; the error names its path.
    """
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected an object")
    unknown = set(doc) - _TOP_LEVEL
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    curve = _curve(doc)
    if "marked_x" not in doc:
        raise ConfigError("marked_x", "missing")
    marked = _complex_list(doc["marked_x"], "marked_x")
    if len(marked) != 3:
        raise ConfigError("marked_x", f"expected three points, got {len(marked)}")
    if "extra_x" not in doc:
        raise ConfigError("extra_x", "missing")

    theta = _section(doc, "theta")
    quadrature = _section(doc, "quadrature")
    window = _section(doc, "window")
    samples = _section(doc, "samples")
    operators = _section(doc, "operators")
    default_ops = OperatorConfig()
    default_quad = QuadratureConfig()

    config = RunConfig(
        curve=curve,
        marked_x=(marked[0], marked[1], marked[2]),
        extra_x=_complex(doc["extra_x"], "extra_x"),
        command=_command(doc.get("command", "all"), "command"),
        identity=_identity(doc["identity"], "identity") if doc.get("identity") is not None else None,
        theta=ThetaPolicy(
            target_abs_error=_positive(theta.get("target_abs_error", 1e-14), "theta.target_abs_error"),
            max_radius=_positive_int(theta.get("max_radius", 30), "theta.max_radius"),
        ),
        quadrature=QuadratureConfig(
            order=_positive_int(quadrature.get("order", default_quad.order), "quadrature.order"),
            max_order=_positive_int(quadrature.get("max_order", default_quad.max_order), "quadrature.max_order"),
            tolerance=_positive(quadrature.get("tolerance", default_quad.tolerance), "quadrature.tolerance"),
        ),
        window=WindowConfig(
            n=_range(window.get("n", [0, 5]), "window.n"),
            m=_range(window.get("m", [0, 5]), "window.m"),
        ),
        samples=SampleConfig(
            z=_positive_int(samples.get("z", 25), "samples.z"),
            divisor=_positive_int(samples.get("divisor", 10), "samples.divisor"),
        ),
        tolerances=_tolerances(doc),
        seed=_int(doc.get("seed", 0), "seed"),
        threads=_positive_int(doc.get("threads", 1), "threads"),
        perturbation=_number(doc.get("perturbation", 1e-3), "perturbation"),
        operators=OperatorConfig(
            s_max=_positive_int(operators.get("s_max", default_ops.s_max), "operators.s_max"),
            j=_positive_int(operators.get("j", default_ops.j), "operators.j"),
            tau_window_n=(
                _positive_int(operators["tau_window_n"], "operators.tau_window_n")
                if operators.get("tau_window_n") is not None
                else None
            ),
            tau_window_m=_positive_int(operators.get("tau_window_m", default_ops.tau_window_m), "operators.tau_window_m"),
        ),
    )
    if config.perturbation < 0:
        raise ConfigError("perturbation", f"must not be negative, got {config.perturbation}")
    if config.quadrature.max_order < config.quadrature.order:
        raise ConfigError("quadrature.max_order", "smaller than quadrature.order")
    return config


def load_config(path: str) -> RunConfig:
    """Reads and parses a JSON run configuration.

    :param str path: Path of the document.

    :raises ConfigError: The file is not valid JSON or a field is malformed.
    :raises OSError: The file cannot be read.
    """
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("<root>", f"invalid JSON in {path}: {e}") from e
    config = parse_config(doc)
    logger.debug(f"Loaded config {path}: command {config.command}")
    return config
