#!/usr/bin/env python3
"""prymlab"""

import logging

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

from .base import Direction  # type: ignore  # noqa: E402, F401
from .base import ExitCode  # type: ignore  # noqa: E402, F401
from .base import IdentityReport  # type: ignore  # noqa: E402, F401
from .base import PrymlabError  # type: ignore  # noqa: E402, F401
from .base import Sample  # type: ignore  # noqa: E402, F401
from .base import Side  # type: ignore  # noqa: E402, F401
from .base import ThetaPolicy  # type: ignore  # noqa: E402, F401
from .config import RunConfig  # type: ignore  # noqa: E402, F401
from .config import load_config  # type: ignore  # noqa: E402, F401
from .config import parse_config  # type: ignore  # noqa: E402, F401
from .identities import LatticeIndex  # type: ignore  # noqa: E402, F401
from .identities import SchroedingerConstants  # type: ignore  # noqa: E402, F401
from .lab import Lab  # type: ignore  # noqa: E402, F401
from .operators import PseudoDiffOp  # type: ignore  # noqa: E402, F401
from .operators.grid import ComplexGrid  # type: ignore  # noqa: E402, F401
from .operators.grid import Window  # type: ignore  # noqa: E402, F401
from .prym import DoubleCoverCurve  # type: ignore  # noqa: E402, F401
from .prym.data import PrymData  # type: ignore  # noqa: E402, F401
from .report import RunReport  # type: ignore  # noqa: E402, F401
from .theta import PeriodMatrix  # type: ignore  # noqa: E402, F401
