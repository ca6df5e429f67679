"""Dunkl analysis toolkit.

Exact operator calculus on polynomials, numeric carre du champ machinery,
heat semigroups with square functions, and Monte Carlo simulation of the
associated jump process, all parameterized by a reflection root system.
"""

from .rootsys import (
    RootSystem,
    make_general,
    make_rank_one,
    make_z2d,
    parse_config,
)
from .polyx import Polynomial, RationalKappa, parse_polynomial

__version__ = "0.1.0"

__all__ = [
    "RootSystem",
    "make_general",
    "make_rank_one",
    "make_z2d",
    "parse_config",
    "Polynomial",
    "RationalKappa",
    "parse_polynomial",
    "__version__",
]
