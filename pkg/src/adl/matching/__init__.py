# 格子間の有界変位単射
from .hall import (
    MatchingResult,
    hall_injection,
    lattice_injection_pi,
    neighbourhood,
    scale_operator,
    two_sided_saturation,
)
from .lattice import LatticePair, domains_overlap, parse_window, window_cells

# 「このパッケージを import したときに表に出す名前」
__all__ = [
    "LatticePair",
    "MatchingResult",
    "domains_overlap",
    "hall_injection",
    "lattice_injection_pi",
    "neighbourhood",
    "parse_window",
    "scale_operator",
    "two_sided_saturation",
    "window_cells",
]
