"""Exact symbolic kernel for linear normal forms and formal linearization of Nambu structures."""

from .linearizer import LinearizationTrace, LinearizerConfig, SoActionBasis, linearize, slice_lambda, slice_theta, so_average
from .nambu_core import Type1NormalForm, Type2NormalForm, classify_linear, is_nambu, singular_locus_check
from .polyring import PolyMap, Rational, TruncPoly, map_compose, map_invert, poly_compose, rational
from .tensorcalc import DiffForm, Multivector, contract, dual_form, dual_mv, pushforward, schouten, wedge
from .textio import format_tensor, parse_tensor

__all__ = [
    "DiffForm",
    "LinearizationTrace",
    "LinearizerConfig",
    "Multivector",
    "PolyMap",
    "Rational",
    "SoActionBasis",
    "TruncPoly",
    "Type1NormalForm",
    "Type2NormalForm",
    "classify_linear",
    "contract",
    "dual_form",
    "dual_mv",
    "format_tensor",
    "is_nambu",
    "linearize",
    "map_compose",
    "map_invert",
    "parse_tensor",
    "poly_compose",
    "pushforward",
    "rational",
    "schouten",
    "singular_locus_check",
    "slice_lambda",
    "slice_theta",
    "so_average",
    "wedge",
]
