"""Exact symbolic calculus for classical and weakly parametric Shubin symbols."""

from .parametric import (
    ParametricSymbol,
    compose_with_operator,
    grubb_seeley_coeffs,
    parametrix,
    product_with_resolvent,
)
from .rational import Poly, RadialRational, exact, to_complex
from .symbols import (
    QUANTIZATIONS,
    ClassicalSymbol,
    HomogeneousTerm,
    compose,
    convert_quantization,
    excision,
    oscillator_power_symbol,
    shift_symbol,
    weyl_product,
)

__all__ = [
    "ClassicalSymbol",
    "HomogeneousTerm",
    "ParametricSymbol",
    "Poly",
    "QUANTIZATIONS",
    "RadialRational",
    "compose",
    "compose_with_operator",
    "convert_quantization",
    "exact",
    "excision",
    "grubb_seeley_coeffs",
    "oscillator_power_symbol",
    "parametrix",
    "product_with_resolvent",
    "shift_symbol",
    "to_complex",
    "weyl_product",
]
