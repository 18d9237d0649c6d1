"""Exact dyadic rational coordinates.

Every knot and meshline coordinate in this package is a dyadic rational
``n / 2**e``.  Refinement only ever bisects knot spans, so the dyadics are
closed under all operations we need, and equality, ordering and midpoints
are decided in integer arithmetic -- there is no floating-point tolerance
anywhere in the mesh layer.

Values are normalized so that the numerator is odd or the exponent is
zero, which makes structural equality coincide with numerical equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = ["DyadicCoord", "dyadic", "midpoint"]

#: Largest denominator exponent accepted when converting a float.  Floats
#: are always exactly representable as dyadics, but a denominator beyond
#: this is almost certainly rounding noise (e.g. ``0.3``) rather than an
#: intended coordinate, and is rejected instead of silently adopted.
_MAX_FLOAT_EXPONENT = 48


@dataclass(frozen=True, slots=True)
class DyadicCoord:
    """A dyadic rational ``numerator / 2**exponent`` in lowest terms."""

    numerator: int
    exponent: int

    def __post_init__(self) -> None:
        num, exp = self.numerator, self.exponent
        if exp < 0:
            num <<= -exp
            exp = 0
        while exp > 0 and num % 2 == 0:
            num //= 2
            exp -= 1
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "exponent", exp)

    # -- conversions ---------------------------------------------------

    @classmethod
    def from_float(cls, value: float) -> "DyadicCoord":
        """Convert an exactly dyadic float; reject rounding noise.

        Any finite float is a dyadic rational, but conversions like
        ``0.3`` produce denominators around 2**52 that no mesh ever
        means.  Denominators above 2**48 raise ``ValueError``.
        """
        if value != value or value in (math.inf, -math.inf):
            raise ValueError(f"coordinate must be finite, got {value!r}")
        num, den = float(value).as_integer_ratio()
        exp = den.bit_length() - 1
        if exp > _MAX_FLOAT_EXPONENT:
            raise ValueError(
                f"{value!r} is not dyadic at a usable resolution "
                f"(denominator 2**{exp}); pass an exact (numerator, exponent) pair"
            )
        return cls(num, exp)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def __float__(self) -> float:
        return math.ldexp(self.numerator, -self.exponent)

    def pair(self) -> list[int]:
        """JSON form ``[numerator, exponent]``."""
        return [self.numerator, self.exponent]

    # -- ordering (exact, integer arithmetic) --------------------------

    def _scaled(self, other: "DyadicCoord") -> tuple[int, int]:
        e = max(self.exponent, other.exponent)
        return (
            self.numerator << (e - self.exponent),
            other.numerator << (e - other.exponent),
        )

    def __lt__(self, other: "DyadicCoord") -> bool:
        a, b = self._scaled(other)
        return a < b

    def __le__(self, other: "DyadicCoord") -> bool:
        a, b = self._scaled(other)
        return a <= b

    def __gt__(self, other: "DyadicCoord") -> bool:
        a, b = self._scaled(other)
        return a > b

    def __ge__(self, other: "DyadicCoord") -> bool:
        a, b = self._scaled(other)
        return a >= b

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other: "DyadicCoord") -> "DyadicCoord":
        e = max(self.exponent, other.exponent)
        a, b = self._scaled(other)
        return DyadicCoord(a + b, e)

    def __sub__(self, other: "DyadicCoord") -> "DyadicCoord":
        e = max(self.exponent, other.exponent)
        a, b = self._scaled(other)
        return DyadicCoord(a - b, e)

    def __neg__(self) -> "DyadicCoord":
        return DyadicCoord(-self.numerator, self.exponent)

    def __str__(self) -> str:
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/2^{self.exponent}"

    def __repr__(self) -> str:
        return f"dyadic({self.numerator}, {self.exponent})"


def dyadic(value, exponent: int | None = None) -> DyadicCoord:
    """Coerce a value to :class:`DyadicCoord`.

    Accepts an existing coordinate, an integer, an exactly dyadic float,
    a ``Fraction`` with power-of-two denominator, a ``(numerator,
    exponent)`` pair, or two arguments ``dyadic(num, exp)``.
    """
    if exponent is not None:
        return DyadicCoord(int(value), int(exponent))
    if isinstance(value, DyadicCoord):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a coordinate")
    if isinstance(value, int):
        return DyadicCoord(value, 0)
    if isinstance(value, float):
        return DyadicCoord.from_float(value)
    if isinstance(value, Fraction):
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not dyadic (denominator {den})")
        return DyadicCoord(value.numerator, den.bit_length() - 1)
    if isinstance(value, (tuple, list)) and len(value) == 2:
        return DyadicCoord(int(value[0]), int(value[1]))
    raise TypeError(f"cannot interpret {value!r} as a dyadic coordinate")


def midpoint(a: DyadicCoord, b: DyadicCoord) -> DyadicCoord:
    """Exact midpoint ``(a + b) / 2``."""
    e = max(a.exponent, b.exponent)
    return DyadicCoord(
        (a.numerator << (e - a.exponent)) + (b.numerator << (e - b.exponent)),
        e + 1,
    )
