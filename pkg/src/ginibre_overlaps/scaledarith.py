"""Complex numbers stored as ``mantissa * exp(exponent)``.

Quantities such as ``f_{N-1}(|z|^2) exp(-|z|^2)`` at ``|z|^2 ~ N ~ 500`` have
factors far outside the double range even though the product is moderate.
Carrying a real log-scale exponent next to a complex mantissa keeps every
intermediate representable.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

# exp() overflows just above this; also the smallest exponent gap that matters
_LOG_MAX = 709.78
_FLUSH_GAP = 745.0


@dataclass(frozen=True)
class ScaledComplex:
    """Value ``mantissa * exp(exponent)`` with ``1 <= |mantissa| < e`` or zero."""

    mantissa: complex
    exponent: float

    @staticmethod
    def from_complex(value: complex) -> "ScaledComplex":
        return normalize(ScaledComplex(complex(value), 0.0))

    @staticmethod
    def from_log(log_value: complex) -> "ScaledComplex":
        """Build ``exp(log_value)`` without ever forming it directly."""
        log_value = complex(log_value)
        shift = math.floor(log_value.real)
        return ScaledComplex(cmath.exp(log_value - shift), float(shift))

    @staticmethod
    def zero() -> "ScaledComplex":
        return ScaledComplex(0j, 0.0)

    @staticmethod
    def one() -> "ScaledComplex":
        return ScaledComplex(1 + 0j, 0.0)

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def log_abs(self) -> float:
        """Natural log of the magnitude; ``-inf`` for zero."""
        if self.mantissa == 0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.exponent

    def log(self) -> complex:
        if self.mantissa == 0:
            raise ValueError("log of zero")
        return cmath.log(self.mantissa) + self.exponent

    def to_complex(self) -> complex:
        return sc_to_float(self)

    def magnitude(self) -> "ScaledComplex":
        return ScaledComplex(complex(abs(self.mantissa)), self.exponent)

    def conjugate(self) -> "ScaledComplex":
        return ScaledComplex(self.mantissa.conjugate(), self.exponent)

    def __neg__(self) -> "ScaledComplex":
        return ScaledComplex(-self.mantissa, self.exponent)

    def __mul__(self, other) -> "ScaledComplex":
        return sc_mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ScaledComplex":
        return sc_div(self, _coerce(other))

    def __rtruediv__(self, other) -> "ScaledComplex":
        return sc_div(_coerce(other), self)

    def __add__(self, other) -> "ScaledComplex":
        return sc_add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> "ScaledComplex":
        return sc_add(self, -_coerce(other))

    def __rsub__(self, other) -> "ScaledComplex":
        return sc_add(_coerce(other), -self)

    def __pow__(self, power: int) -> "ScaledComplex":
        if power == 0:
            return ScaledComplex.one()
        if self.mantissa == 0:
            return ScaledComplex.zero()
        return ScaledComplex.from_log(power * self.log())


def _coerce(value) -> ScaledComplex:
    if isinstance(value, ScaledComplex):
        return value
    return ScaledComplex.from_complex(complex(value))


def normalize(a: ScaledComplex) -> ScaledComplex:
    """Shift the exponent so that ``1 <= |mantissa| < e``."""
    m = complex(a.mantissa)
    if m == 0:
        return ScaledComplex(0j, 0.0)
    if not (math.isfinite(m.real) and math.isfinite(m.imag)):
        raise OverflowError("non-finite mantissa")
    shift = math.floor(math.log(abs(m)))
    if shift != 0:
        half = shift // 2  # two steps so subnormal mantissas do not overflow exp
        m = m * math.exp(-half) * math.exp(half - shift)
        # rounding in exp can leave |m| a hair outside [1, e)
        if abs(m) >= math.e:
            m /= math.e
            shift += 1
        elif abs(m) < 1.0:
            m *= math.e
            shift -= 1
    return ScaledComplex(m, a.exponent + shift)


def sc_mul(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    if a.mantissa == 0 or b.mantissa == 0:
        return ScaledComplex.zero()
    return normalize(ScaledComplex(a.mantissa * b.mantissa, a.exponent + b.exponent))


def sc_div(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    if b.mantissa == 0:
        raise ZeroDivisionError("division by a scaled zero")
    if a.mantissa == 0:
        return ScaledComplex.zero()
    return normalize(ScaledComplex(a.mantissa / b.mantissa, a.exponent - b.exponent))


def sc_add(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    if a.mantissa == 0:
        return b
    if b.mantissa == 0:
        return a
    if a.exponent < b.exponent:
        a, b = b, a
    gap = a.exponent - b.exponent
    if gap > _FLUSH_GAP:
        return a
    return normalize(ScaledComplex(a.mantissa + b.mantissa * math.exp(-gap), a.exponent))


def sc_sum(values) -> ScaledComplex:
    """Sum of an iterable of scaled values, aligned to the largest exponent."""
    values = [v for v in values if v.mantissa != 0]
    if not values:
        return ScaledComplex.zero()
    top = max(v.exponent for v in values)
    total = 0j
    for v in values:
        gap = top - v.exponent
        if gap <= _FLUSH_GAP:
            total += v.mantissa * math.exp(-gap)
    return normalize(ScaledComplex(total, top))


def sc_to_float(a: ScaledComplex) -> complex:
    """Plain complex value; raises ``OverflowError`` when out of double range."""
    if a.mantissa == 0:
        return 0j
    if a.log_abs() > _LOG_MAX:
        raise OverflowError(f"scaled value exp({a.exponent:.6g}) exceeds double range")
    if a.exponent < -_FLUSH_GAP - 2:
        return 0j
    # split to avoid overflow of exp(exponent) when |mantissa| < 1 is compensating
    return a.mantissa * math.exp(a.exponent)


def sc_det(entries) -> ScaledComplex:
    """Determinant of a square array of ScaledComplex (or plain numeric) entries.

    Rows and then columns are rescaled by their largest exponent before a
    partially pivoted LU, so the entries handed to LAPACK are O(1).
    """
    n = len(entries)
    if n == 0:
        return ScaledComplex.one()
    entries = [[_coerce(e) for e in row] for row in entries]
    expo = np.array([[e.exponent if e.mantissa != 0 else -np.inf for e in row] for row in entries])
    mant = np.array([[e.mantissa for e in row] for row in entries], dtype=complex)
    row_shift = np.max(expo, axis=1)
    row_shift[~np.isfinite(row_shift)] = 0.0
    rel = expo - row_shift[:, None]
    col_shift = np.max(rel, axis=0)
    col_shift[~np.isfinite(col_shift)] = 0.0
    rel = rel - col_shift[None, :]
    with np.errstate(under="ignore"):
        scaled = np.where(np.isfinite(rel), mant * np.exp(np.where(np.isfinite(rel), rel, 0.0)), 0.0)
    sign, logdet = np.linalg.slogdet(scaled)
    if sign == 0:
        return ScaledComplex.zero()
    total = logdet + float(np.sum(row_shift) + np.sum(col_shift))
    return sc_mul(ScaledComplex.from_complex(sign), ScaledComplex.from_log(total))
