"""Exponential polynomials and the special functions built from them.

Everything that can overflow for arguments of size ~N is returned as a
:class:`ScaledComplex`.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.special import erfc, gammaln

from .errors import InvalidOrderError, SingularInputError
from .scaledarith import ScaledComplex

EPS = np.finfo(float).eps
SQRT_2PI = math.sqrt(2 * math.pi)
TAU_BRANCH = 1e-6
# below this size Horner in plain doubles is exact enough and cannot overflow
_HORNER_MAX_ABS = 30.0


def _check_order(p: int, lowest: int = 0) -> int:
    if int(p) != p or p < lowest:
        raise InvalidOrderError(f"order must be an integer >= {lowest}, got {p}")
    return int(p)


def _logsumexp_complex(logs: np.ndarray) -> tuple[complex, float] | tuple[None, float]:
    """Return (log of sum of exp(logs), log of sum of |exp(logs)|)."""
    top = float(np.max(logs.real))
    terms = np.exp(logs - top)
    total = complex(np.sum(terms))
    abs_total = float(np.sum(np.abs(terms)))
    bound = top + math.log(abs_total)
    if total == 0:
        return None, bound
    return cmath.log(total) + top, bound


def _power_terms(x: complex, start: int, stop: int) -> np.ndarray:
    """log(x^k / k!) for k in [start, stop)."""
    k = np.arange(start, stop, dtype=float)
    return k * cmath.log(x) - gammaln(k + 1)


def _abs_head_log(p: int, r: float) -> float:
    """log sum_{k<=p} r^k/k! for r > 0."""
    _, bound = _logsumexp_complex(_power_terms(complex(r), 0, p + 1).astype(complex))
    return bound


def _tail_log(p: int, x: complex) -> tuple[complex | None, float]:
    """Log of sum_{k>p} x^k/k! and of its absolute bound; needs |x| < p + 2."""
    pieces = []
    start = p + 1
    first = None
    while True:
        chunk = _power_terms(x, start, start + 64)
        pieces.append(chunk)
        if first is None:
            first = chunk[0].real
        if chunk[-1].real < first - 45.0:
            break
        start += 64
    return _logsumexp_complex(np.concatenate(pieces))


def _exp_poly_route(p: int, x: complex) -> tuple[ScaledComplex, float]:
    """Value of e_p(x) and the log of the absolute-value bound of the route used."""
    r = abs(x)
    head_bound = _abs_head_log(p, r)
    use_tail = False
    if p + 2 > r:
        # e_p = e^x - tail; cheaper cancellation when p >> |x|
        abs_tail = _tail_log(p, complex(r))[1]
        tail_bound = float(np.logaddexp(x.real, abs_tail))
        use_tail = tail_bound < head_bound - 0.5
    if use_tail:
        tail_log, _ = _tail_log(p, x)
        exp_x = ScaledComplex.from_log(x)
        if tail_log is None:
            return exp_x, tail_bound
        return exp_x - ScaledComplex.from_log(tail_log), tail_bound
    if r <= _HORNER_MAX_ABS:
        acc = 1 + 0j
        for k in range(p, 0, -1):
            acc = 1 + acc * x / k
        return ScaledComplex.from_complex(acc), head_bound
    log_sum, _ = _logsumexp_complex(_power_terms(x, 0, p + 1))
    if log_sum is None:
        return ScaledComplex.zero(), head_bound
    return ScaledComplex.from_log(log_sum), head_bound


def exp_poly(p: int, x: complex) -> ScaledComplex:
    """Truncated exponential series ``e_p(x) = sum_{k=0}^p x^k/k!``; ``e_{-1} = 0``."""
    p = _check_order(p, -1)
    if p == -1:
        return ScaledComplex.zero()
    x = complex(x)
    if p == 0 or x == 0:
        return ScaledComplex.one()
    return _exp_poly_route(p, x)[0]


def exp_poly_all(n: int, x: complex) -> list[ScaledComplex]:
    """``[e_0(x), ..., e_n(x)]`` by running partial sums.

    Partial sums whose cancellation ratio exceeds 1e3 are recomputed one by
    one with :func:`exp_poly`.
    """
    n = _check_order(n)
    x = complex(x)
    out = []
    acc = ScaledComplex.one()
    acc_abs = 0.0  # log of the sum of |terms|
    for k in range(n + 1):
        if k > 0:
            term = power_over_factorial(k, x)
            acc = acc + term
            acc_abs = float(np.logaddexp(acc_abs, term.log_abs()))
        if acc.is_zero() or acc_abs - acc.log_abs() > math.log(1e3):
            out.append(exp_poly(k, x))
        else:
            out.append(acc)
    return out


def f_poly_all(n: int, x: complex) -> list[ScaledComplex]:
    """``[f_0(x), ..., f_n(x)]``; raises :class:`SingularInputError` at a zero."""
    x = complex(x)
    e = exp_poly_all(n, x)
    x_s = ScaledComplex.from_complex(x)
    out = [ScaledComplex.one()]
    for p in range(1, n + 1):
        first = (p + 1) * e[p]
        second = x_s * e[p - 1]
        value = first - second
        scale = max(first.log_abs(), second.log_abs())
        if value.is_zero() or value.log_abs() < scale + math.log(16 * EPS):
            raise SingularInputError(f"f_{p}({x})")
        out.append(value)
    return out


def _exp_poly_any(p: int, x: complex) -> ScaledComplex:
    """``e_p`` with the convention that every negative order gives zero."""
    if p < 0:
        return ScaledComplex.zero()
    return exp_poly(p, x)


def power_over_factorial(k: int, x: complex) -> ScaledComplex:
    """``x^k / k!`` as a scaled value (``0^0 = 1``)."""
    x = complex(x)
    if k == 0:
        return ScaledComplex.one()
    if x == 0:
        return ScaledComplex.zero()
    return ScaledComplex.from_log(k * cmath.log(x) - math.lgamma(k + 1))


def scaled_power(x: complex, k: int) -> ScaledComplex:
    x = complex(x)
    if k == 0:
        return ScaledComplex.one()
    if x == 0:
        return ScaledComplex.zero()
    return ScaledComplex.from_log(k * cmath.log(x))


def f_poly(p: int, x: complex) -> ScaledComplex:
    """``f_p(x) = (p+1) e_p(x) - x e_{p-1}(x)``."""
    p = _check_order(p)
    x = complex(x)
    return (p + 1) * exp_poly(p, x) - ScaledComplex.from_complex(x) * _exp_poly_any(p - 1, x)


def f_poly_nonzero(p: int, x: complex, name: str | None = None) -> ScaledComplex:
    """``f_p(x)``, raising :class:`SingularInputError` when it is zero to rounding."""
    p = _check_order(p)
    x = complex(x)
    first = (p + 1) * exp_poly(p, x)
    second = ScaledComplex.from_complex(x) * _exp_poly_any(p - 1, x)
    value = first - second
    scale = max(first.log_abs(), second.log_abs())
    if value.is_zero() or value.log_abs() < scale + math.log(16 * EPS):
        raise SingularInputError(name or f"f_{p}({x})")
    return value


def phi_direct_all(n: int, x: complex) -> list[complex]:
    """``[Phi_0(x), ..., Phi_n(x)]`` from running sums of
    ``x^k / ((k+1)! f_k(x) f_{k+1}(x))``."""
    n = _check_order(n)
    x = complex(x)
    f_vals = f_poly_all(n + 1, x)
    out, acc = [], ScaledComplex.zero()
    for k in range(n + 1):
        acc = acc + power_over_factorial(k, x) / ((k + 1) * f_vals[k] * f_vals[k + 1])
        out.append(acc.to_complex())
    return out


def phi_direct(n: int, x: complex) -> complex:
    """``Phi_n(x)`` summed term by term; ``Phi_{-1} = 0``."""
    n = _check_order(n, -1)
    if n == -1:
        return 0j
    return phi_direct_all(n, x)[-1]


def phi_closed(n: int, x: complex) -> complex:
    """Closed form ``(n+2-x)/(x^2 f_{n+1}(x)) + (x-1)/x^2``."""
    n = _check_order(n)
    x = complex(x)
    if x == 0:
        raise SingularInputError("x", "closed form of Phi_n divides by x^2")
    f_next = f_poly_nonzero(n + 1, x)
    head = ScaledComplex.from_complex(n + 2 - x) / (f_next * (x * x))
    return head.to_complex() + (x - 1) / (x * x)


def _ratio_g(n: int, u: complex, v: complex) -> tuple[ScaledComplex, float]:
    """``(u^{n+1} e_n(v) - v^{n+1} e_n(u)) / (v - u)`` and a log error scale.

    The numerator vanishes at ``u = v``; close to that line the first two
    terms of its Taylor series in ``u - v`` are used instead of dividing.
    """
    diff = v - u
    if diff == 0 or abs(diff) < TAU_BRANCH * abs(v):
        # g'(v) = v^n f_n(v);  g''(v) = n(n+1) v^{n-1} e_n(v) - v^{n+1} e_{n-2}(v)
        first = scaled_power(v, n) * f_poly(n, v)
        if n >= 1:
            second = n * (n + 1) * scaled_power(v, n - 1) * exp_poly(n, v) - scaled_power(
                v, n + 1
            ) * _exp_poly_any(n - 2, v)
        else:
            second = ScaledComplex.zero()
        value = -(first + second * ScaledComplex.from_complex(-diff / 2))
        return value, max(first.log_abs(), second.log_abs() + math.log(abs(diff) + 1e-300))
    a = scaled_power(u, n + 1) * exp_poly(n, v)
    b = scaled_power(v, n + 1) * exp_poly(n, u)
    value = (a - b) / ScaledComplex.from_complex(diff)
    return value, max(a.log_abs(), b.log_abs()) - math.log(abs(diff))


def frak_from_products(
    n: int, x: complex, xy: complex, xz: complex, xyz: complex, q: complex
) -> tuple[ScaledComplex, float]:
    """Three-variable polynomial from the products ``x, xy, xz, xyz`` and
    ``q = x(1-y)(1-z)``; also returns the log of the largest partial term.

    Working with products avoids dividing by ``y`` or ``z`` individually, which
    keeps the reduced kernel regular at a vanishing conditioning point.
    """
    e_xy = exp_poly(n, xy)
    e_xz = exp_poly(n, xz)
    e_xyz = exp_poly(n, xyz)
    e_x = exp_poly(n, x)
    w_first = e_xy * e_xz
    w_second = e_xyz * e_x * ScaledComplex.from_complex(1 - q)
    ratio, ratio_scale = _ratio_g(n, xyz, x)
    q_over = ScaledComplex.from_complex(q) / ScaledComplex.from_log(math.lgamma(n + 1))
    h_part = q_over * ratio
    value = w_first - w_second + h_part
    scale = max(
        w_first.log_abs(),
        w_second.log_abs(),
        h_part.log_abs(),
        q_over.log_abs() + ratio_scale,
    )
    return value, scale


def w_part(n: int, x: complex, y: complex, z: complex) -> ScaledComplex:
    n = _check_order(n)
    x, y, z = complex(x), complex(y), complex(z)
    q = x * (1 - y) * (1 - z)
    return exp_poly(n, x * y) * exp_poly(n, x * z) - exp_poly(n, x * y * z) * exp_poly(
        n, x
    ) * ScaledComplex.from_complex(1 - q)


def h_part(n: int, x: complex, y: complex, z: complex) -> ScaledComplex:
    n = _check_order(n)
    x, y, z = complex(x), complex(y), complex(z)
    q = x * (1 - y) * (1 - z)
    ratio, _ = _ratio_g(n, x * y * z, x)
    return ScaledComplex.from_complex(q) * ratio / ScaledComplex.from_log(math.lgamma(n + 1))


def frak_F(n: int, x: complex, y: complex, z: complex) -> ScaledComplex:
    """Polynomial ``W_n + H_n`` in three variables."""
    n = _check_order(n)
    x, y, z = complex(x), complex(y), complex(z)
    value, _ = frak_from_products(n, x, x * y, x * z, x * y * z, x * (1 - y) * (1 - z))
    return value


def erfc_F(a: complex) -> complex:
    """Gaussian tail ``F(a) = erfc(a/sqrt 2)/2`` continued to complex ``a``."""
    return complex(0.5 * erfc(complex(a) / math.sqrt(2.0)))


def _dF(u: complex) -> complex:
    return -cmath.exp(-u * u / 2) / SQRT_2PI


def h_bracket(a, b, c, d, f, x: complex = 0.0) -> complex:
    """The bracketed function whose x-derivative defines :func:`h_edge`."""
    F = erfc_F
    return cmath.exp((a + x) ** 2 / 2) * (
        cmath.exp(-f) * F(b + x) * F(c + x) - F(d + x) * F(a + x) + f * F(d) * F(a + x)
    )


def h_denominator(a: complex) -> complex:
    """``exp(-a^2/2) - sqrt(2 pi) a F(a)``: the prefactor denominator times exp(-a^2/2)."""
    a = complex(a)
    value = cmath.exp(-a * a / 2) - SQRT_2PI * a * erfc_F(a)
    scale = max(abs(cmath.exp(-a * a / 2)), abs(SQRT_2PI * a * erfc_F(a)))
    if value == 0 or abs(value) < 64 * EPS * scale:
        raise SingularInputError("1 - sqrt(2 pi) a exp(a^2/2) F(a)", f"a = {a}")
    return value


def h_numerator(a, b, c, d, f) -> complex:
    """``exp(-a^2/2) d/dx[bracket]`` at x = 0, by the product rule."""
    a, b, c, d, f = (complex(v) for v in (a, b, c, d, f))
    F = erfc_F
    Fa, Fb, Fc, Fd = F(a), F(b), F(c), F(d)
    ef = cmath.exp(-f)
    g0 = ef * Fb * Fc - Fd * Fa + f * Fd * Fa
    g1 = ef * (_dF(b) * Fc + Fb * _dF(c)) - _dF(d) * Fa - Fd * _dF(a) + f * Fd * _dF(a)
    return a * g0 + g1


def h_edge(a: complex, b: complex, c: complex, d: complex, f: complex) -> complex:
    """Edge function H(a, b, c, d, f).

    The overall ``exp(a^2/2)`` of the derivative is cancelled against the
    prefactor analytically, so nothing overflows for large ``|a|``.
    """
    return -SQRT_2PI * h_numerator(a, b, c, d, f) / h_denominator(a)
