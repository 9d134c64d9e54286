"""Weights and kernels at finite N and in the bulk and edge limits.

Conventions: ``x_bar``, ``lam_bar`` etc. are independent complex slots, so
every function here is the analytic continuation in the conjugate variables.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .errors import InvalidOrderError, SingularInputError
from .points import KernelArgs
from .scaledarith import ScaledComplex, sc_det
from .specfun import (
    EPS,
    exp_poly,
    f_poly_all,
    f_poly_nonzero,
    frak_from_products,
    h_edge,
    scaled_power,
)

# estimated relative error of the closed-form reduced kernel above which the
# biorthogonal sum is evaluated as well and the better of the two kept
TAU_CLOSED_FORM = 1e-13
TAU_BULK_SERIES = 1e-4
# |(lam - y)(lam_bar - x_bar)| below which the edge kernel is averaged over circles
TAU_EDGE = 0.05
_EDGE_CIRCLE_RADIUS = 1.0
_EDGE_CIRCLE_NODES = 48


def _check_N(N: int) -> int:
    if int(N) != N or N < 1:
        raise InvalidOrderError(f"N must be a positive integer, got {N}")
    return int(N)


def weight_omega(x: complex, y: complex, lam: complex, mu: complex) -> complex:
    """``(1/pi)(1 + (x-lam)(y-mu)) exp(-x y)``."""
    return (1 + (x - lam) * (y - mu)) * cmath.exp(-x * y) / math.pi


def weight_omega_scaled(x: complex, y: complex, lam: complex, mu: complex) -> ScaledComplex:
    x, y, lam, mu = complex(x), complex(y), complex(lam), complex(mu)
    bracket = ScaledComplex.from_complex((1 + (x - lam) * (y - mu)) / math.pi)
    return bracket * ScaledComplex.from_log(-x * y)


# ---------------------------------------------------------------- finite N


def _kappa_closed(N, x_bar, y, lam, lam_bar):
    X = lam * lam_bar
    q = (lam_bar - x_bar) * (lam - y)
    f_N = f_poly_nonzero(N, X, "f_N(lam * lam_bar)")
    if q == 0:
        return None, math.inf
    products = (X, x_bar * lam, lam_bar * y, x_bar * y, q)
    upper, upper_scale = frak_from_products(N + 1, *products)
    lower, lower_scale = frak_from_products(N, *products)
    X_s = ScaledComplex.from_complex(X)
    num = (N + 1) * upper - X_s * lower
    if num.is_zero():
        return ScaledComplex.zero(), math.inf
    err_scale = np.logaddexp(
        math.log(N + 1) + upper_scale, X_s.log_abs() + lower_scale if X != 0 else -math.inf
    )
    # each e_n carries roughly n rounding errors of its own
    est = math.exp(min(0.0, err_scale + math.log((N + 2) * EPS) - num.log_abs()))
    q_s = ScaledComplex.from_complex(q)  # q * q may underflow in plain floats
    return num / (q_s * q_s * f_N), est


def _kappa_sum(N, x_bar, y, lam, lam_bar):
    """Biorthogonal expansion ``sum_k conj-P_k(x_bar) Q_k(y) / <P_k, Q_k>``.

    Written with unnormalized polynomials ``A_k = sum_m lam_bar^{k-m} f_m x_bar^m``
    so no division by the conditioning point occurs.
    """
    X = lam * lam_bar
    f_vals = f_poly_all(N, X)
    lam_s, lam_bar_s = ScaledComplex.from_complex(lam), ScaledComplex.from_complex(lam_bar)
    abs_lam, abs_lam_bar = ScaledComplex.from_complex(abs(lam)), ScaledComplex.from_complex(abs(lam_bar))
    a = b = ScaledComplex.one()
    a_abs = b_abs = ScaledComplex.one()
    terms = []
    bound = ScaledComplex.zero()
    for k in range(N):
        if k > 0:
            xk = scaled_power(x_bar, k)
            yk = scaled_power(y, k)
            fk = f_vals[k]
            a = lam_bar_s * a + fk * xk
            b = lam_s * b + fk * yk
            fk_abs = fk.magnitude()
            a_abs = abs_lam_bar * a_abs + fk_abs * scaled_power(abs(x_bar), k)
            b_abs = abs_lam * b_abs + fk_abs * scaled_power(abs(y), k)
        weight = ScaledComplex.from_log(-math.lgamma(k + 2)) / (f_vals[k] * f_vals[k + 1])
        terms.append(weight * a * b)
        bound = bound + weight.magnitude() * a_abs * b_abs
    total = ScaledComplex.zero()
    for t in terms:
        total = total + t
    if total.is_zero():
        return total, math.inf
    est = math.exp(min(0.0, bound.log_abs() + math.log(4 * N * EPS) - total.log_abs()))
    return total, est


def kappa_finite_closed(N: int, x_bar, y, lam, lam_bar) -> ScaledComplex:
    """Closed-form reduced kernel from the three-variable polynomial only."""
    N = _check_N(N)
    value, _ = _kappa_closed(N, complex(x_bar), complex(y), complex(lam), complex(lam_bar))
    if value is None:
        raise SingularInputError("(x_bar - lam_bar)(y - lam)", "closed form is 0/0 here")
    return value


def kappa_finite_sum(N: int, x_bar, y, lam, lam_bar) -> ScaledComplex:
    """Reduced kernel as a finite biorthogonal sum; regular everywhere."""
    N = _check_N(N)
    return _kappa_sum(N, complex(x_bar), complex(y), complex(lam), complex(lam_bar))[0]


def kappa_finite(N: int, x_bar, y, lam, lam_bar) -> ScaledComplex:
    """Reduced kernel ``kappa^(N)(x_bar, y | lam, lam_bar)``.

    The closed form is used unless its cancellation estimate exceeds
    ``TAU_CLOSED_FORM`` (this covers the 0/0 line ``x_bar = lam_bar`` or
    ``y = lam``), in which case the biorthogonal sum is evaluated too and the
    representation with the smaller error estimate is returned.
    """
    N = _check_N(N)
    x_bar, y, lam, lam_bar = complex(x_bar), complex(y), complex(lam), complex(lam_bar)
    value, est = _kappa_closed(N, x_bar, y, lam, lam_bar)
    if est <= TAU_CLOSED_FORM:
        return value
    try:
        alt, alt_est = _kappa_sum(N, x_bar, y, lam, lam_bar)
    except SingularInputError:
        if value is None:
            raise
        return value
    if value is None or alt_est <= est:
        return alt
    return value


def k11_finite(N: int, args: KernelArgs) -> ScaledComplex:
    (cond,) = args.conditioning
    return weight_omega_scaled(args.x, args.x_bar, cond.lam, cond.lam_bar) * kappa_finite(
        N, args.x_bar, args.y, cond.lam, cond.lam_bar
    )


def _k12_generic(kappa, weight, args: KernelArgs):
    u, v = args.conditioning
    ub, vb = u.lam_bar, v.lam_bar
    c = lambda xb, yy: kappa(xb, yy, u.lam, vb)  # noqa: E731
    base = c(ub, v.lam)
    if (base.is_zero() if isinstance(base, ScaledComplex) else base == 0):
        raise SingularInputError("kappa(u_bar, v | u, v_bar)")
    det = base * c(args.x_bar, args.y) - c(ub, args.y) * c(args.x_bar, v.lam)
    return weight(args.x, args.x_bar, u.lam, vb) * det / base


def k12_finite(N: int, args: KernelArgs) -> ScaledComplex:
    N = _check_N(N)
    return _k12_generic(
        lambda xb, yy, l, lb: kappa_finite(N, xb, yy, l, lb), weight_omega_scaled, args
    )


def k11_finite_edge_coords(N: int, args: KernelArgs, theta: float = 0.0) -> ScaledComplex:
    """Finite-N kernel at ``e^{i theta}(sqrt N + local)``, conjugated by
    ``exp(sqrt(N) x) ... exp(-sqrt(N) y)`` so that it has an N -> inf limit."""
    N = _check_N(N)
    (cond,) = args.conditioning
    s = math.sqrt(N)
    rot, rot_bar = cmath.exp(1j * theta), cmath.exp(-1j * theta)
    glob = KernelArgs(
        rot * (s + args.x),
        rot_bar * (s + args.x_bar),
        rot * (s + args.y),
        rot_bar * (s + args.y_bar),
        (type(cond).pair(rot * (s + cond.lam), rot_bar * (s + cond.lam_bar)),),
    )
    return k11_finite(N, glob) * ScaledComplex.from_log(s * (args.x - args.y))


def k_ev(N: int, x: complex, y: complex, x_bar: complex | None = None, symmetrize: bool = False):
    """Eigenvalue kernel ``(1/pi) exp(-x x_bar) e_{N-1}(x_bar y)``.

    ``symmetrize`` splits the Gaussian factor evenly between the two
    arguments; correlation functions are the same either way.
    """
    N = _check_N(N)
    x, y = complex(x), complex(y)
    xb = x.conjugate() if x_bar is None else complex(x_bar)
    if symmetrize:
        gauss = ScaledComplex.from_log(-(x * xb + y * y.conjugate()) / 2)
    else:
        gauss = ScaledComplex.from_log(-x * xb)
    return gauss * exp_poly(N - 1, xb * y) / math.pi


# -------------------------------------------------------------------- bulk


def _kappa_bulk_z(z: complex) -> complex:
    if abs(z) < TAU_BULK_SERIES:
        # sum_{n>=1} n z^{n-1}/(n+1)!
        return 0.5 + z / 3 + z * z / 8 + z**3 / 30 + z**4 / 144
    return kappa_bulk_direct(z)


def kappa_bulk_direct(z: complex) -> complex:
    """``((z-1)e^z + 1)/z^2`` rearranged as ``(z*expm1(z) - (expm1(z) - z))/z^2``."""
    z = complex(z)
    em1 = complex(np.expm1(z))
    return (z * em1 - (em1 - z)) / (z * z)


def kappa_bulk(x_bar, y, lam, lam_bar) -> complex:
    """``d/dz[(e^z - 1)/z]`` at ``z = (x_bar - lam_bar)(y - lam)``."""
    return _kappa_bulk_z((complex(x_bar) - lam_bar) * (complex(y) - lam))


def weight_bulk(u, u_bar, lam, lam_bar) -> complex:
    w = (u - lam) * (u_bar - lam_bar)
    return (1 + w) * cmath.exp(-w) / math.pi


def k11_bulk(args: KernelArgs) -> complex:
    (cond,) = args.conditioning
    return weight_bulk(args.x, args.x_bar, cond.lam, cond.lam_bar) * kappa_bulk(
        args.x_bar, args.y, cond.lam, cond.lam_bar
    )


def k12_bulk(args: KernelArgs) -> complex:
    return _k12_generic(kappa_bulk, weight_bulk, args)


# -------------------------------------------------------------------- edge


def _kappa_edge_direct(x_bar, y, lam, lam_bar) -> complex:
    f = (lam - y) * (lam_bar - x_bar)
    h = h_edge(lam + lam_bar, lam + x_bar, y + lam_bar, y + x_bar, f)
    return cmath.exp(x_bar * y) * h / (f * f)


def kappa_edge(x_bar, y, lam, lam_bar) -> complex:
    """Edge reduced kernel.

    Near the removable singularity ``(lam - y)(lam_bar - x_bar) = 0`` the
    kernel, being entire in ``y`` and in ``x_bar``, is replaced by its mean over
    circles of radius 1 around the offending variable(s); the trapezoidal rule
    on a circle converges geometrically for entire functions.
    """
    x_bar, y, lam, lam_bar = complex(x_bar), complex(y), complex(lam), complex(lam_bar)
    if abs((lam - y) * (lam_bar - x_bar)) >= TAU_EDGE:
        return _kappa_edge_direct(x_bar, y, lam, lam_bar)
    nodes = _EDGE_CIRCLE_RADIUS * np.exp(2j * np.pi * np.arange(_EDGE_CIRCLE_NODES) / _EDGE_CIRCLE_NODES)
    half = _EDGE_CIRCLE_RADIUS / 2
    ys = y + nodes if abs(y - lam) < half else np.array([y])
    xs = x_bar + nodes if abs(x_bar - lam_bar) < half else np.array([x_bar])
    total = 0j
    for xb in xs:
        for yy in ys:
            total += _kappa_edge_direct(complex(xb), complex(yy), lam, lam_bar)
    return total / (len(xs) * len(ys))


def weight_edge(x, x_bar, lam, lam_bar) -> complex:
    return (1 + (x - lam) * (x_bar - lam_bar)) * cmath.exp(-x * x_bar) / math.pi


def k11_edge(args: KernelArgs) -> complex:
    (cond,) = args.conditioning
    return weight_edge(args.x, args.x_bar, cond.lam, cond.lam_bar) * kappa_edge(
        args.x_bar, args.y, cond.lam, cond.lam_bar
    )


def k12_edge(args: KernelArgs) -> complex:
    return _k12_generic(kappa_edge, weight_edge, args)


def det_scaled(matrix) -> ScaledComplex:
    """Determinant of a square list-of-lists of scaled or plain complex entries."""
    rows = [[e if isinstance(e, ScaledComplex) else ScaledComplex.from_complex(e) for e in row] for row in matrix]
    return sc_det(rows)
