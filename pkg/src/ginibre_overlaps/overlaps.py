"""Conditional overlap functions D11 and D12 and the eigenvalue correlations.

All functions accept a :class:`SpectralTuple`; points may be decoupled, in
which case everything is the analytic continuation in the conjugate slots.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidOrderError, SingularInputError
from .kernels import (
    _check_N,
    det_scaled,
    k11_bulk,
    k11_edge,
    k11_finite,
    k12_bulk,
    k12_edge,
    k12_finite,
    k_ev,
    kappa_bulk,
    kappa_edge,
    kappa_finite,
)
from .points import KernelArgs, SpectralPoint, SpectralTuple
from .scaledarith import ScaledComplex
from .quadrature import disk_rule
from .specfun import SQRT_2PI, erfc_F, f_poly_nonzero, h_denominator, h_edge


class OverlapKind(str, Enum):
    D11 = "D11"
    D12 = "D12"
    RHO = "rho"
    CONDITIONAL_EXPECTATION = "conditional_expectation"


@dataclass(frozen=True)
class OverlapValue:
    value: ScaledComplex
    kind: OverlapKind

    def to_complex(self) -> complex:
        return self.value.to_complex()

    @property
    def real(self) -> float:
        return self.to_complex().real

    def __complex__(self) -> complex:
        return self.to_complex()


def _as_tuple(lams) -> SpectralTuple:
    return lams if isinstance(lams, SpectralTuple) else SpectralTuple(lams)


def _need_k(lams: SpectralTuple, lowest: int, highest: int | None = None) -> int:
    k = lams.k
    if k < lowest or (highest is not None and k > highest):
        top = "" if highest is None else f"..{highest}"
        raise InvalidOrderError(f"number of points k={k} outside {lowest}{top}")
    return k


def _minor(entry, lams: SpectralTuple, start: int):
    rest = lams[start:]
    return [[entry(p, q) for q in rest] for p in rest]


def _args(p: SpectralPoint, q: SpectralPoint, *conditioning) -> KernelArgs:
    return KernelArgs(p.lam, p.lam_bar, q.lam, q.lam_bar, tuple(conditioning))


def _sc(v) -> ScaledComplex:
    return v if isinstance(v, ScaledComplex) else ScaledComplex.from_complex(v)


def t_swap(lams) -> SpectralTuple:
    """Exchange the conjugate slots of the first two points."""
    lams = _as_tuple(lams)
    _need_k(lams, 2)
    p1, p2 = lams[0], lams[1]
    swapped = (
        SpectralPoint(p1.lam, p2.lam_bar, True),
        SpectralPoint(p2.lam, p1.lam_bar, True),
    )
    return SpectralTuple(swapped + tuple(lams[2:]))


def lemma_factor(lams) -> complex:
    """``-exp(-s)/(1-s)`` with ``s = (lam_1 - lam_2)(lam_bar_1 - lam_bar_2)``."""
    lams = _as_tuple(lams)
    s = (lams[0].lam - lams[1].lam) * (lams[0].lam_bar - lams[1].lam_bar)
    if s == 1:
        raise SingularInputError("1 - lam_12 lam_bar_12")
    return -cmath.exp(-s) / (1 - s)


# ---------------------------------------------------------------- finite N


def d11_finite(N: int, lams) -> OverlapValue:
    lams = _as_tuple(lams)
    N = _check_N(N)
    _need_k(lams, 1, N)
    p1 = lams[0]
    x = p1.lam * p1.lam_bar
    pref = f_poly_nonzero(N - 1, x, "f_(N-1)(lam_1 lam_bar_1)") * ScaledComplex.from_log(-x) / math.pi
    if lams.k == 1:
        return OverlapValue(pref, OverlapKind.D11)
    det = det_scaled(_minor(lambda p, q: k11_finite(N - 1, _args(p, q, p1)), lams, 1))
    return OverlapValue(pref * det, OverlapKind.D11)


def d12_finite(N: int, lams) -> OverlapValue:
    lams = _as_tuple(lams)
    N = _check_N(N)
    _need_k(lams, 2, N)
    p1, p2 = lams[0], lams[1]
    kappa = kappa_finite(N - 1, p1.lam_bar, p2.lam, p1.lam, p2.lam_bar)
    pref = (
        -f_poly_nonzero(N - 1, p1.lam * p2.lam_bar, "f_(N-1)(lam_1 lam_bar_2)")
        * ScaledComplex.from_log(-p1.lam * p1.lam_bar - p2.lam * p2.lam_bar)
        * kappa
        / math.pi**2
    )
    if lams.k == 2:
        return OverlapValue(pref, OverlapKind.D12)
    det = det_scaled(_minor(lambda p, q: k12_finite(N - 1, _args(p, q, p1, p2)), lams, 2))
    return OverlapValue(pref * det, OverlapKind.D12)


def edge_coordinates(N: int, lams, theta: float = 0.0) -> SpectralTuple:
    """Points ``e^{i theta}(sqrt N + lam)`` with conjugate slots rotated the other way."""
    lams = _as_tuple(lams)
    s = math.sqrt(N)
    rot = cmath.exp(1j * theta)
    return SpectralTuple(
        SpectralPoint.pair(rot * (s + p.lam), (s + p.lam_bar) / rot) for p in lams
    )


def d11_finite_edge_scaled(N: int, lams, theta: float = 0.0) -> complex:
    """``N^{-1/2} D11^(N,k)`` at edge coordinates."""
    return d11_finite(N, edge_coordinates(N, lams, theta)).to_complex() / math.sqrt(N)


def d12_finite_edge_scaled(N: int, lams, theta: float = 0.0) -> complex:
    return d12_finite(N, edge_coordinates(N, lams, theta)).to_complex() / math.sqrt(N)


# -------------------------------------------------------------------- bulk


def d11_bulk(lams) -> OverlapValue:
    lams = _as_tuple(lams)
    _need_k(lams, 1)
    p1 = lams[0]
    det = det_scaled(_minor(lambda p, q: k11_bulk(_args(p, q, p1)), lams, 1))
    return OverlapValue(det / math.pi, OverlapKind.D11)


def d12_bulk(lams) -> OverlapValue:
    lams = _as_tuple(lams)
    _need_k(lams, 2)
    p1, p2 = lams[0], lams[1]
    pref = -kappa_bulk(p1.lam_bar, p2.lam, p1.lam, p2.lam_bar) / math.pi**2
    det = det_scaled(_minor(lambda p, q: k12_bulk(_args(p, q, p1, p2)), lams, 2))
    return OverlapValue(_sc(pref) * det, OverlapKind.D12)


def d11_bulk_asymptotic(lams) -> OverlapValue:
    """Large-separation form ``pi^{-k} prod_m (1 - |lam_m1|^{-4})``."""
    lams = _as_tuple(lams)
    k = _need_k(lams, 1)
    p1 = lams[0]
    value = complex(math.pi**-k)
    for p in lams[1:]:
        s = (p.lam - p1.lam) * (p.lam_bar - p1.lam_bar)
        if s == 0:
            raise SingularInputError("lam_m - lam_1", "coincident points")
        value *= 1 - 1 / (s * s)
    return OverlapValue(_sc(value), OverlapKind.D11)


def d12_bulk_asymptotic(lams) -> OverlapValue:
    lams = _as_tuple(lams)
    k = _need_k(lams, 2)
    p1, p2 = lams[0], lams[1]
    s12 = (p1.lam - p2.lam) * (p1.lam_bar - p2.lam_bar)
    if s12 == 0:
        raise SingularInputError("lam_1 - lam_2", "coincident points")
    value = -(math.pi**-k) / (s12 * s12)
    for p in lams[2:]:
        t = (p.lam - p1.lam) * (p.lam_bar - p2.lam_bar)
        if t == 0:
            raise SingularInputError("(lam_m - lam_1)(lam_bar_m - lam_bar_2)", "coincident points")
        value *= 1 - 1 / (t * t)
    return OverlapValue(_sc(value), OverlapKind.D12)


# -------------------------------------------------------------------- edge


def d11_edge_prefactor(lam: complex, lam_bar: complex) -> complex:
    """``(2 pi^3)^{-1/2} (exp(-a^2/2) - sqrt(2 pi) a F(a))`` with ``a = lam + lam_bar``."""
    return h_denominator(lam + lam_bar) / math.sqrt(2 * math.pi**3)


def d11_edge(lams) -> OverlapValue:
    lams = _as_tuple(lams)
    _need_k(lams, 1)
    p1 = lams[0]
    pref = d11_edge_prefactor(p1.lam, p1.lam_bar)
    det = det_scaled(_minor(lambda p, q: k11_edge(_args(p, q, p1)), lams, 1))
    return OverlapValue(_sc(pref) * det, OverlapKind.D11)


def d12_edge(lams) -> OverlapValue:
    """Off-diagonal edge overlap.

    The ``H / (lam_12^2 lam_bar_12^2)`` factor of the prefactor is the edge
    reduced kernel at ``(lam_bar_1, lam_2 | lam_1, lam_bar_2)`` up to an
    exponential, so it is evaluated through :func:`kappa_edge`, which stays
    regular when the two points merge.
    """
    lams = _as_tuple(lams)
    _need_k(lams, 2)
    p1, p2 = lams[0], lams[1]
    a = p1.lam + p2.lam_bar
    kappa = kappa_edge(p1.lam_bar, p2.lam, p1.lam, p2.lam_bar)
    expo = -p1.lam * p1.lam_bar - p2.lam * p2.lam_bar + p1.lam * p2.lam_bar
    pref = -h_denominator(a) * cmath.exp(expo) * kappa / math.sqrt(2 * math.pi**5)
    det = det_scaled(_minor(lambda p, q: k12_edge(_args(p, q, p1, p2)), lams, 2))
    return OverlapValue(_sc(pref) * det, OverlapKind.D12)


def d12_edge_two_point_explicit(lam1: complex, lam_bar1: complex, lam2: complex, lam_bar2: complex) -> complex:
    """Two-point edge off-diagonal overlap straight from ``H``, without kernels."""
    l12, lb12 = lam1 - lam2, lam_bar1 - lam_bar2
    a = lam1 + lam_bar2
    h = h_edge(a, lam1 + lam_bar1, lam2 + lam_bar2, lam2 + lam_bar1, -l12 * lb12)
    expo = -l12 * lb12 - a * a / 2
    den = 1 - SQRT_2PI * a * cmath.exp(a * a / 2) * erfc_F(a)
    return -den * cmath.exp(expo) * h / (l12**2 * lb12**2) / math.sqrt(2 * math.pi**5)


def crossover_ratios(lams, R: float = -8.0, kind: str = "d11") -> tuple[complex, complex]:
    """(edge ratio at shift R, bulk ratio) for the edge-to-bulk crossover.

    The edge ratio divides the k-point edge overlap at ``R + lams`` by the
    one-point (D11) or two-point (D12) edge overlap at the same shift.
    """
    lams = _as_tuple(lams)
    shifted = lams.shifted(R, R)
    if kind == "d11":
        edge = d11_edge(shifted).to_complex() / d11_edge(shifted[:1]).to_complex()
        bulk = d11_bulk(lams).to_complex() / d11_bulk(lams[:1]).to_complex()
    elif kind == "d12":
        edge = d12_edge(shifted).to_complex() / d12_edge(shifted[:2]).to_complex()
        bulk = d12_bulk(lams).to_complex() / d12_bulk(lams[:2]).to_complex()
    else:
        raise ValueError("kind must be 'd11' or 'd12'")
    return edge, bulk


# ------------------------------------------------------------ correlations


def rho_finite(N: int, lams) -> OverlapValue:
    lams = _as_tuple(lams)
    N = _check_N(N)
    _need_k(lams, 1, N)
    entries = [[k_ev(N, p.lam, q.lam, x_bar=p.lam_bar) for q in lams] for p in lams]
    return OverlapValue(det_scaled(entries), OverlapKind.RHO)


def _bulk_exp_matrix(lams: SpectralTuple, differentiated=()) -> ScaledComplex:
    """``exp(-sum lam lam_bar) det(exp(lam_bar_i lam_j))`` with d/d lam_m applied for m in
    ``differentiated``; a derivative only touches column m, multiplying row i by
    ``lam_bar_i - lam_bar_m`` once the Gaussian factor of point m is folded in."""
    rows = []
    for p in lams:
        row = []
        for j, q in enumerate(lams):
            entry = ScaledComplex.from_log(p.lam_bar * q.lam - q.lam * q.lam_bar)
            if j in differentiated:
                entry = entry * (p.lam_bar - q.lam_bar)
            row.append(entry)
        rows.append(row)
    return det_scaled(rows)


def rho_bulk(lams) -> OverlapValue:
    lams = _as_tuple(lams)
    k = _need_k(lams, 1)
    return OverlapValue(_bulk_exp_matrix(lams) / math.pi**k, OverlapKind.RHO)


def conditional_expectation_d11(N: int, lams) -> float:
    """``E(O_11 | Lambda_1..k = lams)``, i.e. D11 divided by the k-point density."""
    lams = _as_tuple(lams)
    if not lams.is_physical:
        raise ValueError("conditional expectation needs physical points")
    rho = rho_finite(N, lams).value
    if rho.is_zero():
        raise SingularInputError("rho^(N,k)")
    return (d11_finite(N, lams).value / rho).to_complex().real


# ---------------------------------------------------- derivative formulas


def _first_order_product(lams: SpectralTuple, ops) -> ScaledComplex:
    """Apply ``prod_m (a_m + b_m d/d lam_m)`` to ``exp(-sum lam lam_bar) det(...)``.

    ``ops`` maps point index m to (a_m, b_m).  Operators in different
    variables commute and the determinant is linear in each column, so the
    product expands over subsets of differentiated indices.
    """
    total = ScaledComplex.zero()
    indices = sorted(ops)
    for r in range(len(indices) + 1):
        for subset in itertools.combinations(indices, r):
            coeff = complex(1)
            for m in indices:
                coeff *= ops[m][1] if m in subset else ops[m][0]
            if coeff == 0:
                continue
            total = total + coeff * _bulk_exp_matrix(lams, set(subset))
    return total


def d11_bulk_via_derivatives(lams) -> OverlapValue:
    """Bulk D11 as first-order differential operators applied to the bulk density (k <= 3)."""
    lams = _as_tuple(lams)
    k = _need_k(lams, 1, 3)
    p1 = lams[0]
    scale = complex((-1) ** (k - 1))
    ops = {}
    for m in range(1, k):
        d = lams[m].lam - p1.lam
        s = d * (lams[m].lam_bar - p1.lam_bar)
        if s == 0:
            raise SingularInputError("lam_m - lam_1", "coincident points")
        scale *= (1 + s) / (s * s)
        ops[m] = (1 - s, -d)
    value = scale * _first_order_product(lams, ops) / math.pi**k
    return OverlapValue(value, OverlapKind.D11)


def d12_bulk_via_derivatives(lams) -> OverlapValue:
    """Bulk D12 from the density by first-order operators (k = 2, 3)."""
    lams = _as_tuple(lams)
    k = _need_k(lams, 2, 3)
    p1, p2 = lams[0], lams[1]
    s12 = (p1.lam - p2.lam) * (p1.lam_bar - p2.lam_bar)
    if s12 == 0:
        raise SingularInputError("lam_1 - lam_2", "coincident points")
    scale = complex((-1) ** (k - 1)) / (s12 * s12)
    ops = {1: (1, -(p2.lam - p1.lam))}
    for m in range(2, k):
        d = lams[m].lam - p1.lam
        t = d * (lams[m].lam_bar - p2.lam_bar)
        if t == 0:
            raise SingularInputError("(lam_m - lam_1)(lam_bar_m - lam_bar_2)", "coincident points")
        scale *= (1 + t) / (t * t)
        ops[m] = (1 - t, -d)
    value = scale * _first_order_product(lams, ops) / math.pi**k
    return OverlapValue(value, OverlapKind.D12)


# --------------------------------------------- all-eigenvalue conditioning


def _log_partition(N: int) -> float:
    """log Z_N with ``Z_N = pi^N prod_{j=1}^N j!``."""
    return N * math.log(math.pi) + sum(math.lgamma(j + 1) for j in range(1, N + 1))


def _cm_terms(lam, lam_bar, off_diagonal: bool):
    """Polynomial part and exponent of the fully conditioned overlaps.

    ``lam`` and ``lam_bar`` are length-N sequences of arrays (or scalars) that
    broadcast together.  Returns ``(poly, exponent)`` with
    ``value = poly * exp(exponent)``; ``poly`` already contains ``N!`` and the
    Vandermonde factors.
    """
    N = len(lam)
    poly = math.factorial(N)
    for i in range(N):
        for j in range(i + 1, N):
            poly = poly * (lam[i] - lam[j]) * (lam_bar[i] - lam_bar[j])
    if off_diagonal:
        s12 = (lam[0] - lam[1]) * (lam_bar[0] - lam_bar[1])
        poly = -poly / s12
        for m in range(2, N):
            t = (lam[0] - lam[m]) * (lam_bar[1] - lam_bar[m])
            poly = poly * (1 + 1 / t)
    else:
        for m in range(1, N):
            s = (lam[0] - lam[m]) * (lam_bar[0] - lam_bar[m])
            poly = poly * (1 + 1 / s)
    exponent = -sum(lam[i] * lam_bar[i] for i in range(N)) - _log_partition(N)
    return poly, exponent


def _cm_value(all_lams, off_diagonal: bool) -> ScaledComplex:
    lams = _as_tuple(all_lams)
    N = lams.k
    if off_diagonal:
        _need_k(lams, 2)
    for i in range(N):
        for j in range(i + 1, N):
            if lams[i].lam == lams[j].lam or lams[i].lam_bar == lams[j].lam_bar:
                raise SingularInputError(f"lam_{i + 1} - lam_{j + 1}", "coincident eigenvalues")
    with np.errstate(divide="raise", invalid="raise"):
        try:
            poly, exponent = _cm_terms(lams.lams, lams.lam_bars, off_diagonal)
        except (ZeroDivisionError, FloatingPointError) as exc:
            raise SingularInputError("eigenvalue difference", str(exc)) from exc
    return _sc(complex(poly)) * ScaledComplex.from_log(exponent)


def cm_conditional_d11(N: int, all_lams) -> OverlapValue:
    """D11 conditioned on all N eigenvalues: ``N! prod (1 + 1/|lam_1 - lam_m|^2) p_N``."""
    lams = _as_tuple(all_lams)
    if lams.k != N:
        raise InvalidOrderError(f"need all {N} eigenvalues, got {lams.k}")
    return OverlapValue(_cm_value(lams, False), OverlapKind.D11)


def cm_conditional_d12(N: int, all_lams) -> OverlapValue:
    lams = _as_tuple(all_lams)
    if lams.k != N:
        raise InvalidOrderError(f"need all {N} eigenvalues, got {lams.k}")
    return OverlapValue(_cm_value(lams, True), OverlapKind.D12)


def cm_marginal(N: int, fixed, off_diagonal: bool = False, rule=None) -> complex:
    """Integrate the fully conditioned overlap over the eigenvalues not in ``fixed``.

    ``D^(N,k) = 1/(N-k)! * integral of D^(N,N)``.  Free eigenvalues are
    physical; integration uses a product disk rule (default radius 8).
    """
    fixed = _as_tuple(fixed)
    k = fixed.k
    free = N - k
    if free < 0 or free > 2:
        raise InvalidOrderError("quadrature oracle supports one or two free eigenvalues")
    rule = rule or disk_rule()
    lam = [complex(p.lam) for p in fixed]
    lam_bar = [complex(p.lam_bar) for p in fixed]
    if free == 0:
        return _cm_value(fixed, off_diagonal).to_complex()
    if free == 1:
        z = rule.nodes
        poly, exponent = _cm_terms(lam + [z], lam_bar + [z.conj()], off_diagonal)
        return rule.integrate(poly * np.exp(exponent))
    total = 0j
    z2 = rule.nodes
    for z1, w1 in zip(rule.nodes, rule.weights):
        poly, exponent = _cm_terms(
            lam + [z1, z2], lam_bar + [z1.conjugate(), z2.conj()], off_diagonal
        )
        total += w1 * rule.integrate(poly * np.exp(exponent))
    return total / 2
