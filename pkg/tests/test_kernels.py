import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ginibre_overlaps.errors import InvalidOrderError
from ginibre_overlaps.kernels import (
    TAU_BULK_SERIES,
    _kappa_edge_direct,
    k11_bulk,
    k11_edge,
    k11_finite,
    k11_finite_edge_coords,
    k12_bulk,
    k12_finite,
    k_ev,
    kappa_bulk,
    kappa_bulk_direct,
    kappa_edge,
    kappa_finite,
    kappa_finite_closed,
    kappa_finite_sum,
    weight_omega,
)
from ginibre_overlaps.momentmatrix import build_moment_matrix, kernel_from_dense_inverse, kernel_from_inverse
from ginibre_overlaps.points import KernelArgs, SpectralPoint
from ginibre_overlaps.quadrature import disk_rule

disk = st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False)


def origin_sum(N, xb, y):
    return sum((xb * y) ** k / ((k + 2) * math.factorial(k)) for k in range(N))


def test_weight_values():
    lam, mu = 0.3 + 0.2j, 0.1 - 0.4j
    assert weight_omega(lam, mu, lam, mu) == pytest.approx(cmath.exp(-lam * mu) / math.pi)
    assert weight_omega(0, 0, 0, 0) == pytest.approx(1 / math.pi)
    assert weight_omega(1, 1, 0, 0) == pytest.approx(2 * math.exp(-1) / math.pi)


@pytest.mark.parametrize("N", [1, 2, 5, 12])
def test_kappa_at_origin_is_the_monomial_sum(N):
    for xb, y in [(0.3 + 0.1j, -0.4 + 0.9j), (1.2, 0.7j), (0, 0)]:
        assert abs(kappa_finite(N, xb, y, 0, 0).to_complex() - origin_sum(N, xb, y)) < 1e-13


def test_kappa_one_is_constant_half_at_origin():
    for xb, y in [(0.1, 5.0), (2 + 3j, -1j)]:
        assert kappa_finite(1, xb, y, 0, 0).to_complex() == pytest.approx(0.5, abs=1e-14)


def test_kappa_one_general_conditioning():
    # single-term kernel: 1 / (2 + lam lam_bar)
    lam, lb = 0.7 - 0.2j, 0.7 + 0.2j
    assert abs(kappa_finite(1, 0.3, -0.8j, lam, lb).to_complex() - 1 / (2 + lam * lb)) < 1e-14


@given(st.integers(1, 12), disk, disk, disk)
def test_kappa_matches_moment_matrix(N, xb, y, lam):
    ref = kernel_from_inverse(build_moment_matrix(N, lam, lam.conjugate()), xb, y)
    got = kappa_finite(N, xb, y, lam, lam.conjugate()).to_complex()
    assert abs(got - ref) <= 1e-10 * max(abs(ref), 1e-300)


@given(st.integers(1, 10), disk, disk, disk, disk)
def test_kappa_decoupled_matches_dense_inverse(N, xb, y, lam, lam_bar):
    ref = kernel_from_dense_inverse(N, lam, lam_bar, xb, y)
    got = kappa_finite(N, xb, y, lam, lam_bar).to_complex()
    assert abs(got - ref) <= 1e-8 * max(abs(ref), 1e-12)


@pytest.mark.parametrize("gap", [0.0, 1e-9, 1e-6, 1e-4, 1e-2])
def test_kappa_regular_near_conditioning_point(gap):
    N, lam = 8, 0.6 + 0.3j
    xb, y = lam.conjugate() + gap, lam + 0.5 * gap
    ref = kernel_from_dense_inverse(N, lam, lam.conjugate(), xb, y)
    assert abs(kappa_finite(N, xb, y, lam, lam.conjugate()).to_complex() - ref) <= 1e-10 * abs(ref)


def test_closed_and_sum_branches_agree():
    for N in (3, 20, 60):
        args = (N, 0.9 - 0.3j, 0.4 + 1.1j, 1.0 + 0.5j, 1.0 - 0.5j)
        a, b = kappa_finite_closed(*args), kappa_finite_sum(*args)
        assert abs((a / b).to_complex() - 1) < 1e-9


def test_kappa_large_N_is_finite_and_consistent():
    N = 400
    s = math.sqrt(N)
    args = (N, s + 0.2, s - 0.1j, s + 0.3 + 0.1j, s + 0.3 - 0.1j)
    a = kappa_finite(*args)
    b = kappa_finite_sum(*args)
    assert math.isfinite(a.log_abs())
    assert abs((a / b).to_complex() - 1) < 1e-8


def test_kappa_rejects_bad_order():
    with pytest.raises(InvalidOrderError):
        kappa_finite(0, 0.1, 0.1, 0, 0)


def test_k11_origin_diagonal():
    x = 0.4 - 0.3j
    args = KernelArgs.physical(x, x, 0)
    r2 = abs(x) ** 2
    want = (1 + r2) * math.exp(-r2) * (0.5 + r2 / 3) / math.pi
    assert abs(k11_finite(2, args).to_complex() - want) < 1e-14


def test_k11_factorizes():
    lam = 0.2 + 0.5j
    args = KernelArgs.physical(0.3 - 0.1j, -0.6 + 0.2j, lam)
    prod = weight_omega(args.x, args.x_bar, lam, lam.conjugate()) * kappa_finite(
        5, args.x_bar, args.y, lam, lam.conjugate()
    ).to_complex()
    assert abs(k11_finite(5, args).to_complex() - prod) < 1e-14 * abs(prod)


def test_k12_vanishes_on_repeated_row():
    u, v = 0.3 + 0.2j, -0.5 + 0.1j
    args = KernelArgs(u, u.conjugate(), v, v.conjugate(), (SpectralPoint.physical(u), SpectralPoint.physical(v)))
    assert abs(k12_finite(3, args).to_complex()) < 1e-14


def test_k12_bordered_determinant():
    rng = np.random.default_rng(3)
    u, v, x, y = rng.normal(size=4) + 1j * rng.normal(size=4)
    N = 3

    def kap(xb, yy):
        return kappa_finite(N, xb, yy, u, v.conjugate()).to_complex()

    m = np.array([[kap(u.conjugate(), v), kap(u.conjugate(), y)], [kap(x.conjugate(), v), kap(x.conjugate(), y)]])
    want = weight_omega(x, x.conjugate(), u, v.conjugate()) * np.linalg.det(m) / kap(u.conjugate(), v)
    args = KernelArgs(x, x.conjugate(), y, y.conjugate(), (SpectralPoint.physical(u), SpectralPoint.physical(v)))
    assert abs(k12_finite(N, args).to_complex() - want) < 1e-12 * abs(want)


def test_self_reproducing_kernel():
    lam, N = 0.4 - 0.2j, 3
    rule = disk_rule(48, 24)
    x, w = 0.3 + 0.1j, -0.2 + 0.5j
    vals = np.array(
        [
            k11_finite(N, KernelArgs.physical(x, y, lam)).to_complex()
            * k11_finite(N, KernelArgs.physical(y, w, lam)).to_complex()
            for y in rule.nodes
        ]
    )
    assert abs(rule.integrate(vals) - k11_finite(N, KernelArgs.physical(x, w, lam)).to_complex()) < 1e-6


def test_kappa_bulk_values():
    assert kappa_bulk(0.2, 0.3, 0.3, 0.2) == pytest.approx(0.5)
    # z = (x_bar - lam_bar)(y - lam) = 1
    assert kappa_bulk(1.0, 1.0, 0.0, 0.0) == pytest.approx(1.0, rel=1e-15)
    for s in (0.1, 1.0, 4.0):
        assert kappa_bulk(-s, 1.0, 0.0, 0.0) == pytest.approx((1 - (1 + s) * math.exp(-s)) / s**2, rel=1e-13)


def test_kappa_bulk_branch_consistency():
    for phase in np.linspace(0, 2 * np.pi, 7):
        z = 2 * TAU_BULK_SERIES * cmath.exp(1j * phase)
        assert abs(kappa_bulk(z, 1, 0, 0) - kappa_bulk_direct(z)) < 1e-10 * 0.5


def test_k11_bulk_values_and_translation():
    lam = 0.3 - 0.4j
    assert k11_bulk(KernelArgs.physical(lam, lam, lam)) == pytest.approx(1 / (2 * math.pi))
    x, xb, y, yb, l, lb = 0.2 + 0.1j, 0.5 - 0.2j, -0.3j, 0.4, 0.1 + 0.2j, -0.3 + 0.1j
    mu, mub = 0.7 - 0.2j, -0.4 + 0.9j

    def val(shift, shift_bar):
        args = KernelArgs(x + shift, xb + shift_bar, y + shift, yb + shift_bar, (SpectralPoint.pair(l + shift, lb + shift_bar),))
        return k11_bulk(args)

    assert abs(val(mu, mub) - val(0, 0)) < 1e-13 * abs(val(0, 0))


def test_k12_bulk_repeated_row():
    u, v = 0.1j, 1.2
    args = KernelArgs(u, u.conjugate(), v, v.conjugate(), (SpectralPoint.physical(u), SpectralPoint.physical(v)))
    assert abs(k12_bulk(args)) < 1e-15


def test_k_ev_values():
    x = 0.3 - 0.7j
    assert abs(k_ev(1, x, 1.1).to_complex() - math.exp(-abs(x) ** 2) / math.pi) < 1e-15
    assert k_ev(7, 0, 0).to_complex() == pytest.approx(1 / math.pi)
    assert k_ev(200, 0.5, 0.5).to_complex() == pytest.approx(1 / math.pi, rel=1e-13)
    a = k_ev(5, x, x, symmetrize=True).to_complex()
    assert a == pytest.approx(k_ev(5, x, x).to_complex(), rel=1e-14)


def test_kappa_edge_crossover_to_bulk():
    R = -8.0
    xb, y, lam = 0.3 + 0.2j, -0.1 + 0.4j, 0.2 - 0.3j
    lb = lam.conjugate()
    edge = kappa_edge(R + xb, R + y, R + lam, R + lb)
    conj = cmath.exp(-(R * R + R * (xb + y) - lam * lb + lb * y + lam * xb))
    bulk = kappa_bulk(xb, y, lam, lb)
    assert abs(edge * conj / bulk - 1) < 1e-6


def test_kappa_edge_circle_mean_matches_direct_value():
    # the averaging used near the removable singularity reproduces the direct value where both apply
    lam, xb, y = 0.4 + 0.3j, 0.9 - 0.5j, 2.6 + 1.9j
    lb = lam.conjugate()
    nodes = np.exp(2j * np.pi * np.arange(48) / 48)
    mean = np.mean([_kappa_edge_direct(xb, y + n, lam, lb) for n in nodes])
    direct = _kappa_edge_direct(xb, y, lam, lb)
    assert abs(mean - direct) < 1e-12 * abs(direct)


def test_kappa_edge_continuous_across_threshold():
    from ginibre_overlaps.kernels import TAU_EDGE

    lam, xb = 0.4 + 0.3j, 0.9 - 0.5j
    lb = lam.conjugate()
    t = TAU_EDGE / abs(lb - xb)
    inside = kappa_edge(xb, lam + t * (1 - 1e-9), lam, lb)
    outside = kappa_edge(xb, lam + t * (1 + 1e-9), lam, lb)
    assert abs(inside - outside) < 1e-9 * abs(outside)
    at = kappa_edge(xb, lam, lam, lb)
    assert np.isfinite(at) and abs(at) > 0


def test_kappa_edge_zero_bracket_case():
    # b = d, c = a, f = 0 makes the bracket vanish identically
    from ginibre_overlaps.specfun import h_edge

    assert abs(h_edge(0.3 + 0.1j, 0.5, 0.3 + 0.1j, 0.5, 0)) < 1e-15


def test_edge_kernel_finite_n_convergence():
    lam = 0.2 + 0.1j
    args = KernelArgs.physical(0.5 - 0.2j, -0.1 + 0.3j, lam)
    limit = k11_edge(args)
    err = [abs(k11_finite_edge_coords(N, args).to_complex() - limit) / abs(limit) for N in (400, 1600)]
    assert err[0] < 0.05
    assert err[1] < err[0]
