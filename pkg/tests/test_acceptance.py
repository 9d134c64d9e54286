"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines as
they happen; they are also repeated in the terminal summary.
"""

import cmath
import math
import time

import mpmath as mp
import numpy as np
import pytest

from ginibre_overlaps import mcharness as mc
from ginibre_overlaps import normalsde as sde
from ginibre_overlaps.cli import main
from ginibre_overlaps.kernels import kappa_finite
from ginibre_overlaps.momentmatrix import build_moment_matrix, kernel_from_inverse
from ginibre_overlaps.overlaps import (
    cm_marginal,
    crossover_ratios,
    d11_bulk,
    d11_bulk_asymptotic,
    d11_bulk_via_derivatives,
    d11_edge,
    d11_finite,
    d11_finite_edge_scaled,
    d12_bulk,
    d12_bulk_asymptotic,
    d12_bulk_via_derivatives,
    d12_edge,
    d12_finite,
    lemma_factor,
    t_swap,
)
from ginibre_overlaps.points import SpectralTuple
from ginibre_overlaps.specfun import phi_closed, phi_direct_all


def val(v):
    return v.to_complex()


def rel(a, b):
    return abs(a - b) / abs(b)


def test_01_kernel_closed_form_vs_moment_inverse(verdict):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 13))
        while True:
            xb, y, lam = rng.uniform(-2, 2, 3) + 1j * rng.uniform(-2, 2, 3)
            if max(abs(xb), abs(y), abs(lam)) <= 2:
                break
        ref = kernel_from_inverse(build_moment_matrix(N, lam, lam.conjugate()), xb, y)
        worst = max(worst, rel(val(kappa_finite(N, xb, y, lam, lam.conjugate())), ref))
    dt = time.perf_counter() - t0
    verdict("1 kernel oracle", worst <= 1e-10 and dt < 10, f"max rel {worst:.2e} (tol 1e-10), {dt:.2f} s")


def test_02_incomplete_sum_identity(verdict):
    rng = np.random.default_rng(102)
    xs = rng.uniform(-3, 3, 50) + 1j * rng.uniform(-3, 3, 50)
    t0 = time.perf_counter()
    worst = max(rel(phi_closed(n, x), d) for x in xs for n, d in enumerate(phi_direct_all(50, x)))
    dt = time.perf_counter() - t0
    verdict("2 phi closed vs direct", worst <= 1e-10 and dt < 1, f"max rel {worst:.2e} (tol 1e-10), {dt:.2f} s")


def test_03_off_diagonal_from_diagonal(verdict):
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    worst, done = 0.0, 0
    while done < 50:
        N = int(rng.integers(2, 9))
        k = int(rng.integers(2, min(N, 4) + 1))
        lams = rng.normal(size=k) + 1j * rng.normal(size=k)
        bars = rng.normal(size=k) + 1j * rng.normal(size=k)
        if abs(1 - (lams[0] - lams[1]) * (bars[0] - bars[1])) <= 0.1:
            continue
        pts = SpectralTuple.from_pairs(lams, bars)
        s = (lams[0] - lams[1]) * (bars[0] - bars[1])
        factor = -cmath.exp(-s) / (1 - s)
        assert abs(factor - lemma_factor(pts)) <= 1e-14 * abs(factor)
        a = val(d12_finite(N, pts))
        worst = max(worst, rel(factor * val(d11_finite(N, t_swap(pts))), a))
        done += 1
    dt = time.perf_counter() - t0
    verdict("3 swap identity", worst <= 1e-9 and dt < 10, f"max rel {worst:.2e} (tol 1e-9), {dt:.2f} s")


def test_04_small_n_quadrature(verdict):
    cases = [(2, [0.3 + 0.1j], False), (2, [-0.7 + 0.4j], False), (3, [0.3 + 0.1j], False),
             (3, [-0.2 - 0.9j], False), (3, [0.3 + 0.1j, -0.5 + 0.4j], True), (3, [0.2, -0.4 + 0.5j], True)]
    t0 = time.perf_counter()
    worst = 0.0
    for N, pts, off in cases:
        ref = val((d12_finite if off else d11_finite)(N, pts))
        worst = max(worst, abs(cm_marginal(N, pts, off) - ref))
    dt = time.perf_counter() - t0
    verdict("4 small-N quadrature", worst <= 1e-5 and dt < 120, f"max abs {worst:.2e} (tol 1e-5), {dt:.1f} s")


def test_05_bulk_two_point_values(verdict):
    worst = 0.0
    for s in (0.1, 1.0, 4.0):
        want = -(1 - (1 + s) * math.exp(-s)) / s**2 / math.pi**2
        got = val(d12_bulk([0.2 - 0.1j, 0.2 - 0.1j + math.sqrt(s) * cmath.exp(0.7j)]))
        worst = max(worst, rel(got, want))
    verdict("5 bulk off-diagonal values", worst <= 1e-12, f"max rel {worst:.2e} (tol 1e-12)")


def _edge_one_point(lam):
    a = 2 * lam.real
    F = 0.5 * math.erfc(a / math.sqrt(2))
    return (math.exp(-a * a / 2) - math.sqrt(2 * math.pi) * a * F) / math.sqrt(2 * math.pi**3)


def _edge_two_point_fd(l1, l2):
    """Off-diagonal edge value with the derivative taken numerically by mpmath."""
    with mp.workdps(30):
        l1, l2 = mp.mpc(l1), mp.mpc(l2)
        b1, b2 = mp.conj(l1), mp.conj(l2)
        l12, b12 = l1 - l2, b1 - b2

        def F(u):
            return mp.erfc(u / mp.sqrt(2)) / 2

        def bracket(x):
            return mp.exp((l1 + b2 + x) ** 2 / 2) * (
                mp.exp(l12 * b12) * F(l1 + b1 + x) * F(l2 + b2 + x)
                - F(l2 + b1 + x) * F(l1 + b2 + x)
                - l12 * b12 * F(l2 + b1) * F(l1 + b2 + x)
            )

        pref = mp.exp(-abs(l12) ** 2 - (l1 + b2) ** 2 / 2) / (mp.pi**2 * l12**2 * b12**2)
        return complex(pref * mp.diff(bracket, 0))


def test_06_edge_values(verdict):
    rng = np.random.default_rng(106)
    grid = rng.uniform(-2, 2, 20) + 1j * rng.uniform(-2, 2, 20)
    w1 = max(rel(val(d11_edge([lam])), _edge_one_point(lam)) for lam in grid)
    pairs = [(0.3 + 0.2j, 0.8 - 0.5j), (-1, -1 + 1j), (0.5, -0.4 + 0.3j), (-2 + 1j, -1.5)]
    w2 = max(rel(val(d12_edge([a, b])), _edge_two_point_fd(a, b)) for a, b in pairs)
    verdict("6 edge values", w1 <= 1e-10 and w2 <= 1e-7,
            f"one-point max rel {w1:.2e} (tol 1e-10), two-point max rel {w2:.2e} (tol 1e-7)")


def test_07_scaling_limits(verdict):
    t0 = time.perf_counter()
    pts = [0.3 + 0.2j, 0.8 - 0.5j]
    limit = val(d11_bulk(pts))
    r100, r200 = (abs(val(d11_finite(N, pts)) / N - limit) for N in (100, 200))
    ratio = r100 / r200
    bulk_ok = abs(ratio / 2 - 1) <= 0.2

    edge_errs = {}
    for p in ([0.3 + 0.2j], [-1, -1 + 1j]):
        edge_errs[str(p)] = rel(d11_finite_edge_scaled(400, p, 0.0), val(d11_edge(p)))
    edge_ok = max(edge_errs.values()) <= 0.05

    base = d11_finite_edge_scaled(400, pts, 0.0)
    theta_dev = max(rel(d11_finite_edge_scaled(400, pts, th), base) for th in (math.pi / 3, 1.7, 4.0))
    dt = time.perf_counter() - t0
    detail = (f"bulk residual ratio {ratio:.3f} (want 2 +/- 20%), edge N=400 rel err "
              + ", ".join(f"{k} {v:.3%}" for k, v in edge_errs.items())
              + f" (tol 5%), theta spread {theta_dev:.1e} (tol 1e-10), {dt:.1f} s")
    verdict("7 scaling limits", bulk_ok and edge_ok and theta_dev <= 1e-10 and dt < 60, detail)


def test_08_edge_to_bulk_crossover(verdict):
    worst = 0.0
    for kind in ("d11", "d12"):
        for pts in ([0.3 + 0.2j, -0.5 + 0.4j], [0.1, 0.9 - 0.3j, -0.4 + 0.8j]):
            edge, bulk = crossover_ratios(pts, -8.0, kind)
            worst = max(worst, abs(edge / bulk - 1))
    verdict("8 crossover at R=-8", worst <= 1e-5, f"max rel {worst:.2e} (tol 1e-5)")


def test_09_well_separated_asymptotics(verdict):
    L = 6.0
    tri = [0, L, L * cmath.exp(1j * math.pi / 3)]
    e11 = abs(val(d11_bulk(tri)) - val(d11_bulk_asymptotic(tri)))
    e12 = abs(val(d12_bulk(tri)) - val(d12_bulk_asymptotic(tri)))
    verdict("9 separated asymptotics", max(e11, e12) <= 1e-8, f"abs d11 {e11:.1e}, d12 {e12:.1e} (tol 1e-8)")


def test_10_derivative_representation(verdict):
    rng = np.random.default_rng(110)
    sets = [[0, 1], [0.4 - 0.3j, -0.2 + 0.9j], [0.2 + 0.1j, 1.0 - 0.6j, -0.8 + 0.5j],
            list(rng.normal(size=3) + 1j * rng.normal(size=3))]
    worst = 0.0
    for pts in sets:
        worst = max(worst, rel(val(d11_bulk_via_derivatives(pts)), val(d11_bulk(pts))),
                    rel(val(d12_bulk_via_derivatives(pts)), val(d12_bulk(pts))))
    verdict("10 derivative representation", worst <= 1e-8, f"max rel {worst:.2e} (tol 1e-8)")


@pytest.mark.slow
def test_11_monte_carlo(verdict):
    t0 = time.perf_counter()
    e11 = mc.estimate_d11(10, 0, 0.3, 100_000, 7)
    p11 = mc.predict_d11(10, 0, 0.3)
    z11 = (e11.mean.real - p11.real) / e11.stderr
    e12 = mc.estimate_d12(10, 0, 1, 0.25, 1_000_000, 7)
    p12 = mc.predict_d12(10, 0, 1, 0.25)
    z12 = (e12.mean.real - p12.real) / e12.stderr
    sums = max(e11.row_sum_error, e12.row_sum_error)
    dt = time.perf_counter() - t0
    ok = abs(z11) < 3 and abs(z12) < 3 and sums <= 1e-6 and dt < 900
    verdict("11 Monte Carlo", ok,
            f"d11 {e11.mean.real:.4f} vs {p11.real:.4f} (z {z11:+.2f}), "
            f"d12 {e12.mean.real:.5f} vs {p12.real:.5f} (z {z12:+.2f}), "
            f"worst row-sum error {sums:.1e} (tol 1e-6), {dt:.0f} s")


@pytest.mark.slow
def test_12_eigenvalue_sde(verdict):
    t0 = time.perf_counter()
    ks5, _ = sde.radial_ks(sde.run_to_time(5, 1.0, 0.01, 10_000, 7))
    _, p1 = sde.radial_ks(sde.run_to_time(1, 1.0, 0.01, 10_000, 8))
    dt = time.perf_counter() - t0
    verdict("12 eigenvalue SDE", ks5 < 0.02 and p1 > 0.01 and dt < 300,
            f"N=5 KS {ks5:.4f} (tol 0.02), N=1 p {p1:.3f} (want > 0.01), {dt:.0f} s")


def test_13_determinism(verdict, tmp_path):
    outputs = {}
    for workers in (1, 2):
        for rep in (0, 1):
            paths = [tmp_path / f"{name}-{workers}-{rep}.csv" for name in ("mc", "sde", "pos")]
            main(["mc", "--N", "6", "--target", "0.2", "--radius", "0.4", "--matrices", "6000", "--seed", "5",
                  "--workers", str(workers), "-o", str(paths[0])])
            main(["sde", "--N", "3", "--t", "0.5", "--runs", "1200", "--seed", "5", "--workers", str(workers),
                  "--format", "csv", "-o", str(paths[1]), "--positions-output", str(paths[2])])
            outputs[workers, rep] = [p.read_bytes() for p in paths]
    same = all(v == outputs[1, 0] for v in outputs.values())
    verdict("13 determinism", same, "mc and sde CSV byte-identical across repeats and workers 1/2"
            if same else "outputs differ")
