"""Tri-diagonal moment matrix of the conditioned weight and its LDU factors.

This module is an oracle for the closed-form kernels.  It uses generic dense
linear algebra and the three-term pivot recursion only; nothing here calls
into :mod:`specfun`, so a bug there cannot hide itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidOrderError, SingularInputError
from .scaledarith import ScaledComplex

PIVOT_RTOL = 1e-11


@dataclass(frozen=True)
class MomentFactorization:
    n: int
    lam: complex
    lam_bar: complex
    sub: np.ndarray  # M[i+1, i]
    diag: np.ndarray
    sup: np.ndarray  # M[i, i+1]
    l_band: np.ndarray | None = None  # L[i+1, i]
    d_diag: np.ndarray | None = None
    u_band: np.ndarray | None = None  # U[i, i+1]
    l_inv: np.ndarray | None = field(default=None, repr=False)
    u_inv: np.ndarray | None = field(default=None, repr=False)

    @property
    def x(self) -> complex:
        return self.lam * self.lam_bar

    def dense(self) -> np.ndarray:
        m = np.diag(self.diag).astype(complex)
        m += np.diag(self.sub, -1) + np.diag(self.sup, 1)
        return m


def build_moment_matrix(n: int, lam: complex, lam_bar: complex) -> MomentFactorization:
    """Bands of ``M_ij = i! [d_ij (2 + lam lam_bar + i) - d_{i+1,j} lam (i+1) - d_{i,j+1} lam_bar]``."""
    if int(n) != n or n < 1:
        raise InvalidOrderError(f"matrix size must be >= 1, got {n}")
    n = int(n)
    lam, lam_bar = complex(lam), complex(lam_bar)
    fact = np.array([math.factorial(i) for i in range(n)], dtype=float)
    i = np.arange(n)
    diag = fact * (1 + lam * lam_bar + i + 1)
    sup = -fact[:-1] * lam * (i[:-1] + 1)
    sub = -fact[1:] * lam_bar
    return MomentFactorization(n, lam, lam_bar, sub.astype(complex), diag.astype(complex), sup.astype(complex))


def pivot_ratios(n: int, x: complex) -> np.ndarray:
    """``r_p = p! f_p(x)`` for p = 0..n from ``r_{p+1} = (2+x+p) r_p - p x r_{p-1}``."""
    r = np.empty(n + 1, dtype=complex)
    r[0] = 1.0
    if n >= 1:
        r[1] = 2 + x
    for p in range(1, n):
        r[p + 1] = (2 + x + p) * r[p] - p * x * r[p - 1]
    return r


def ldu_factor(m: MomentFactorization, verify: bool = True) -> MomentFactorization:
    """Tri-diagonal LDU (unit L and U).

    The normalized pivots ``d_p = D_pp / p!`` obey ``d_p = 2 + x + p - p x / d_{p-1}``;
    with ``verify`` they are compared against ``r_{p+1}/r_p``.
    """
    n, x = m.n, m.x
    d = np.empty(n, dtype=complex)
    d[0] = 2 + x
    for p in range(1, n):
        if d[p - 1] == 0:
            raise SingularInputError(f"pivot d_{p - 1}")
        d[p] = 2 + x + p - p * x / d[p - 1]
    fact = np.array([math.factorial(i) for i in range(n)], dtype=float)
    D = fact * d
    scale = np.abs(m.diag) + np.concatenate([[0], np.abs(m.sub)]) + np.concatenate([np.abs(m.sup), [0]])
    if np.any(np.abs(D) < 1e-14 * scale):
        bad = int(np.argmin(np.abs(D) / scale))
        raise SingularInputError(f"pivot D_{bad}{bad}", "f_p(lam lam_bar) vanishes")
    if verify:
        r = pivot_ratios(n, x)
        closed = r[1:] / r[:-1]
        if not np.allclose(d, closed, rtol=PIVOT_RTOL, atol=0):
            worst = float(np.max(np.abs(d - closed) / np.abs(closed)))
            raise ArithmeticError(f"pivot recursion disagrees with r_(p+1)/r_p (rel {worst:.2e})")
    l_band = m.sub / D[:-1]
    u_band = m.sup / D[:-1]
    return replace(m, l_band=l_band, d_diag=D, u_band=u_band)


def factor_matrices(m: MomentFactorization) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = m.n
    L = np.eye(n, dtype=complex) + np.diag(m.l_band, -1)
    U = np.eye(n, dtype=complex) + np.diag(m.u_band, 1)
    return L, np.diag(m.d_diag), U


def invert_factors(m: MomentFactorization) -> MomentFactorization:
    """Dense ``L^{-1}`` and ``U^{-1}`` by triangular solves."""
    if m.d_diag is None:
        m = ldu_factor(m)
    L, _, U = factor_matrices(m)
    eye = np.eye(m.n, dtype=complex)
    l_inv = solve_triangular(L, eye, lower=True, unit_diagonal=True)
    u_inv = solve_triangular(U, eye, lower=False, unit_diagonal=True)
    return replace(m, l_inv=l_inv, u_inv=u_inv)


def closed_form_inverses(n: int, lam: complex, lam_bar: complex) -> tuple[np.ndarray, np.ndarray]:
    """``(L^{-1})_{pq} = lam_bar^{p-q} f_q/f_p`` and ``(U^{-1})_{pq} = lam^{q-p} f_p/f_q``."""
    x = lam * lam_bar
    r = pivot_ratios(n, x)
    f = r[:n] / np.array([math.factorial(i) for i in range(n)], dtype=float)
    p, q = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    with np.errstate(all="ignore"):
        l_inv = np.where(p >= q, lam_bar ** np.maximum(p - q, 0) * f[q] / f[p], 0)
        u_inv = np.where(q >= p, lam ** np.maximum(q - p, 0) * f[p] / f[q], 0)
    return l_inv.astype(complex), u_inv.astype(complex)


def inverse_matrix(m: MomentFactorization) -> np.ndarray:
    """``C = U^{-1} D^{-1} L^{-1}``."""
    if m.l_inv is None:
        m = invert_factors(m)
    return m.u_inv @ np.diag(1 / m.d_diag) @ m.l_inv


def kernel_from_inverse(m: MomentFactorization, x_bar: complex, y: complex) -> complex:
    """``sum_{i,j} y^i C_ij x_bar^j`` with C the inverse of the n x n moment block."""
    C = inverse_matrix(m)
    powers = np.arange(m.n)
    return complex(np.power(complex(y), powers) @ C @ np.power(complex(x_bar), powers))


def kernel_from_dense_inverse(n: int, lam: complex, lam_bar: complex, x_bar: complex, y: complex) -> complex:
    """Same bilinear form with ``numpy.linalg.inv`` of the dense block."""
    C = np.linalg.inv(build_moment_matrix(n, lam, lam_bar).dense())
    powers = np.arange(n)
    return complex(np.power(complex(y), powers) @ C @ np.power(complex(x_bar), powers))


def biorth_polys(m: MomentFactorization, k: int, z: complex, kind: str = "Q") -> complex:
    """Monic biorthogonal polynomial of degree k read off the inverse factors.

    ``kind="Q"`` uses column k of ``U^{-1}``; ``kind="P"`` row k of ``L^{-1}``,
    which evaluates the conjugate-slot polynomial (``conj P_k(conj z)`` for
    physical points).
    """
    if not 0 <= k < m.n:
        raise InvalidOrderError(f"degree {k} outside 0..{m.n - 1}")
    if m.l_inv is None:
        m = invert_factors(m)
    powers = np.power(complex(z), np.arange(m.n))
    if kind == "Q":
        return complex(m.u_inv[:, k] @ powers)
    if kind == "P":
        return complex(m.l_inv[k, :] @ powers)
    raise ValueError("kind must be 'P' or 'Q'")


def prefactor_product(m: MomentFactorization, N: int) -> ScaledComplex:
    """``f_{N-1}(x) e^{-x} / pi`` obtained from the product of the first N-1 pivots.

    The telescoping ``prod_{q<N-1} D_qq = prod_{q=1}^{N-1} q! * f_{N-1}(x)`` is
    checked against the pivot recursion.
    """
    if m.d_diag is None:
        m = ldu_factor(m)
    if not 1 <= N <= m.n:
        raise InvalidOrderError(f"N must lie in 1..{m.n}")
    log_prod = complex(np.sum(np.log(m.d_diag[: N - 1].astype(complex))))
    log_fact = sum(math.lgamma(q + 1) for q in range(1, N))
    f_from_pivots = ScaledComplex.from_log(log_prod - log_fact)
    r = pivot_ratios(N - 1, m.x)
    f_direct = ScaledComplex.from_complex(r[N - 1]) / ScaledComplex.from_log(math.lgamma(N))
    rel = abs((f_from_pivots / f_direct).to_complex() - 1) if N > 1 else 0.0
    if rel > 1e-10:
        raise ArithmeticError(f"pivot product telescoping failed (rel {rel:.2e})")
    return f_from_pivots * ScaledComplex.from_log(-m.x) / math.pi
