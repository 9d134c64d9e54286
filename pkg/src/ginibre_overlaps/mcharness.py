"""Monte Carlo estimates of conditional overlaps from sampled Ginibre matrices.

Every matrix draws from its own Philox stream keyed by ``(seed, index)``.
Work is split into fixed-size chunks whose partial sums are merged in chunk
order, so results do not depend on how many worker processes ran them.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import IllConditionedSampleError
from .overlaps import d11_finite, d12_finite, rho_finite

CONDITION_THRESHOLD = 1e12
CHUNK_SIZE = 2000
CSV_COLUMNS = (
    "N", "target1_re", "target1_im", "target2_re", "target2_im", "radius", "count",
    "mean_re", "mean_im", "stderr", "n_matrices", "seed", "rejected_fraction",
)


def _generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_ginibre(N: int, seed: int, index: int = 0) -> np.ndarray:
    """Complex Ginibre matrix with ``E|M_ij|^2 = 1``; deterministic in (seed, index)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    g = _generator(seed, index).standard_normal((2, N, N))
    return (g[0] + 1j * g[1]) / math.sqrt(2)


@dataclass(frozen=True)
class OverlapSample:
    eigenvalues: np.ndarray
    overlap_matrix: np.ndarray
    condition_number: float

    def row_sums(self) -> np.ndarray:
        return self.overlap_matrix.sum(axis=1)


def _overlaps_batch(M: np.ndarray):
    """Eigenvalues, overlap matrices and Frobenius condition numbers of a stack."""
    w, R = np.linalg.eig(M)
    W = np.linalg.inv(R)  # rows are the left eigenvectors, conjugated
    left = W @ np.conj(np.swapaxes(W, -1, -2))
    right = np.conj(np.swapaxes(R, -1, -2)) @ R
    O = left * np.swapaxes(right, -1, -2)
    cond = np.linalg.norm(R, axis=(-2, -1)) * np.linalg.norm(W, axis=(-2, -1))
    return w, O, cond


def overlap_matrix(M: np.ndarray, threshold: float = CONDITION_THRESHOLD) -> OverlapSample:
    """``O_ab = <L_a, L_b><R_b, R_a>`` with left vectors from the inverse of R.

    With this ordering O is Hermitian, its diagonal is real and >= 1 and every
    row sums to one.
    """
    M = np.asarray(M, dtype=complex)
    w, O, cond = _overlaps_batch(M[None])
    if not np.isfinite(cond[0]) or cond[0] > threshold:
        raise IllConditionedSampleError(f"eigenvector condition number {cond[0]:.3g}")
    return OverlapSample(w[0], O[0], float(cond[0]))


@dataclass(frozen=True)
class BinnedEstimate:
    """Binned estimate with per-matrix standard error.

    ``stderr`` is the sample standard deviation of the per-matrix
    contributions divided by sqrt(number of accepted matrices); ``count`` is
    the number of eigenvalues (or pairs) that fell in the bin(s).
    """

    N: int
    target: tuple
    bin_radius: float
    mean: complex
    stderr: float
    count: int
    n_matrices: int
    seed: int
    rejected: int = 0
    prediction: complex | None = field(default=None, compare=False)
    row_sum_error: float = field(default=0.0, compare=False)  # worst |sum_b O_ab - 1| over accepted samples
    min_diagonal: float = field(default=math.inf, compare=False)

    @property
    def rejected_fraction(self) -> float:
        return self.rejected / self.n_matrices if self.n_matrices else 0.0

    @property
    def z_score(self) -> float:
        if self.prediction is None or self.stderr == 0:
            return math.nan
        return (self.mean.real - complex(self.prediction).real) / self.stderr

    def csv_row(self) -> list:
        t1 = complex(self.target[0])
        t2 = complex(self.target[1]) if len(self.target) > 1 else None
        return [
            self.N, repr(t1.real), repr(t1.imag),
            "" if t2 is None else repr(t2.real), "" if t2 is None else repr(t2.imag),
            repr(self.bin_radius), self.count, repr(self.mean.real), repr(self.mean.imag),
            repr(self.stderr), self.n_matrices, self.seed, repr(self.rejected_fraction),
        ]


def _chunk_sums(N, kind, targets, radius, seed, start, stop, threshold):
    """Partial sums (sum c, sum |c|^2, hits, accepted, rejected, min row-sum error) over one chunk."""
    M = np.stack([sample_ginibre(N, seed, i) for i in range(start, stop)])
    w, O, cond = _overlaps_batch(M)
    ok = np.isfinite(cond) & (cond <= threshold)
    w, O = w[ok], O[ok]
    area = math.pi * radius**2
    in1 = np.abs(w - targets[0]) < radius
    if kind == "d11":
        diag = np.real(np.diagonal(O, axis1=-2, axis2=-1))
        c = np.sum(np.where(in1, diag, 0.0), axis=1) / area
        hits = int(in1.sum())
    elif kind == "density":
        c = in1.sum(axis=1) / area
        hits = int(in1.sum())
    else:
        in2 = np.abs(w - targets[1]) < radius
        pair = in1[:, :, None] & in2[:, None, :]
        c = np.sum(np.where(pair, O, 0.0), axis=(1, 2)) / area**2
        hits = int(pair.sum())
    sums_err = float(np.max(np.abs(O.sum(axis=2) - 1))) if len(O) else 0.0
    diag_min = float(np.min(np.real(np.diagonal(O, axis1=-2, axis2=-1)))) if len(O) else 1.0
    c = c.astype(complex)
    return (complex(c.sum()), float(np.sum(np.abs(c) ** 2)), float(np.sum(c.real**2)),
            hits, int(ok.sum()), int((~ok).sum()), sums_err, diag_min)


def _run(N, kind, targets, radius, n_matrices, seed, workers, threshold, chunk_size):
    bounds = [(s, min(s + chunk_size, n_matrices)) for s in range(0, n_matrices, chunk_size)]
    args = [(N, kind, targets, radius, seed, a, b, threshold) for a, b in bounds]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_sums, *zip(*args)))
    else:
        parts = [_chunk_sums(*a) for a in args]
    total = 0j
    total_sq_re = 0.0
    hits = accepted = rejected = 0
    worst_row = 0.0
    diag_min = math.inf
    for s, _, sq_re, h, acc, rej, row_err, dmin in parts:  # merged in chunk order
        total += s
        total_sq_re += sq_re
        hits += h
        accepted += acc
        rejected += rej
        worst_row = max(worst_row, row_err)
        diag_min = min(diag_min, dmin)
    if accepted == 0:
        raise IllConditionedSampleError("every sample was rejected")
    mean = total / accepted
    var = max(total_sq_re / accepted - mean.real**2, 0.0) * accepted / max(accepted - 1, 1)
    stderr = math.sqrt(var / accepted)
    if hits == 0:
        warnings.warn("empty bin: no eigenvalues fell inside the target disk", RuntimeWarning)
    return mean, stderr, hits, rejected, worst_row, diag_min


def estimate_d11(N: int, target: complex, bin_radius: float, n_matrices: int, seed: int,
                 workers: int = 1, threshold: float = CONDITION_THRESHOLD,
                 chunk_size: int = CHUNK_SIZE) -> BinnedEstimate:
    if bin_radius <= 0:
        raise ValueError("bin_radius must be positive")
    mean, stderr, hits, rejected, row_err, dmin = _run(
        N, "d11", (complex(target),), bin_radius, n_matrices, seed, workers, threshold, chunk_size
    )
    return BinnedEstimate(N, (complex(target),), bin_radius, mean, stderr, hits, n_matrices, seed, rejected,
                          row_sum_error=row_err, min_diagonal=dmin)


def estimate_density(N: int, target: complex, bin_radius: float, n_matrices: int, seed: int,
                     workers: int = 1, threshold: float = CONDITION_THRESHOLD,
                     chunk_size: int = CHUNK_SIZE) -> BinnedEstimate:
    """Same binning as :func:`estimate_d11` with weight one instead of the overlap."""
    if bin_radius <= 0:
        raise ValueError("bin_radius must be positive")
    mean, stderr, hits, rejected, row_err, dmin = _run(
        N, "density", (complex(target),), bin_radius, n_matrices, seed, workers, threshold, chunk_size
    )
    return BinnedEstimate(N, (complex(target),), bin_radius, mean, stderr, hits, n_matrices, seed, rejected,
                          row_sum_error=row_err, min_diagonal=dmin)


def estimate_d12(N: int, target1: complex, target2: complex, bin_radius: float, n_matrices: int,
                 seed: int, workers: int = 1, threshold: float = CONDITION_THRESHOLD,
                 chunk_size: int = CHUNK_SIZE) -> BinnedEstimate:
    """Pair estimator; the reported stderr is that of the real part."""
    if bin_radius <= 0:
        raise ValueError("bin_radius must be positive")
    targets = (complex(target1), complex(target2))
    if abs(targets[0] - targets[1]) <= 2 * bin_radius:
        raise ValueError("bins overlap: |target1 - target2| must exceed 2 * bin_radius")
    mean, stderr, hits, rejected, row_err, dmin = _run(
        N, "d12", targets, bin_radius, n_matrices, seed, workers, threshold, chunk_size
    )
    return BinnedEstimate(N, targets, bin_radius, mean, stderr, hits, n_matrices, seed, rejected,
                          row_sum_error=row_err, min_diagonal=dmin)


def sum_rule_check(N: int, n_matrices: int, seed: int, threshold: float = CONDITION_THRESHOLD):
    """(worst |row sum - 1|, smallest diagonal overlap, rejected) over accepted samples."""
    worst, dmin, rejected = 0.0, math.inf, 0
    for start in range(0, n_matrices, CHUNK_SIZE):
        out = _chunk_sums(N, "d11", (0j,), 1.0, seed, start, min(start + CHUNK_SIZE, n_matrices), threshold)
        worst = max(worst, out[6])
        dmin = min(dmin, out[7])
        rejected += out[5]
    return worst, dmin, rejected


# ----------------------------------------------------------- bin averages


def _disk_nodes(radius: float):
    """9-point rule for the mean over a disk: 3 Gauss nodes in r^2 times 3 angles."""
    u, w = np.polynomial.legendre.leggauss(3)
    r = radius * np.sqrt((u + 1) / 2)
    wr = w / 2
    angles = 2 * np.pi * np.arange(3) / 3
    offsets = (r[:, None] * np.exp(1j * angles)[None, :]).ravel()
    weights = np.repeat(wr / 3, 3)
    return offsets, weights


def bin_average(fn, target: complex, radius: float) -> complex:
    offsets, weights = _disk_nodes(radius)
    return complex(sum(w * fn(target + o) for o, w in zip(offsets, weights)))


def bin_average_pair(fn, target1: complex, target2: complex, radius: float) -> complex:
    offsets, weights = _disk_nodes(radius)
    total = 0j
    for o1, w1 in zip(offsets, weights):
        for o2, w2 in zip(offsets, weights):
            total += w1 * w2 * fn(target1 + o1, target2 + o2)
    return total


def predict_d11(N: int, target: complex, radius: float) -> complex:
    return bin_average(lambda z: d11_finite(N, [z]).to_complex(), target, radius)


def predict_density(N: int, target: complex, radius: float) -> complex:
    return bin_average(lambda z: rho_finite(N, [z]).to_complex(), target, radius)


def predict_d12(N: int, target1: complex, target2: complex, radius: float) -> complex:
    return bin_average_pair(lambda a, b: d12_finite(N, [a, b]).to_complex(), target1, target2, radius)


def estimates_to_csv(estimates, metadata: dict | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    extra = sorted((metadata or {}).items())
    writer.writerow(list(CSV_COLUMNS) + [k for k, _ in extra])
    for e in estimates:
        writer.writerow(e.csv_row() + [v for _, v in extra])
    return buf.getvalue()


def estimate_as_dict(e: BinnedEstimate) -> dict:
    d = asdict(e)
    d["mean"] = [e.mean.real, e.mean.imag]
    d["target"] = [[complex(t).real, complex(t).imag] for t in e.target]
    d["prediction"] = None if e.prediction is None else [complex(e.prediction).real, complex(e.prediction).imag]
    d["rejected_fraction"] = e.rejected_fraction
    return d
