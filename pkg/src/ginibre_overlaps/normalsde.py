"""Euler-Maruyama simulation of the eigenvalue SDE for Brownian normal matrices.

    d lam_i = c * sum_{k != i} dt / (conj(lam_i) - conj(lam_k)) + s * dW_i

with independent complex Brownian motions normalized by E|dW|^2 = dt.  The
default coefficients (c, s) = (1/2, 1) make the time-1 law the Ginibre
eigenvalue law; other presets are available for comparison.

Steps are sized so that neither drift nor noise can close the smallest gap
in one step.  A proposal that still brings two particles closer than
``1e-4 sqrt(dt)`` is split in two with a Brownian bridge, so the driving
path is the same whether or not the step was refined.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .errors import CollisionError

S_MIN_FACTOR = 1e-4
DT_MIN = 1e-12
DEFAULT_ETA = 0.01
DEFAULT_JITTER = 1e-6
BLOCK_SIZE = 500


@dataclass(frozen=True)
class SdeModel:
    drift: float
    noise: float


PRESETS = {
    "ginibre": SdeModel(0.5, 1.0),
    "strong-drift": SdeModel(2.0, math.sqrt(2.0)),
    "generator": SdeModel(1.0, math.sqrt(2.0)),
}


def get_model(model) -> SdeModel:
    if isinstance(model, SdeModel):
        return model
    try:
        return PRESETS[model]
    except KeyError:
        raise ValueError(f"unknown SDE preset {model!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class SdeState:
    positions: np.ndarray
    time: float = 0.0
    min_separation: float = math.inf
    steps_taken: int = 0
    rejected_steps: int = 0

    @staticmethod
    def start(positions) -> "SdeState":
        pos = np.asarray(positions, dtype=complex)
        return SdeState(pos, 0.0, float(min_separation(pos)))


def _pairs(n: int):
    """Index pairs i < j and the (pairs x n) incidence matrix with +1 at i, -1 at j."""
    i, j = np.triu_indices(n, 1)
    inc = np.zeros((len(i), n))
    inc[np.arange(len(i)), i] = 1.0
    inc[np.arange(len(i)), j] = -1.0
    return i, j, inc


def min_separation(positions: np.ndarray) -> np.ndarray:
    """Smallest pairwise distance along the last axis (inf for a single particle)."""
    n = positions.shape[-1]
    if n < 2:
        return np.full(positions.shape[:-1], np.inf)
    i, j, _ = _pairs(n)
    return np.abs(positions[..., i] - positions[..., j]).min(axis=-1)


def drift(positions: np.ndarray, coeff: float) -> np.ndarray:
    """``coeff * sum_{k != i} 1/(conj(lam_i) - conj(lam_k))`` along the last axis."""
    n = positions.shape[-1]
    if n < 2:
        return np.zeros_like(positions, dtype=complex)
    i, j, inc = _pairs(n)
    return coeff * (1 / np.conj(positions[..., i] - positions[..., j])) @ inc


def complex_noise(rng: np.random.Generator, shape, dt) -> np.ndarray:
    """Complex Gaussian increments with ``E|dW|^2 = dt``."""
    g = rng.standard_normal((2,) + tuple(shape))
    return (g[0] + 1j * g[1]) * np.sqrt(np.asarray(dt) / 2)


def _propose(pos, dt, dW, model: SdeModel, zero_noise: bool):
    move = drift(pos, model.drift) * dt
    if not zero_noise:
        move = move + model.noise * dW
    return pos + move


def _bridge_split(dW, dt, rng):
    """Split an increment over dt into two halves with the right joint law."""
    half = dW / 2 + complex_noise(rng, np.shape(dW), np.asarray(dt) / 4)
    return half, dW - half


def sde_step(state: SdeState, dt: float, rng: np.random.Generator, noise=None, model="ginibre",
             zero_noise: bool = False, s_min_factor: float = S_MIN_FACTOR,
             dt_min: float = DT_MIN) -> SdeState:
    """One Euler-Maruyama step of length dt, refined by bridge halving if needed.

    ``noise`` supplies the Brownian increment over dt (drawn from ``rng`` if
    omitted); ``rng`` also feeds any bridge refinements.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    model = get_model(model)
    pos = np.asarray(state.positions, dtype=complex)
    dW = complex_noise(rng, pos.shape, dt) if noise is None else np.asarray(noise, dtype=complex)
    pending = [(dt, dW)]
    steps = rejected = 0
    while pending:
        h, inc = pending.pop()
        proposal = _propose(pos, h, inc, model, zero_noise)
        if pos.size > 1 and min_separation(proposal) < s_min_factor * math.sqrt(h):
            if h / 2 < dt_min:
                raise CollisionError(f"step size fell below {dt_min:g} near a collision")
            rejected += 1
            first, second = _bridge_split(inc, h, rng)
            pending.append((h / 2, second))
            pending.append((h / 2, first))
            continue
        pos = proposal
        steps += 1
    return SdeState(pos, state.time + dt, float(min_separation(pos)),
                    state.steps_taken + steps, state.rejected_steps + rejected)


def adaptive_dt(separation, remaining, dt0: float, eta: float = DEFAULT_ETA):
    return np.minimum(np.minimum(dt0, eta * np.asarray(separation) ** 2), remaining)


@dataclass
class SdeEnsemble:
    N: int
    t_end: float
    positions: np.ndarray  # (n_runs, N); rows of dropped runs are nan
    dropped: np.ndarray  # bool per run
    steps: np.ndarray
    rejected: np.ndarray
    seed: int
    model: str = "ginibre"
    meta: dict = field(default_factory=dict)

    @property
    def n_dropped(self) -> int:
        return int(self.dropped.sum())

    def kept(self) -> np.ndarray:
        return self.positions[~self.dropped]


def _run_block(N, t_end, dt0, n, seed, block, model, eta, jitter, zero_noise, s_min_factor, dt_min):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
    model = get_model(model)
    pos = complex_noise(rng, (n, N), 2 * jitter**2) if N > 1 else np.zeros((n, N), complex)
    t = np.zeros(n)
    done = np.zeros(n, bool)
    dropped = np.zeros(n, bool)
    steps = np.zeros(n, np.int64)
    rejected = np.zeros(n, np.int64)
    pending: dict[int, list] = {}
    has_pending = np.zeros(n, bool)
    pi, pj, inc = _pairs(N)
    gap2 = lambda z: np.min(np.abs(z[:, pi] - z[:, pj]) ** 2, axis=1) if N > 1 else np.full(n, np.inf)  # noqa: E731
    sep2 = gap2(pos)
    while not done.all():
        dt = adaptive_dt(np.sqrt(sep2), t_end - t, dt0, eta)
        dW = complex_noise(rng, (n, N), dt[:, None])
        for i, stack in pending.items():
            dt[i], dW[i] = stack.pop()
            has_pending[i] = bool(stack)
        pending = {i: s for i, s in pending.items() if s}
        active = ~done
        move = dW * model.noise if not zero_noise else np.zeros_like(dW)
        if N > 1:
            move = move + model.drift * dt[:, None] * ((1 / np.conj(pos[:, pi] - pos[:, pj])) @ inc)
        proposal = pos + move
        new_sep2 = gap2(proposal)
        bad = active & (new_sep2 < s_min_factor**2 * dt)
        for i in np.flatnonzero(bad):
            if dt[i] / 2 < dt_min:
                dropped[i] = done[i] = True
                has_pending[i] = False
                pending.pop(int(i), None)
                continue
            first, second = _bridge_split(dW[i], dt[i], rng)
            stack = pending.setdefault(int(i), [])
            stack.append((dt[i] / 2, second))
            stack.append((dt[i] / 2, first))
            has_pending[i] = True
            rejected[i] += 1
        ok = active & ~bad
        pos[ok] = proposal[ok]
        sep2[ok] = new_sep2[ok]
        t[ok] += dt[ok]
        steps[ok] += 1
        finished = ok & (t >= t_end * (1 - 1e-14)) & ~has_pending
        done |= finished
    pos[dropped] = np.nan
    return pos, dropped, steps, rejected


def run_to_time(N: int, t_end: float, dt0: float, n_runs: int, seed: int, model="ginibre",
                eta: float = DEFAULT_ETA, jitter: float = DEFAULT_JITTER, zero_noise: bool = False,
                workers: int = 1, block_size: int = BLOCK_SIZE, s_min_factor: float = S_MIN_FACTOR,
                dt_min: float = DT_MIN) -> SdeEnsemble:
    """Simulate ``n_runs`` independent particle systems from a tiny jitter around 0 to t_end.

    Runs are grouped in blocks of fixed size; block b draws from the stream
    keyed by (seed, b), so the output does not depend on ``workers``.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if N < 1 or n_runs < 1:
        raise ValueError("N and n_runs must be positive")
    name = model if isinstance(model, str) else "custom"
    sizes = [min(block_size, n_runs - s) for s in range(0, n_runs, block_size)]
    args = [(N, t_end, dt0, n, seed, b, model, eta, jitter, zero_noise, s_min_factor, dt_min)
            for b, n in enumerate(sizes)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, *zip(*args)))
    else:
        parts = [_run_block(*a) for a in args]
    pos, dropped, steps, rejected = (np.concatenate(x) for x in zip(*parts))
    return SdeEnsemble(N, t_end, pos, dropped, steps, rejected, seed, name,
                       {"dt0": dt0, "eta": eta, "jitter": jitter, "block_size": block_size})


# --------------------------------------------------------------- summaries


def ginibre_radial_cdf(N: int, r) -> np.ndarray:
    """P(|lam| <= r) for one eigenvalue of the N x N Ginibre ensemble at unit variance."""
    r2 = np.asarray(r, dtype=float) ** 2
    return np.mean([special.gammainc(m + 1, r2) for m in range(N)], axis=0)


def radial_ks(ensemble: SdeEnsemble, t_scale: float | None = None):
    """KS statistic and p-value of all particle radii against the Ginibre radial law.

    Radii are divided by sqrt(t_end) (or ``t_scale``) so any end time can be compared.
    """
    scale = math.sqrt(ensemble.t_end if t_scale is None else t_scale)
    radii = np.abs(ensemble.kept()).ravel() / scale
    res = stats.kstest(radii, lambda r: ginibre_radial_cdf(ensemble.N, r))
    return float(res.statistic), float(res.pvalue)


def summary(ensemble: SdeEnsemble) -> dict:
    com = ensemble.kept().sum(axis=1)
    if len(com) == 0:
        ks = p = math.nan
        com = np.array([math.nan + 0j])
    else:
        ks, p = radial_ks(ensemble)
    return {
        "N": ensemble.N,
        "t_end": ensemble.t_end,
        "runs": int(len(ensemble.positions)),
        "dropped_runs": ensemble.n_dropped,
        "seed": ensemble.seed,
        "model": ensemble.model,
        "ks_statistic": ks,
        "ks_pvalue": p,
        "center_of_mass_mean": [float(com.mean().real), float(com.mean().imag)],
        "center_of_mass_stderr": float(np.sqrt(np.mean(np.abs(com) ** 2) / (2 * len(com)))),
        "mean_steps": float(ensemble.steps.mean()),
        "rejected_steps": int(ensemble.rejected.sum()),
        **ensemble.meta,
    }


def positions_to_csv(ensemble: SdeEnsemble, metadata: dict | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    extra = sorted((metadata or {}).items())
    header = ["run", "t_end", "dropped"]
    for i in range(ensemble.N):
        header += [f"re_{i}", f"im_{i}"]
    writer.writerow(header + [k for k, _ in extra])
    for run, row in enumerate(ensemble.positions):
        cells = [run, repr(ensemble.t_end), int(ensemble.dropped[run])]
        for z in row:
            cells += [repr(float(z.real)), repr(float(z.imag))]
        writer.writerow(cells + [v for _, v in extra])
    return buf.getvalue()


def summary_to_json(ensemble: SdeEnsemble, metadata: dict | None = None) -> str:
    return json.dumps({**summary(ensemble), **(metadata or {})}, indent=2, sort_keys=True)
