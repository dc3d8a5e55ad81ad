"""Simulation of the associated max-stable process and extremal-index
estimators that go through its law rather than through w directly.

The process is zeta(t) = max_i P_i exp(w_i(t)) where the P_i = 1 / Gamma_i
are the points of a Poisson process with intensity x^-2 dx on (0, inf)
(Gamma_i partial sums of unit exponentials) and the w_i are independent
path copies. Finite-dimensional laws satisfy

    P{zeta(t_j) <= x_j for all j} = exp(-E max_j exp(w(t_j)) / x_j),

which provides an independent oracle for the simulator. Atom generation
stops once the next weight cannot plausibly alter any pointwise maximum;
the residual truncation bias is surfaced through a per-sample flag and the
unit-Frechet marginal test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .estimators import EstimateResult, TruncationPolicy, est_exceedance
from .models import (
    GridSpec,
    Model,
    UnsupportedModelError,
    is_gaussian,
    laplace_exponent,
    variance_at,
    w_matrix,
)

__all__ = [
    "MaxStableSample",
    "TailProcessSample",
    "FddEstimate",
    "path_sup_cap",
    "sample_max_stable",
    "max_stable_batch",
    "fdd_probability",
    "est_extremal_index_blocks",
    "sample_tail_process",
    "est_candidate_theta",
]


@dataclass
class MaxStableSample:
    """One realization of zeta on a grid, with truncation metadata."""

    grid: GridSpec
    zeta: np.ndarray
    atoms_used: int
    truncation_bias_flag: bool


@dataclass
class TailProcessSample:
    """One draw of the tail process y(i) = P * exp(w(delta i)), P unit Pareto."""

    grid: GridSpec
    y: np.ndarray
    pareto: float


def path_sup_cap(model: Model, grid: GridSpec, z: float = 3.5) -> float:
    """High quantile bound w_cap for sup of w over the grid.

    Chosen so that E[exp(w(t)); w(t) > w_cap] is negligible at every grid
    point: for Gaussian models that expectation equals Phi(-(w - sigma^2/2)
    / sigma), giving w_cap = max_t (sigma^2(t)/2 + z sigma(t)); for Levy
    models a tilted Chernoff bound is used with the largest finite tilt
    among 2, 1.5 and 1.25.
    """
    t = grid.times()
    if is_gaussian(model):
        s2 = variance_at(model, t)
        return float(np.max(0.5 * s2 + z * np.sqrt(s2)))
    phi1 = laplace_exponent(model, 1.0)
    for theta in (2.0, 1.5, 1.25):
        try:
            phi_t = laplace_exponent(model, theta)
        except Exception:
            continue
        # P(w(t) > w) <= exp(-theta w + t (Phi(theta) - theta Phi(1)))
        growth = float(np.max(t * (phi_t - theta * phi1), initial=0.0))
        return (z**2 / 2.0 + growth) / (theta - 1.0)
    return z**2 / 2.0 + math.log(max(grid.n_points, 2))


def max_stable_batch(
    model: Model,
    grid: GridSpec,
    rng: np.random.Generator,
    count: int,
    *,
    n_atoms: int = 4096,
    z_cap: float = 3.5,
    atom_block: int = 16,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``count`` independent draws of zeta on the grid.

    Returns (zeta, atoms_used, bias_flag). Atoms are generated in blocks
    for all still-active samples; a sample retires once the next weight
    1/Gamma falls below min_t zeta(t) * exp(-w_cap), after which no further
    atom can change any pointwise maximum up to the w_cap quantile. The
    flag marks samples that hit the ``n_atoms`` cap instead.
    """
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    if not is_gaussian(model) and grid.i_min < 0:
        raise UnsupportedModelError("the Levy construction is defined for t >= 0 only")
    w_cap = path_sup_cap(model, grid, z_cap)
    npts = grid.n_points
    zeta = np.zeros((count, npts))
    gamma = np.zeros(count)
    atoms = np.zeros(count, dtype=int)
    flag = np.zeros(count, dtype=bool)
    active = np.arange(count)
    while active.size:
        block = min(atom_block, n_atoms - int(atoms[active].min()))
        block = max(block, 1)
        na = active.size
        # next block of Poisson weights for every active sample
        steps = rng.exponential(size=(na, block))
        gammas = gamma[active, None] + np.cumsum(steps, axis=1)
        w = w_matrix(model, grid, rng, na * block).reshape(na, block, npts)
        contrib = np.exp(w) / gammas[..., None]
        zeta[active] = np.maximum(zeta[active], contrib.max(axis=1))
        gamma[active] = gammas[:, -1]
        atoms[active] += block
        # retire samples whose next weight cannot matter
        threshold = zeta[active].min(axis=1) * math.exp(-w_cap)
        done = (1.0 / gamma[active]) < threshold
        capped = atoms[active] >= n_atoms
        flag[active[capped & ~done]] = True
        active = active[~(done | capped)]
    return zeta, atoms, flag


def sample_max_stable(
    model: Model,
    grid: GridSpec,
    n_atoms: int,
    rng: np.random.Generator,
    *,
    z_cap: float = 3.5,
) -> MaxStableSample:
    """One draw of zeta on the grid with at most ``n_atoms`` Poisson atoms."""
    zeta, atoms, flag = max_stable_batch(model, grid, rng, 1, n_atoms=n_atoms, z_cap=z_cap)
    return MaxStableSample(grid, zeta[0], int(atoms[0]), bool(flag[0]))


@dataclass(frozen=True)
class FddEstimate:
    """Monte Carlo evaluation of a finite-dimensional law of zeta."""

    probability: float
    stderr: float
    exponent: float
    exponent_stderr: float
    replications: int

    def to_dict(self) -> dict:
        return {
            "probability": self.probability,
            "stderr": self.stderr,
            "exponent": self.exponent,
            "exponent_stderr": self.exponent_stderr,
            "reps": self.replications,
        }


def fdd_probability(
    model: Model,
    points: list[float],
    thresholds: list[float],
    reps: int,
    *,
    seed: int = 0,
    threads: int | None = None,
) -> FddEstimate:
    """P{zeta(t_j) <= x_j for all j} = exp(-E max_j exp(w(t_j)) / x_j).

    The exponent is estimated by Monte Carlo over w paths and the standard
    error of the probability follows by the delta method.
    """
    t = np.asarray(points, dtype=float)
    x = np.asarray(thresholds, dtype=float)
    if t.shape != x.shape or t.ndim != 1 or t.size == 0:
        raise ValueError("points and thresholds must be matching nonempty vectors")
    if np.any(x <= 0):
        raise ValueError("thresholds must be positive")
    if reps < 2:
        raise ValueError("need at least two replications to form a standard error")
    grid, cols = _containing_grid(model, t)
    log_x = np.log(x)

    def worker(index, start, count, rng):
        w = w_matrix(model, grid, rng, count)
        m = np.exp((w[:, cols] - log_x[None, :]).max(axis=1))
        return count, np.array([m.sum()]), np.array([np.square(m).sum()])

    partials = engine.map_chunks(worker, seed, reps, grid.n_points, threads)
    acc = engine.reduce_moments(partials, 1)
    mean, se = float(acc.mean()[0]), float(acc.stderr()[0])
    prob = math.exp(-mean)
    return FddEstimate(prob, prob * se, mean, se, reps)


def _containing_grid(model: Model, times: np.ndarray) -> tuple[GridSpec, np.ndarray]:
    """Smallest uniform grid holding all requested times (exactly)."""
    if np.allclose(times, 0.0):
        return GridSpec(1.0, 0, 0), np.zeros(times.size, dtype=int)
    nonzero = np.abs(times[times != 0.0])
    step = float(np.min(nonzero))
    idx = times / step
    if not np.allclose(idx, np.round(idx), atol=1e-9):
        # fall back to the coarsest common refinement via rational rounding
        step = float(np.gcd.reduce(np.round(nonzero * 1e6).astype(np.int64))) / 1e6
        idx = times / step
        if not np.allclose(idx, np.round(idx), atol=1e-6):
            raise ValueError("points must lie on a common uniform grid")
    idx = np.round(idx).astype(int)
    i_min, i_max = min(int(idx.min()), 0), max(int(idx.max()), 0)
    if not is_gaussian(model) and i_min < 0:
        raise UnsupportedModelError("negative times are not available for Levy models")
    grid = GridSpec(step, i_min, i_max)
    return grid, idx - i_min


def est_extremal_index_blocks(
    model: Model,
    delta: float,
    n: int,
    reps: int,
    *,
    r_n: int | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> EstimateResult:
    """Block formula theta = lim (n / r_n) P{max over a block of zeta > n}.

    An atom of weight p triggers the block exceedance exactly when
    p * sup_t exp(w(t)) > n, so the triggering atoms form a Poisson process
    of total mass E[sup exp(w)] / n and the block probability is exactly

        P{max zeta > n} = 1 - exp(-E[sup_{t in block} exp(w(t))] / n).

    The sup expectation cannot be averaged naively (its mass is carried by
    extremely rare, extremely high paths), so it is rewritten through the
    shift invariance of the Brown-Resnick field as

        E sup_{i in A} x(i) = sum_{j in A} E[ sup_{i in A} x(i - j)
                                              / sum_{k in A} x(k - j) ],

    whose per-replication value is bounded by |A|; one two-sided path on
    [-r_n, r_n] evaluates every shifted ratio by sliding windows. Gaussian
    models only (the rewrite needs negative times). Defaults to
    r_n = floor(sqrt(n)).
    """
    if delta <= 0 or n < 2 or reps < 2:
        raise ValueError("need delta > 0, n >= 2 and reps >= 2")
    if r_n is None:
        r_n = int(math.isqrt(n))
    if not 1 <= r_n < n:
        raise ValueError("r_n must satisfy 1 <= r_n < n")
    if not is_gaussian(model):
        raise UnsupportedModelError(
            "the block-sup rewrite needs negative times; use est_candidate_theta for Levy models"
        )
    grid = GridSpec(delta, -r_n, r_n)

    def worker(index, start, count, rng):
        w = w_matrix(model, grid, rng, count)
        vals = _block_sup_values(w, r_n)
        return count, np.array([vals.sum()]), np.array([np.square(vals).sum()])

    partials = engine.map_chunks(worker, seed, reps, grid.n_points, threads)
    acc = engine.reduce_moments(partials, 1)
    c_hat, c_se = float(acc.mean()[0]), float(acc.stderr()[0])
    p_hat = -math.expm1(-c_hat / n)
    theta = (n / r_n) * p_hat
    se = math.exp(-c_hat / n) * c_se / r_n
    flags = ("wide-ci",) if p_hat * reps < 30 else ()
    return EstimateResult("theta-blocks", delta, theta, se, reps, r_n, True, seed, flags=flags)


def _sliding_max(a: np.ndarray, width: int) -> np.ndarray:
    """Row-wise maxima of every contiguous window of ``width`` columns.

    Block decomposition: each window is covered by the suffix of one
    width-aligned block plus the prefix of the next.
    """
    rows, cols = a.shape
    pad = (-cols) % width
    ap = np.pad(a, ((0, 0), (0, pad)), constant_values=-np.inf)
    blocks = ap.reshape(rows, -1, width)
    prefix = np.maximum.accumulate(blocks, axis=2).reshape(rows, -1)
    suffix = np.maximum.accumulate(blocks[:, :, ::-1], axis=2)[:, :, ::-1].reshape(rows, -1)
    starts = np.arange(cols - width + 1)
    return np.maximum(suffix[:, starts], prefix[:, starts + width - 1])


def _block_sup_values(w: np.ndarray, r: int) -> np.ndarray:
    """Per-path estimates of E sup_{0<=i<=r} exp(w(delta i)) from a path on [-r, r]."""
    shift = w.max(axis=1, keepdims=True)
    e = np.exp(w - shift)
    csum = np.concatenate([np.zeros((w.shape[0], 1)), np.cumsum(e, axis=1)], axis=1)
    width = r + 1
    sums = csum[:, width:] - csum[:, :-width]          # window sums, start = 0..r
    maxes = _sliding_max(w, width) - shift             # window maxima, start = 0..r
    # the window starting at column r - j covers grid indices (0..r) - j,
    # so summing the ratio over all r + 1 starts sums over all shifts j
    return (np.exp(maxes) / sums).sum(axis=1)


def sample_tail_process(
    model: Model,
    delta: float,
    grid: GridSpec,
    rng: np.random.Generator,
) -> TailProcessSample:
    """One draw of (y(i))_{i in grid} = P exp(w(delta i)), P unit Pareto.

    The tail process of the max-stable sequence sampled at step delta;
    y(0) = P > 1 always.
    """
    if grid.delta != delta:
        grid = GridSpec(delta, grid.i_min, grid.i_max, grid.mesh)
    pareto = 1.0 / rng.uniform()
    w = w_matrix(model, grid, rng, 1)[0]
    return TailProcessSample(grid, pareto * np.exp(w), float(pareto))


def est_candidate_theta(
    model: Model,
    delta: float,
    reps: int,
    *,
    policy: TruncationPolicy | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> EstimateResult:
    """theta = lim_m P{max_{1<=i<=m} y(i) <= 1} for the tail process y.

    Writing y(i) = exp(E + w(delta i)) with E = ln(P) unit exponential,
    the event coincides with the exceedance formula's, so the estimate is
    exactly delta times the exceedance estimate under a shared seed.
    """
    base = est_exceedance(model, delta, reps, policy=policy, seed=seed, threads=threads)
    return EstimateResult(
        "theta-candidate",
        delta,
        delta * base.estimate,
        delta * base.stderr,
        reps,
        base.horizon,
        base.stable,
        seed,
        flags=base.flags,
    )


def frechet_cdf(x: np.ndarray) -> np.ndarray:
    """Unit Frechet distribution function exp(-1/x), x > 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out
