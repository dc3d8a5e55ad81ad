"""Monte Carlo estimators of the grid constant H^delta of a Brown-Resnick
stationary process, via independent formulas that must mutually agree.

For delta > 0 the target is

    H^delta = lim_{T -> inf} (1/T) E sup_{t in delta Z, 0 <= t <= T} exp(w(t)),

which lies in (0, 1/delta) and equals the extremal index of the associated
max-stable sequence divided by delta. Each estimator evaluates a different
exact representation of this constant:

* ``definitional``   (1/T) E sup over the grid in [0, T]; upper-biased for
                     finite T, used as a dominance check.
* ``exceedance``     (1/delta) P{E + w(delta i) <= 0 for all i >= 1} with a
                     unit exponential E independent of w.
* ``difference``     (1/delta) E (1 - sup_{i >= 1} exp(w(delta i)))_+ ,
                     the per-sample form of the one-step sup difference.
* ``argmax``         (1/delta) P{the overall grid argmax of w sits at 0},
                     two-sided grids only.
* ``dieker-yakir``   E[max exp(w) / (delta * sum exp(w))] over two-sided
                     grids.
* ``time-reversed``  the exceedance event run backwards in time.
* ``continuous-dy``  mesh approximation of the ratio formula that recovers
                     the continuous-time constant H^0.

Infinite index sets are truncated at a horizon chosen by a doubling policy;
per-replication values are evaluated at every doubling checkpoint of one
simulated path, so the reported stability diagnostic measures the actual
truncation effect under common random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .models import (
    GridSpec,
    Model,
    UnsupportedModelError,
    is_gaussian,
    levy_lambda,
    variance_at,
    w_matrix,
)

__all__ = [
    "TruncationPolicy",
    "EstimateResult",
    "CrosscheckReport",
    "default_horizon",
    "est_definitional",
    "est_exceedance",
    "est_difference",
    "est_argmax",
    "est_dieker_yakir",
    "est_time_reversed",
    "est_continuous_dy",
    "crosscheck",
    "TWO_SIDED_METHODS",
    "ONE_SIDED_METHODS",
    "EXACT_METHODS",
]

ONE_SIDED_METHODS = ("definitional", "exceedance", "difference")
TWO_SIDED_METHODS = ("argmax", "dieker-yakir", "time-reversed")


@dataclass(frozen=True)
class TruncationPolicy:
    """Horizon-doubling control for the infinite index sets.

    Starting from ``initial`` grid points, the horizon is doubled (factor
    ``growth``) until the estimate moves by less than ``rel_tol`` times its
    standard error, up to ``max_horizon`` points. A run that never
    stabilizes is still reported, flagged unstable.
    """

    initial: int = 64
    growth: int = 2
    rel_tol: float = 0.1
    max_horizon: int | None = None

    def __post_init__(self):
        if self.initial < 1:
            raise ValueError("initial horizon must be >= 1")
        if self.growth < 2:
            raise ValueError("growth factor must be >= 2")

    def levels(self) -> list[int]:
        cap = self.max_horizon if self.max_horizon is not None else self.initial * self.growth**3
        out = [self.initial]
        while out[-1] * self.growth <= cap:
            out.append(out[-1] * self.growth)
        return out


@dataclass(frozen=True)
class EstimateResult:
    """Point estimate with uncertainty and truncation diagnostics."""

    method: str
    delta: float
    estimate: float
    stderr: float
    replications: int
    horizon: int
    stable: bool
    seed: int
    mesh: float | None = None
    flags: tuple[str, ...] = ()

    def ci95(self) -> tuple[float, float]:
        return (self.estimate - 1.96 * self.stderr, self.estimate + 1.96 * self.stderr)

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "delta": self.delta,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "reps": self.replications,
            "horizon": self.horizon,
            "stable": self.stable,
            "seed": self.seed,
            "flags": list(self.flags),
        }
        if self.mesh is not None:
            d["mesh"] = self.mesh
        return d


def default_horizon(model: Model, delta: float, tail: float = 1e-6) -> int:
    """Grid points after which w is very unlikely to pop back above -E.

    Uses the closed form P{w(t) + E > 0} = 2 Phi(-sigma(t)/2) for Gaussian
    models and the tilted bound 2 exp(-lambda t) for Levy models.
    """
    if is_gaussian(model):
        def point(n: int) -> float:
            s = math.sqrt(max(variance_at(model, n * delta), 0.0))
            return 2.0 * _ndtr(-0.5 * s)
    else:
        lam = levy_lambda(model)
        if lam <= 0:
            return 64

        def point(n: int) -> float:
            return 2.0 * math.exp(-lam * n * delta)

    n = 16
    while n < (1 << 16) and point(n) > tail:
        n *= 2
    return n


def _ndtr(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _policy_or_default(policy: TruncationPolicy | None, model: Model, delta: float) -> TruncationPolicy:
    """Default: doubling levels that end at the certified tail horizon."""
    if policy is not None:
        return policy
    cap = default_horizon(model, delta)
    return TruncationPolicy(initial=max(16, cap // 4), max_horizon=cap)


def _select_level(means: np.ndarray, ses: np.ndarray, rel_tol: float) -> tuple[int, bool]:
    """First doubling step whose change is below rel_tol * stderr."""
    for lvl in range(1, means.size):
        if abs(means[lvl] - means[lvl - 1]) <= rel_tol * ses[lvl]:
            return lvl, True
    return means.size - 1, False


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def _one_sided_w(model: Model, delta: float, n_max: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """(count, n_max) draws of w(delta i), i = 1..n_max."""
    grid = GridSpec(delta, 0, n_max)
    return w_matrix(model, grid, rng, count)[:, 1:]


def _two_sided_w(model: Model, delta: float, n_max: int, rng: np.random.Generator, count: int) -> np.ndarray:
    if not is_gaussian(model):
        raise UnsupportedModelError(
            "two-sided formulas need negative grid indices; the Levy construction is one-sided"
        )
    grid = GridSpec(delta, -n_max, n_max)
    return w_matrix(model, grid, rng, count)


# --- per-replication level values ------------------------------------------
# Each helper maps simulated paths to a (count, n_levels) array of values
# whose mean estimates H^delta at the corresponding truncation horizon.


def _values_exceedance(pos_cummax: np.ndarray, expo: np.ndarray, levels: np.ndarray, delta: float) -> np.ndarray:
    m = pos_cummax[:, levels - 1]
    return (m + expo[:, None] <= 0.0).astype(float) / delta


def _values_difference(pos_cummax: np.ndarray, levels: np.ndarray, delta: float) -> np.ndarray:
    m = pos_cummax[:, levels - 1]
    return -np.expm1(np.minimum(m, 0.0)) / delta


def _values_argmax(pos_cummax: np.ndarray, neg_cummax: np.ndarray, levels: np.ndarray, delta: float) -> np.ndarray:
    mp = pos_cummax[:, levels - 1]
    mn = neg_cummax[:, levels - 1]
    return ((mn < 0.0) & (mp <= 0.0)).astype(float) / delta


def _values_time_reversed(neg_cummax: np.ndarray, expo: np.ndarray, levels: np.ndarray, delta: float) -> np.ndarray:
    m = neg_cummax[:, levels - 1]
    return (m + expo[:, None] <= 0.0).astype(float) / delta


def _values_ratio(w: np.ndarray, origin: int, levels: np.ndarray, step: float) -> np.ndarray:
    """max exp(w) / (step * sum exp(w)) over |i| <= level, in log domain.

    Shifting by the row maximum over the full grid keeps every exponential
    in [0, 1]; the shift cancels exactly in the ratio.
    """
    shift = w.max(axis=1, keepdims=True)
    e = np.exp(w - shift)
    pos_csum = np.cumsum(e[:, origin + 1:], axis=1)
    neg_csum = np.cumsum(e[:, :origin][:, ::-1], axis=1)
    pos_cmax = np.maximum.accumulate(w[:, origin + 1:], axis=1)
    neg_cmax = np.maximum.accumulate(w[:, :origin][:, ::-1], axis=1)
    out = np.empty((w.shape[0], levels.size))
    for j, lvl in enumerate(levels):
        s = e[:, origin] + pos_csum[:, lvl - 1] + neg_csum[:, lvl - 1]
        m = np.maximum(w[:, origin], np.maximum(pos_cmax[:, lvl - 1], neg_cmax[:, lvl - 1]))
        out[:, j] = np.exp(m - shift[:, 0]) / (step * s)
    return out


# --- estimators --------------------------------------------------------------


def _run_one_sided(
    model: Model,
    delta: float,
    reps: int,
    policy: TruncationPolicy | None,
    seed: int,
    threads: int | None,
    with_expo: bool,
    method: str,
) -> EstimateResult:
    _require(delta > 0, "delta must be positive")
    _require(reps >= 2, "need at least two replications to form a standard error")
    policy = _policy_or_default(policy, model, delta)
    levels = np.asarray(policy.levels())
    n_max = int(levels[-1])

    def worker(index, start, count, rng):
        w = _one_sided_w(model, delta, n_max, rng, count)
        np.maximum.accumulate(w, axis=1, out=w)
        if with_expo:
            expo = rng.exponential(size=count)
            vals = _values_exceedance(w, expo, levels, delta)
        else:
            vals = _values_difference(w, levels, delta)
        return count, vals.sum(axis=0), np.square(vals).sum(axis=0)

    partials = engine.map_chunks(worker, seed, reps, n_max, threads)
    acc = engine.reduce_moments(partials, levels.size)
    means, ses = acc.mean(), acc.stderr()
    lvl, stable = _select_level(means, ses, policy.rel_tol)
    flags = () if stable else ("truncation-unstable",)
    return EstimateResult(method, delta, float(means[lvl]), float(ses[lvl]), reps,
                          int(levels[lvl]), stable, seed, flags=flags)


def est_exceedance(
    model: Model,
    delta: float,
    reps: int,
    *,
    policy: TruncationPolicy | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> EstimateResult:
    """H^delta = (1/delta) P{E + w(delta i) <= 0 for all i >= 1}.

    E is a fresh unit exponential per replication, independent of the path.
    """
    return _run_one_sided(model, delta, reps, policy, seed, threads, True, "exceedance")


def est_difference(
    model: Model,
    delta: float,
    reps: int,
    *,
    policy: TruncationPolicy | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> EstimateResult:
    """H^delta = (1/delta) E (1 - sup_{i >= 1} exp(w(delta i)))_+ .

    With x(0) = 1 the per-sample identity max(1, s) - s = (1 - s)_+ makes
    this the one-step difference of grid sup expectations.
    """
    return _run_one_sided(model, delta, reps, policy, seed, threads, False, "difference")


def _run_two_sided(
    model: Model,
    delta: float,
    reps: int,
    policy: TruncationPolicy | None,
    seed: int,
    threads: int | None,
    method: str,
) -> EstimateResult:
    _require(delta > 0, "delta must be positive")
    _require(reps >= 2, "need at least two replications to form a standard error")
    policy = _policy_or_default(policy, model, delta)
    levels = np.asarray(policy.levels())
    n_max = int(levels[-1])

    def worker(index, start, count, rng):
        w = _two_sided_w(model, delta, n_max, rng, count)
        origin = n_max
        if method == "dieker-yakir":
            vals = _values_ratio(w, origin, levels, delta)
        else:
            neg = np.maximum.accumulate(w[:, :origin][:, ::-1], axis=1)
            if method == "argmax":
                pos = np.maximum.accumulate(w[:, origin + 1:], axis=1)
                vals = _values_argmax(pos, neg, levels, delta)
            else:
                expo = rng.exponential(size=count)
                vals = _values_time_reversed(neg, expo, levels, delta)
        return count, vals.sum(axis=0), np.square(vals).sum(axis=0)

    partials = engine.map_chunks(worker, seed, reps, 2 * n_max + 1, threads)
    acc = engine.reduce_moments(partials, levels.size)
    means, ses = acc.mean(), acc.stderr()
    lvl, stable = _select_level(means, ses, policy.rel_tol)
    flags = () if stable else ("truncation-unstable",)
    return EstimateResult(method, delta, float(means[lvl]), float(ses[lvl]), reps,
                          int(levels[lvl]), stable, seed, flags=flags)


def est_argmax(
    model: Model,
    delta: float,
    reps: int,
    *,
    policy: TruncationPolicy | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> EstimateResult:
    """H^delta = (1/delta) P{sup_{i<0} w < 0 and sup_{i != 0} w <= 0}.

    Since w(0) = 0 the event says the two-sided grid supremum of w is
    attained, uniquely among negative indices, at 0. Gaussian models only.
    """
    return _run_two_sided(model, delta, reps, policy, seed, threads, "argmax")


def est_dieker_yakir(
    model: Model,
    delta: float,
    reps: int,
    *,
    policy: TruncationPolicy | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> EstimateResult:
    """H^delta = E[ max_i exp(w(delta i)) / (delta * sum_i exp(w(delta i))) ].

    Two-sided ratio representation; per-sample values are bounded by
    1/delta because the max is one summand of the sum.
    """
    return _run_two_sided(model, delta, reps, policy, seed, threads, "dieker-yakir")


def est_time_reversed(
    model: Model,
    delta: float,
    reps: int,
    *,
    policy: TruncationPolicy | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> EstimateResult:
    """H^delta = (1/delta) P{E + w(delta i) <= 0 for all i <= -1}.

    The exceedance formula applied to the time-reversed process, which
    shares the constant. Gaussian models only.
    """
    return _run_two_sided(model, delta, reps, policy, seed, threads, "time-reversed")


def est_definitional(
    model: Model,
    delta: float,
    T: float,
    reps: int,
    *,
    mesh: float | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> EstimateResult:
    """(1/T) E sup of exp(w) over the grid in [0, T].

    For finite T this dominates H^delta in expectation (the constant is the
    infimum over T), so it serves as an upper cross-check rather than an
    exact estimator. ``delta = 0`` with a ``mesh`` approximates the
    continuous-time functional; that limit is specific to the
    fractional-Brownian family and is flagged as such.
    """
    _require(T > 0, "T must be positive")
    _require(reps >= 2, "need at least two replications to form a standard error")
    flags: tuple[str, ...] = ()
    if delta == 0:
        _require(mesh is not None and mesh > 0, "delta = 0 requires a positive mesh")
        step = mesh
        flags = ("continuum-mesh", "family-specific-limit")
    else:
        _require(delta > 0, "delta must be nonnegative")
        step = delta
    k_max = int(math.floor(T / step + 1e-12))
    grid = GridSpec(step, 0, k_max)

    def worker(index, start, count, rng):
        w = w_matrix(model, grid, rng, count)
        vals = np.exp(w.max(axis=1)) / T
        return count, np.array([vals.sum()]), np.array([np.square(vals).sum()])

    partials = engine.map_chunks(worker, seed, reps, grid.n_points, threads)
    acc = engine.reduce_moments(partials, 1)
    return EstimateResult("definitional", delta, float(acc.mean()[0]), float(acc.stderr()[0]),
                          reps, k_max, True, seed, mesh=mesh, flags=flags)


def est_continuous_dy(
    model: Model,
    eta: float,
    window: float,
    reps: int,
    *,
    seed: int = 0,
    threads: int | None = None,
    rel_tol: float = 0.1,
) -> EstimateResult:
    """Mesh estimate of H^0 via the ratio formula on [-window, window].

    Evaluates E[ max exp(w) / (eta * sum exp(w)) ] on the eta-mesh; the
    ratio formula is exact in eta for the sum, so the only mesh effect is
    the discrete sup, and the estimate converges to H^0 as eta -> 0. The
    estimate is recomputed on the half window; a change larger than
    ``rel_tol`` standard errors flags the window as too small.
    """
    _require(eta > 0, "eta must be positive")
    _require(window >= eta, "window must cover at least one mesh step")
    _require(reps >= 2, "need at least two replications to form a standard error")
    if not is_gaussian(model):
        raise UnsupportedModelError("the continuous-time ratio formula needs a two-sided Gaussian model")
    m = int(round(window / eta))
    levels = np.asarray(sorted({max(1, m // 2), m}))

    def worker(index, start, count, rng):
        w = _two_sided_w(model, eta, m, rng, count)
        vals = _values_ratio(w, m, levels, eta)
        return count, vals.sum(axis=0), np.square(vals).sum(axis=0)

    partials = engine.map_chunks(worker, seed, reps, 2 * m + 1, threads)
    acc = engine.reduce_moments(partials, levels.size)
    means, ses = acc.mean(), acc.stderr()
    stable = bool(levels.size < 2 or abs(means[-1] - means[-2]) <= rel_tol * ses[-1])
    flags = () if stable else ("window-unstable",)
    return EstimateResult("continuous-dy", 0.0, float(means[-1]), float(ses[-1]), reps,
                          m, stable, seed, mesh=eta, flags=flags)


# --- cross-formula consistency ------------------------------------------------


@dataclass(frozen=True)
class CrosscheckReport:
    """Shared-path runs of the grid formulas plus their CI-overlap matrix.

    The overlap matrix covers the five exact representations. The
    definitional functional is reported alongside but enters only through
    its dominance property (it upper-bounds the constant in expectation
    and is heavy-tailed, so its finite-T estimate cannot be expected to
    match within CI width).
    """

    results: dict = field(default_factory=dict)
    overlap: dict = field(default_factory=dict)
    all_overlap: bool = True
    definitional_dominates: bool | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "results": {k: v.to_dict() for k, v in self.results.items()},
            "overlap": {f"{a}|{b}": bool(v) for (a, b), v in self.overlap.items()},
            "all_overlap": self.all_overlap,
            "definitional_dominates": self.definitional_dominates,
            "flags": list(self.flags),
        }


def _ci_overlap(a: EstimateResult, b: EstimateResult) -> bool:
    lo_a, hi_a = a.ci95()
    lo_b, hi_b = b.ci95()
    return lo_a <= hi_b and lo_b <= hi_a


EXACT_METHODS = ("exceedance", "difference", "argmax", "dieker-yakir", "time-reversed")


def feasible_definitional_T(model: Model, delta: float, reps: int) -> float:
    """Largest horizon at which the definitional sup-mean is MC-estimable.

    The mean of sup exp(w) accumulates from sample paths with sup w up to
    sigma^2(T)/2, while ``reps`` replications only reach levels of order
    ln(reps); beyond that the plain average is badly biased low. When even
    two grid steps exceed that budget, a sub-delta horizon is returned:
    the grid then holds only the origin and the estimate is exactly 1/T,
    the elementary upper bound for H^delta.
    """
    if not is_gaussian(model):
        return 2.0 * delta
    cap = 2.0 * max(2.0, math.log(max(reps, 8)) - 4.0)
    if variance_at(model, 2.0 * delta) > cap:
        return 0.75 * delta
    t = 2.0 * delta
    while variance_at(model, 2.0 * t) <= cap and t < 1e6:
        t *= 2.0
    return t


def crosscheck(
    model: Model,
    delta: float,
    reps: int,
    *,
    policy: TruncationPolicy | None = None,
    seed: int = 0,
    threads: int | None = None,
    T: float | None = None,
    include_definitional: bool = True,
) -> CrosscheckReport:
    """Run the grid formulas on shared paths and compare their CIs.

    A single two-sided path (and one exponential variate) per replication
    feeds every estimator, so disagreement is formula error rather than
    sampling noise. The five exact representations enter the pairwise
    overlap matrix; the definitional functional is checked for dominance
    instead, over [0, T] with T defaulting to the largest MC-feasible
    horizon. Gaussian models only.
    """
    _require(delta > 0, "delta must be positive")
    _require(reps >= 2, "need at least two replications to form a standard error")
    if not is_gaussian(model):
        raise UnsupportedModelError("crosscheck needs the two-sided Gaussian construction")
    policy = _policy_or_default(policy, model, delta)
    levels = np.asarray(policy.levels())
    n_max = int(levels[-1])
    horizon_T = T if T is not None else min(n_max * delta, feasible_definitional_T(model, delta, reps))
    # number of positive grid points inside [0, T]; 0 leaves only the origin
    k_T = min(n_max, int(math.floor(horizon_T / delta + 1e-12)))

    def worker(index, start, count, rng):
        w = _two_sided_w(model, delta, n_max, rng, count)
        expo = rng.exponential(size=count)
        origin = n_max
        pos = np.maximum.accumulate(w[:, origin + 1:], axis=1)
        neg = np.maximum.accumulate(w[:, :origin][:, ::-1], axis=1)
        blocks = {
            "exceedance": _values_exceedance(pos, expo, levels, delta),
            "difference": _values_difference(pos, levels, delta),
            "argmax": _values_argmax(pos, neg, levels, delta),
            "dieker-yakir": _values_ratio(w, origin, levels, delta),
            "time-reversed": _values_time_reversed(neg, expo, levels, delta),
        }
        if include_definitional:
            sup = np.maximum(pos[:, k_T - 1], 0.0) if k_T >= 1 else np.zeros(count)
            blocks["definitional"] = (np.exp(sup) / horizon_T)[:, None]
        return count, {k: (v.sum(axis=0), np.square(v).sum(axis=0)) for k, v in blocks.items()}

    partials = engine.map_chunks(worker, seed, reps, 2 * n_max + 1, threads)
    results = {}
    names = list(EXACT_METHODS) + (["definitional"] if include_definitional else [])
    for name in names:
        width = 1 if name == "definitional" else levels.size
        acc = engine.reduce_moments(
            [(count, block[name][0], block[name][1]) for count, block in partials], width
        )
        means, ses = acc.mean(), acc.stderr()
        if name == "definitional":
            results[name] = EstimateResult(name, delta, float(means[0]), float(ses[0]), reps,
                                           k_T, True, seed)
        else:
            lvl, stable = _select_level(means, ses, policy.rel_tol)
            flags = () if stable else ("truncation-unstable",)
            results[name] = EstimateResult(name, delta, float(means[lvl]), float(ses[lvl]), reps,
                                           int(levels[lvl]), stable, seed, flags=flags)

    overlap = {}
    all_ok = True
    for i, a in enumerate(EXACT_METHODS):
        for b in EXACT_METHODS[i + 1:]:
            ok = _ci_overlap(results[a], results[b])
            overlap[(a, b)] = ok
            all_ok = all_ok and ok
    dominates = None
    if include_definitional:
        d = results["definitional"]
        dominates = all(
            d.estimate + 3.0 * math.hypot(d.stderr, results[m].stderr) >= results[m].estimate
            for m in EXACT_METHODS
        )
    flags = ("underpowered",) if reps < 1000 else ()
    return CrosscheckReport(results=results, overlap=overlap, all_overlap=all_ok,
                            definitional_dominates=dominates, flags=flags)
