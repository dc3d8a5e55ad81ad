"""Process models and exact path sampling on finite grids.

All estimators operate on the drift-corrected process

    w(t) = b(t) - ln E exp(b(t)),

so that x(t) = exp(w(t)) satisfies x(0) = 1 and E x(t) = 1 for every t.
Two input families are supported:

* centered Gaussian ``b`` with stationary increments, specified through its
  variance function sigma^2 (then ln E exp(b(t)) = sigma^2(t) / 2), sampled
  exactly on two-sided grids;
* Levy ``b`` with a closed-form Laplace exponent Phi(theta) = ln E exp(theta
  b(1)) (then the drift correction is Phi(1) t), defined for t >= 0 only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelError",
    "UnsupportedModelError",
    "VarianceFunction",
    "JumpLaw",
    "LevyModel",
    "GridSpec",
    "PathSample",
    "variance_at",
    "gaussian_grid_cov",
    "sample_gaussian_path",
    "laplace_exponent",
    "levy_lambda",
    "sample_levy_path",
]

# Relative tolerance for eigenvalue checks of covariance and embedding
# matrices; negatives within this fraction of the dominant scale are
# treated as round-off and clipped.
PSD_RTOL = 1e-8


class ModelError(ValueError):
    """The model is invalid or numerically inconsistent."""


class UnsupportedModelError(ModelError):
    """The model does not support the requested operation."""


@dataclass(frozen=True, eq=False)
class VarianceFunction:
    """Variance function sigma^2 of a centered Gaussian input with stationary increments.

    Kinds
    -----
    ``power``        sigma^2(t) = scale * |t|^alpha with scale = 2 (the
                     classical family w(t) = sqrt(2) b_alpha(t) - |t|^alpha
                     built from standard fractional Brownian motion with
                     variance |t|^alpha; alpha is twice the Hurst index).
    ``scaled-power`` same formula with a caller-chosen positive scale.
    ``tabulated``    user-supplied (t, sigma^2) table, interpolated linearly
                     in |t|; queries outside the table raise ModelError.
    """

    kind: str
    alpha: float = 1.0
    scale: float = 2.0
    table_t: np.ndarray | None = field(default=None, repr=False)
    table_v: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind in ("power", "scaled-power"):
            if not 0.0 < self.alpha <= 2.0:
                raise ModelError(f"alpha must lie in (0, 2], got {self.alpha}")
            if not self.scale > 0.0:
                raise ModelError(f"scale must be positive, got {self.scale}")
        elif self.kind == "tabulated":
            t = np.asarray(self.table_t, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2:
                raise ModelError("tabulated kind needs matching 1-d t and value tables")
            if t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ModelError("table times must start at 0 and increase")
            if v[0] != 0.0 or np.any(v < 0):
                raise ModelError("sigma^2 must be nonnegative with sigma^2(0) = 0")
            object.__setattr__(self, "table_t", t)
            object.__setattr__(self, "table_v", v)
        else:
            raise ModelError(f"unknown variance-function kind {self.kind!r}")

    @classmethod
    def fbm(cls, alpha: float) -> "VarianceFunction":
        """The fractional-Brownian family: sigma^2(t) = 2 |t|^alpha."""
        return cls(kind="power", alpha=alpha, scale=2.0)

    @classmethod
    def power(cls, alpha: float, scale: float) -> "VarianceFunction":
        return cls(kind="scaled-power", alpha=alpha, scale=scale)

    @classmethod
    def tabulated(cls, t: np.ndarray, values: np.ndarray) -> "VarianceFunction":
        return cls(kind="tabulated", table_t=np.asarray(t, float), table_v=np.asarray(values, float))

    @property
    def parametric(self) -> bool:
        return self.kind in ("power", "scaled-power")


def variance_at(vf: VarianceFunction, t) -> np.ndarray | float:
    """Evaluate sigma^2(|t|); exact for the parametric kinds."""
    at = np.abs(np.asarray(t, dtype=float))
    if vf.parametric:
        out = vf.scale * at**vf.alpha
    else:
        if np.any(at > vf.table_t[-1]):
            raise ModelError("tabulated variance function queried outside its table")
        out = np.interp(at, vf.table_t, vf.table_v)
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid t = delta * i for integers i in [i_min, i_max].

    ``mesh`` (< delta) marks grids used as continuous-time approximations.
    """

    delta: float
    i_min: int = 0
    i_max: int = 0
    mesh: float | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.i_min <= 0 <= self.i_max:
            raise ValueError("grid must satisfy i_min <= 0 <= i_max")
        if self.mesh is not None and not 0 < self.mesh < self.delta:
            raise ValueError("mesh must lie in (0, delta)")

    @property
    def n_points(self) -> int:
        return self.i_max - self.i_min + 1

    @property
    def origin(self) -> int:
        """Row position of index 0."""
        return -self.i_min

    def indices(self) -> np.ndarray:
        return np.arange(self.i_min, self.i_max + 1)

    def times(self) -> np.ndarray:
        return self.delta * self.indices()


@dataclass
class PathSample:
    """One realization of w on a grid; w[grid.origin] is exactly 0."""

    grid: GridSpec
    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (self.grid.n_points,):
            raise ValueError("path length does not match the grid")
        if self.w[self.grid.origin] != 0.0:
            raise ValueError("w(0) must be exactly 0")

    def x(self) -> np.ndarray:
        """exp(w) on the grid."""
        return np.exp(self.w)


# ---------------------------------------------------------------------------
# Gaussian sampling


def gaussian_grid_cov(vf: VarianceFunction, grid: GridSpec) -> np.ndarray:
    """Covariance of (b(delta i))_{i_min..i_max}.

    Uses the stationary-increments identity
    Cov(b(s), b(t)) = (sigma^2(s) + sigma^2(t) - sigma^2(s - t)) / 2
    and verifies positive semidefiniteness up to round-off.
    """
    t = grid.times()
    vs = variance_at(vf, t)
    cov = 0.5 * (vs[:, None] + vs[None, :] - variance_at(vf, np.subtract.outer(t, t)))
    tr = float(np.trace(cov))
    if tr > 0:
        w = np.linalg.eigvalsh(cov)
        if w[0] < -PSD_RTOL * tr:
            raise ModelError(
                f"covariance is not positive semidefinite (min eigenvalue {w[0]:.3e}); invalid sigma^2"
            )
    return cov


def increment_autocov(vf: VarianceFunction, delta: float, max_lag: int) -> np.ndarray:
    """Autocovariance gamma(k), k = 0..max_lag, of the step-delta increments of b."""
    k = np.arange(max_lag + 1, dtype=float)
    return 0.5 * (
        variance_at(vf, (k + 1.0) * delta)
        - 2.0 * variance_at(vf, k * delta)
        + variance_at(vf, np.abs(k - 1.0) * delta)
    )


_EIG_CACHE: dict = {}


def _embedding_eigs(gamma: np.ndarray, cache_key=None) -> np.ndarray | None:
    """Circulant-embedding eigenvalues for increment autocovariance gamma(0..m).

    Returns None when a structurally negative eigenvalue is found (caller
    falls back to Cholesky); round-off negatives are clipped to 0.
    """
    if cache_key is not None and cache_key in _EIG_CACHE:
        return _EIG_CACHE[cache_key]
    m = gamma.size - 1
    c = np.concatenate([gamma[:m], gamma[m:m + 1], gamma[m - 1:0:-1]])
    eigs = np.fft.fft(c).real
    top = float(eigs.max(initial=0.0))
    if top <= 0.0:
        eigs = np.zeros_like(eigs)
    elif eigs.min() < -PSD_RTOL * top:
        eigs = None
    else:
        eigs = np.maximum(eigs, 0.0)
    if cache_key is not None:
        if len(_EIG_CACHE) > 64:
            _EIG_CACHE.clear()
        _EIG_CACHE[cache_key] = eigs
    return eigs


def _stationary_sequence(eigs: np.ndarray, rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """n exact draws of the first m entries of the embedded stationary sequence.

    One FFT of a circularly symmetric complex vector yields two independent
    real samples (real and imaginary parts), so rows are generated in pairs.
    """
    length = eigs.size
    rows = (n + 1) // 2
    z = rng.standard_normal((rows, length)) + 1j * rng.standard_normal((rows, length))
    s = np.fft.fft(z * np.sqrt(eigs / length), axis=1)
    out = np.empty((2 * rows, m))
    out[0::2] = s.real[:, :m]
    out[1::2] = s.imag[:, :m]
    return out[:n]


def _increments_to_b(inc: np.ndarray, origin: int) -> np.ndarray:
    """Prefix-sum increments into b values anchored at b(0) = 0.

    ``inc[:, j]`` is b(delta (i_min + j + 1)) - b(delta (i_min + j)); the
    returned array has one more column, with column ``origin`` exactly 0.
    """
    n, m = inc.shape
    b = np.empty((n, m + 1))
    b[:, 0] = 0.0
    np.cumsum(inc, axis=1, out=b[:, 1:])
    b -= b[:, origin][:, None]
    return b


def _cholesky_factor(cov: np.ndarray) -> np.ndarray:
    """Cholesky factor with escalating diagonal jitter on near-singular input."""
    tr = max(float(np.trace(cov)), np.finfo(float).tiny)
    jitter = 0.0
    for _ in range(5):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * tr if jitter == 0.0 else 10.0 * jitter
    raise ModelError("Cholesky factorization failed; covariance is not positive semidefinite")


def gaussian_b_matrix(
    vf: VarianceFunction,
    grid: GridSpec,
    rng: np.random.Generator,
    n: int,
    method: str = "auto",
) -> np.ndarray:
    """n exact draws of (b(delta i))_{i in grid} as an (n, n_points) array.

    ``method`` is one of

    * ``auto``       degenerate shortcut for parametric alpha = 2 (b is a
                     random line) and i.i.d. increments for parametric
                     alpha = 1, circulant embedding otherwise, with Cholesky
                     fallback when the embedding has negative eigenvalues;
    * ``embedding``  force circulant embedding of the increment sequence;
    * ``cholesky``   force Cholesky of the full grid covariance.
    """
    n_inc = grid.n_points - 1
    if n_inc == 0:
        return np.zeros((n, 1))

    if method == "auto" and vf.parametric:
        t = grid.times()
        if vf.alpha == 2.0:
            # b(t) = sqrt(scale) * t * Z: one normal per path.
            z = rng.standard_normal((n, 1))
            return np.sqrt(vf.scale) * z * t[None, :]
        if vf.alpha == 1.0:
            # Independent increments.
            inc = rng.standard_normal((n, n_inc)) * np.sqrt(vf.scale * grid.delta)
            return _increments_to_b(inc, grid.origin)

    if method in ("auto", "embedding"):
        gamma = increment_autocov(vf, grid.delta, n_inc)
        key = (vf.kind, vf.alpha, vf.scale, grid.delta, n_inc) if vf.parametric else None
        eigs = _embedding_eigs(gamma, cache_key=key)
        if eigs is not None:
            inc = _stationary_sequence(eigs, rng, n, n_inc)
            return _increments_to_b(inc, grid.origin)
        if method == "embedding":
            raise ModelError("circulant embedding has structurally negative eigenvalues")

    # Cholesky of the grid covariance with the origin row removed (b(0) = 0).
    cov = gaussian_grid_cov(vf, grid)
    keep = np.delete(np.arange(grid.n_points), grid.origin)
    factor = _cholesky_factor(cov[np.ix_(keep, keep)])
    z = rng.standard_normal((n, keep.size))
    b = np.zeros((n, grid.n_points))
    b[:, keep] = z @ factor.T
    return b


def gaussian_w_matrix(
    vf: VarianceFunction,
    grid: GridSpec,
    rng: np.random.Generator,
    n: int,
    method: str = "auto",
) -> np.ndarray:
    """n draws of w(delta i) = b(delta i) - sigma^2(delta i) / 2."""
    b = gaussian_b_matrix(vf, grid, rng, n, method=method)
    b -= 0.5 * variance_at(vf, grid.times())[None, :]
    b[:, grid.origin] = 0.0
    return b


def sample_gaussian_path(
    vf: VarianceFunction,
    grid: GridSpec,
    rng: np.random.Generator,
    method: str = "auto",
) -> PathSample:
    """One exact draw of the drift-corrected Gaussian path on the grid."""
    return PathSample(grid, gaussian_w_matrix(vf, grid, rng, 1, method=method)[0])


# ---------------------------------------------------------------------------
# Levy models


@dataclass(frozen=True)
class JumpLaw:
    """Parametric jump distribution with a closed-form moment generating function.

    Kinds: ``constant`` (params: value), ``normal`` (mean, sd),
    ``exponential`` (rate; mgf finite for theta < rate).
    """

    kind: str
    value: float = 1.0
    mean: float = 0.0
    sd: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "normal", "exponential"):
            raise ModelError(f"unknown jump law {self.kind!r}")
        if self.kind == "normal" and self.sd < 0:
            raise ModelError("jump sd must be nonnegative")
        if self.kind == "exponential" and self.rate <= 0:
            raise ModelError("jump rate parameter must be positive")

    def mgf(self, theta: float) -> float:
        if self.kind == "constant":
            return float(np.exp(theta * self.value))
        if self.kind == "normal":
            return float(np.exp(theta * self.mean + 0.5 * theta**2 * self.sd**2))
        if theta >= self.rate:
            raise ModelError(f"jump mgf is infinite at theta = {theta}")
        return self.rate / (self.rate - theta)

    def sum_sample(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sum of ``counts`` i.i.d. jumps, vectorized over an integer array."""
        if self.kind == "constant":
            return self.value * counts
        if self.kind == "normal":
            z = rng.standard_normal(counts.shape)
            return self.mean * counts + self.sd * np.sqrt(counts) * z
        return rng.gamma(shape=counts, scale=1.0 / self.rate)


@dataclass(frozen=True)
class LevyModel:
    """Levy input b(t) = diffusion * BM(t) + compound Poisson jumps.

    Requires Phi(1) = ln E exp(b(1)) < infinity; the associated
    drift-corrected process w(t) = b(t) - Phi(1) t is defined for t >= 0.
    """

    diffusion: float = 1.0
    jump_rate: float = 0.0
    jump_law: JumpLaw | None = None

    def __post_init__(self):
        if self.diffusion < 0 or self.jump_rate < 0:
            raise ModelError("diffusion and jump_rate must be nonnegative")
        if self.jump_rate > 0 and self.jump_law is None:
            raise ModelError("a jump law is required when jump_rate > 0")
        laplace_exponent(self, 1.0)  # must be finite

    @classmethod
    def brownian(cls, diffusion: float = 1.0) -> "LevyModel":
        return cls(diffusion=diffusion, jump_rate=0.0, jump_law=None)


def laplace_exponent(model: LevyModel, theta: float) -> float:
    """Phi(theta) = diffusion^2 theta^2 / 2 + rate * (E exp(theta J) - 1)."""
    phi = 0.5 * model.diffusion**2 * theta**2
    if model.jump_rate > 0:
        phi += model.jump_rate * (model.jump_law.mgf(theta) - 1.0)
    return float(phi)


def levy_lambda(model: LevyModel) -> float:
    """Convexity gap Phi(1)/2 - Phi(1/2), nonnegative by Jensen."""
    return 0.5 * laplace_exponent(model, 1.0) - laplace_exponent(model, 0.5)


def levy_w_matrix(model: LevyModel, grid: GridSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """n draws of w(delta i) = b(delta i) - Phi(1) delta i on a one-sided grid."""
    if grid.i_min < 0:
        raise UnsupportedModelError("the Levy construction is defined for t >= 0 only")
    steps = grid.i_max
    w = np.zeros((n, grid.n_points))
    if steps == 0:
        return w
    dt = grid.delta
    inc = rng.standard_normal((n, steps)) * (model.diffusion * np.sqrt(dt))
    if model.jump_rate > 0:
        counts = rng.poisson(model.jump_rate * dt, (n, steps)).astype(float)
        inc += model.jump_law.sum_sample(counts, rng)
    np.cumsum(inc, axis=1, out=w[:, 1:])
    w -= laplace_exponent(model, 1.0) * grid.times()[None, :]
    w[:, 0] = 0.0
    return w


def sample_levy_path(model: LevyModel, grid: GridSpec, rng: np.random.Generator) -> PathSample:
    """One draw of the drift-corrected Levy path on a one-sided grid."""
    return PathSample(grid, levy_w_matrix(model, grid, rng, 1)[0])


# ---------------------------------------------------------------------------
# Shared dispatch helpers

Model = VarianceFunction | LevyModel


def is_gaussian(model: Model) -> bool:
    return isinstance(model, VarianceFunction)


def supports_two_sided(model: Model) -> bool:
    return is_gaussian(model)


def w_matrix(model: Model, grid: GridSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if is_gaussian(model):
        return gaussian_w_matrix(model, grid, rng, n)
    return levy_w_matrix(model, grid, rng, n)
