"""Independent numerical oracles used to derive expected test values.

These deliberately avoid the library's sampling machinery: the random-walk
oracles integrate killed transition densities on a grid, and the
degenerate-family oracles reduce to one-dimensional quadrature over the
single Gaussian that drives the alpha = 2 family. Frozen constants
produced by these routines are pinned in FROZEN below and re-verified by
tests/test_oracles.py.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad
from scipy.special import log_ndtr, ndtr


def alpha2_constant(delta: float) -> float:
    """Grid constant of the alpha = 2 family: (Phi(d/sqrt2) - Phi(-d/sqrt2)) / d."""
    z = delta / np.sqrt(2.0)
    return (ndtr(z) - ndtr(-z)) / delta


def _emg_cdf(a: float, mu: float, sigma: float) -> float:
    """P(E + N(mu, sigma^2) <= a) with E unit exponential."""
    z = (a - mu) / sigma
    return float(ndtr(z) - np.exp(0.5 * sigma**2 - (a - mu) + log_ndtr(z - sigma)))


def _killed_walk(mu: float, sigma: float, v: np.ndarray, x: np.ndarray, h: float,
                 x_min: float, safe0: float, tol_rel: float) -> float:
    """Total survival mass of a density iterated under N(mu, sigma^2) steps
    killed above 0; mass escaping below x_min counts as surviving (the
    return probability from there is exp(2 mu |x_min| / sigma^2))."""
    d = (x[:, None] - x[None, :] - mu) / sigma
    kernel = np.exp(-0.5 * d * d) / (np.sqrt(2.0 * np.pi) * sigma) * h
    escape = ndtr((x_min - x - mu) / sigma)
    safe = safe0
    for _ in range(2_000_000):
        safe += float(v @ escape)
        v = kernel @ v
        if v.sum() < tol_rel * max(safe, 1e-9):
            break
    return safe + float(v.sum())


def exceedance_probability(mu: float, sigma: float, h: float | None = None,
                           x_min: float | None = None, tol_rel: float = 1e-10) -> float:
    """P{E + S_i <= 0 for all i >= 1} for a Gaussian random walk S with
    N(mu, sigma^2) steps, mu < 0, and an independent unit exponential E.

    delta * H^delta equals this probability for any model whose w is a
    random walk on the grid (the alpha = 1 family: steps N(-delta,
    2 delta); the Brownian Levy model: steps N(-delta/2, delta))."""
    if h is None:
        h = min(0.01, sigma / 6.0)
    if x_min is None:
        x_min = -max(16.0, abs(mu) + 8.0 * sigma)
    x = np.arange(x_min, 0.0, h) + h / 2.0
    logf = 0.5 * sigma**2 - (x - mu) + log_ndtr((x - mu - sigma**2) / sigma)
    v = np.exp(logf) * h
    return _killed_walk(mu, sigma, v, x, h, x_min, _emg_cdf(x_min, mu, sigma), tol_rel)


def stay_below_probability(mu: float, sigma: float, h: float | None = None,
                           x_min: float | None = None, tol_rel: float = 1e-10) -> float:
    """q = P{S_i <= 0 for all i >= 1} (no exponential start).

    For the alpha = 1 family the two-sided argmax formula factorizes into
    independent sides, so H^delta = q^2 / delta as well."""
    if h is None:
        h = min(0.01, sigma / 6.0)
    if x_min is None:
        x_min = -max(16.0, abs(mu) + 8.0 * sigma)
    x = np.arange(x_min, 0.0, h) + h / 2.0
    v = np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (np.sqrt(2.0 * np.pi) * sigma) * h
    return _killed_walk(mu, sigma, v, x, h, x_min, float(ndtr((x_min - mu) / sigma)), tol_rel)


def alpha1_constant(delta: float, **kw) -> float:
    """H^delta of the alpha = 1 family via the killed random walk."""
    return exceedance_probability(-delta, np.sqrt(2.0 * delta), **kw) / delta


def levy_brownian_constant(delta: float, **kw) -> float:
    """H^delta of the standard Brownian Levy model via the killed random walk."""
    return exceedance_probability(-delta / 2.0, np.sqrt(delta), **kw) / delta


def alpha2_sup_mean(T: float, delta: float) -> float:
    """E sup over the grid in [0, T] of exp(w) for the alpha = 2 family.

    One-dimensional quadrature over the driving normal; the exponent
    max_i(sqrt(2) d i l - (d i)^2) - l^2 / 2 is nonpositive, so the
    integrand never overflows."""
    ii = delta * np.arange(0, int(np.floor(T / delta + 1e-12)) + 1)

    def integrand(l):
        expo = np.max(np.sqrt(2.0) * ii * l - ii * ii) - 0.5 * l * l
        return np.exp(expo) / np.sqrt(2.0 * np.pi)

    edge = np.sqrt(2.0) * T
    total = 0.0
    for a, b in zip([-np.inf, -8.0, 0.0, edge, edge + 12.0],
                    [-8.0, 0.0, edge, edge + 12.0, np.inf]):
        val, _ = quad(integrand, a, b, limit=400)
        total += val
    return total


def smallball_one_sided(eta: float, k_max: int, h: float = 0.004, x_min: float = -6.0) -> float:
    """q = P{B(1/k) <= eta for all 1 <= k <= k_max}, B standard Brownian.

    Killed density recursion over the ascending reciprocal times; the
    barrier sits at eta, and mass escaping below x_min counts as surviving
    (its chance of returning above eta within the remaining unit of time
    is about 2 Phi(-(eta - x_min)))."""
    times = 1.0 / np.arange(k_max, 0, -1, dtype=float)
    x = np.arange(x_min, eta, h) + h / 2.0
    sd0 = np.sqrt(times[0])
    v = np.exp(-0.5 * (x / sd0) ** 2) / (np.sqrt(2.0 * np.pi) * sd0) * h
    safe = float(ndtr(x_min / sd0))
    for dt in np.diff(times):
        sd = np.sqrt(dt)
        d = (x[:, None] - x[None, :]) / sd
        kernel = np.exp(-0.5 * d * d) / (np.sqrt(2.0 * np.pi) * sd) * h
        safe += float(v @ ndtr((x_min - x) / sd))
        v = kernel @ v
    return safe + float(v.sum())


# Values computed by the routines above (tests/test_oracles.py re-derives
# them, including step-halving checks). Quoted to the digits that are
# stable under refinement.
FROZEN = {
    ("alpha1", 0.5): 0.560374,
    ("alpha1", 1.0): 0.442979,
    ("alpha1", 2.0): 0.320435,
    ("alpha1", 0.002): 0.966662,
    ("levy-brownian", 1.0): 0.280187,
    ("levy-brownian", 8.0): 0.103766,
    ("levy-brownian", 16.0): 0.059569,
    ("levy-brownian", 32.0): 0.031104,
}
