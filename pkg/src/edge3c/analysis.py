"""Expected energies on random graphs and the largest 3C reductions.

A task is served by the strongest device among its owner and the
participating one-hop neighbours in ``G(N, p)``; with mean degree
``lam = N p`` and participation probability ``alpha`` the expected energy
per unit of work is

    W(alpha, lam) = 1/Qmax + integral of exp(lam alpha (F - 1)) F / x**2

over the capacity support.  Cached contents follow
``Z(alpha, lam) = (1 - rho) exp(-alpha lam rho)`` with cache ratio ``rho``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import bisect
from scipy.special import erf
from scipy.stats import truncnorm as _sp_truncnorm

__all__ = [
    "CapacityDistribution",
    "SharingRegime",
    "DegenerateInterval",
    "BracketFailure",
    "IntegrationError",
    "MaxReduction",
    "adaptive_simpson",
    "truncated_normal",
    "uniform",
    "order_stat_max_pdf",
    "expected_task_energy",
    "expected_content_energy",
    "delta_task_energy",
    "capacity_condition",
    "max_reduction_capacity",
    "max_reduction_caching",
    "optimal_alpha_caching",
    "monte_carlo_task_energy",
    "reduction_curve",
]

INTEGRATION_TOL = 1e-9
MAX_INTERVALS = 100_000
LAMBDA_SCAN = tuple(10.0**j for j in range(-6, 5))
LAMBDA_XTOL = 1e-8


class DegenerateInterval(ValueError):
    pass


class BracketFailure(RuntimeError):
    pass


class IntegrationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# quadrature


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = INTEGRATION_TOL,
    max_intervals: int = MAX_INTERVALS,
) -> float:
    """Adaptive Simpson rule for a vectorised integrand.

    All unresolved panels are refined together, one level at a time.  A
    panel of width ``h`` is accepted when its two half-panel estimates
    differ from the whole-panel estimate by at most ``15 tol h/(b-a)``; the
    accepted value includes the Richardson correction.
    """
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_intervals)
    # start from a modest uniform grid so narrow features are not skipped
    edges = np.linspace(a, b, 17)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = f(lo), f(mid), f(hi)
    whole = (hi - lo) / 6.0 * (flo + 4 * fmid + fhi)
    total = 0.0
    used = len(lo)
    span = b - a
    while lo.size:
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi)
        err = left + right - whole
        ok = np.abs(err) <= 15.0 * tol * (hi - lo) / span
        # panels at floating-point resolution cannot be split further
        ok |= (hi - lo) <= 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))
        total += float(np.sum((left + right + err / 15.0)[ok]))
        bad = ~ok
        if not bad.any():
            break
        used += int(bad.sum())
        if used > max_intervals:
            raise IntegrationError(f"more than {max_intervals} panels needed")
        lo = np.concatenate([lo[bad], mid[bad]])
        hi = np.concatenate([mid[bad], hi[bad]])
        flo, fhi = np.concatenate([flo[bad], fmid[bad]]), np.concatenate([fmid[bad], fhi[bad]])
        fmid = np.concatenate([flm[bad], frm[bad]])
        whole = np.concatenate([left[bad], right[bad]])
        mid = np.concatenate([lm[bad], rm[bad]])
    return total


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class CapacityDistribution:
    """Capacity law on the open support ``(low, high)``.

    ``cdf`` and ``pdf`` accept scalars or arrays.  ``sampler(rng, size)``
    draws variates; it is used only by the Monte-Carlo oracle.
    """

    cdf: Callable
    pdf: Callable
    low: float
    high: float
    sampler: Callable | None = None
    label: str = ""

    def __post_init__(self):
        if not 0 < self.low < self.high < math.inf:
            raise ValueError("support must satisfy 0 < low < high < inf")

    @property
    def support(self) -> tuple[float, float]:
        return self.low, self.high


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / math.sqrt(2 * math.pi)


def _Phi(z):
    return 0.5 * (1.0 + erf(np.asarray(z, dtype=float) / math.sqrt(2.0)))


def truncated_normal(mu: float, sigma: float, a: float, b: float) -> CapacityDistribution:
    """Normal ``N(mu, sigma**2)`` restricted to ``(a, b)``."""
    if not a < b:
        raise ValueError("need a < b")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    za, zb = (a - mu) / sigma, (b - mu) / sigma
    Pa, Pb = float(_Phi(za)), float(_Phi(zb))
    mass = Pb - Pa
    if mass < 1e-12:
        raise DegenerateInterval(f"normal mass on ({a}, {b}) is {mass:.3g}")

    def pdf(x):
        x = np.asarray(x, dtype=float)
        out = _phi((x - mu) / sigma) / (sigma * mass)
        return np.where((x > a) & (x < b), out, 0.0)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        out = (_Phi((x - mu) / sigma) - Pa) / mass
        return np.clip(np.where(x <= a, 0.0, np.where(x >= b, 1.0, out)), 0.0, 1.0)

    def sampler(rng, size):
        return _sp_truncnorm.rvs(za, zb, loc=mu, scale=sigma, size=size, random_state=rng)

    return CapacityDistribution(cdf, pdf, float(a), float(b), sampler, f"truncnorm({mu},{sigma},{a},{b})")


def uniform(a: float, b: float) -> CapacityDistribution:
    if not a < b:
        raise ValueError("need a < b")
    w = b - a

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > a) & (x < b), 1.0 / w, 0.0)

    def cdf(x):
        return np.clip((np.asarray(x, dtype=float) - a) / w, 0.0, 1.0)

    def sampler(rng, size):
        return rng.uniform(a, b, size)

    return CapacityDistribution(cdf, pdf, float(a), float(b), sampler, f"uniform({a},{b})")


def order_stat_max_pdf(dist: CapacityDistribution, n: int) -> Callable:
    """Density of the largest of ``n`` independent draws."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return lambda x: n * np.power(dist.cdf(x), n - 1) * dist.pdf(x)


@dataclass(frozen=True)
class SharingRegime:
    """Participation ``alpha`` (1C side), mean degree ``lam``, ratio ``r``, cache ratio."""

    alpha: float
    lam: float
    r: float = 1.0
    cache_ratio: float = 0.0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if not 0 <= self.cache_ratio <= 1:
            raise ValueError("cache_ratio must lie in [0, 1]")

    @property
    def alpha_3c(self) -> float:
        return min(self.r * self.alpha, 1.0)


# ---------------------------------------------------------------------------
# expected energies


def expected_task_energy(dist: CapacityDistribution, alpha: float, lam: float, tol: float = INTEGRATION_TOL) -> float:
    """``W(alpha, lam)``."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    k = lam * alpha

    def g(x):
        F = dist.cdf(x)
        return np.exp(k * (F - 1.0)) * F / np.square(x)

    return 1.0 / dist.high + adaptive_simpson(g, dist.low, dist.high, tol)


def expected_content_energy(cache_ratio: float, alpha: float, lam: float) -> float:
    """``Z(alpha, lam)``: probability a content still has to be downloaded."""
    if not 0 <= cache_ratio <= 1:
        raise ValueError("cache_ratio must lie in [0, 1]")
    return (1.0 - cache_ratio) * math.exp(-alpha * lam * cache_ratio)


def delta_task_energy(dist: CapacityDistribution, r: float, alpha_1c: float, lam: float) -> float:
    """``W(alpha_1c, lam) - W(min(r alpha_1c, 1), lam)``."""
    return expected_task_energy(dist, alpha_1c, lam) - expected_task_energy(dist, min(r * alpha_1c, 1.0), lam)


def capacity_condition(dist: CapacityDistribution, r: float, lam: float, condition: str = "first_order") -> float:
    """Stationarity residual in ``lam`` of the reduction at ``alpha_1c = 1/r``.

    ``"first_order"`` is the derivative of
    ``integral (exp(lam (F-1)/r) - exp(lam (F-1))) F / x**2`` (scaled by
    ``r``); ``"stated"`` drops the ``1/x**2`` weight, a variant kept for
    comparison; its root is not a maximiser.
    """
    weighted = {"first_order": True, "stated": False}[condition]

    def g(x):
        F = dist.cdf(x)
        d = F - 1.0
        v = d * F * (np.exp(lam * d / r) - r * np.exp(lam * d))
        return v / np.square(x) if weighted else v

    return adaptive_simpson(g, dist.low, dist.high)


@dataclass(frozen=True)
class MaxReduction:
    delta: float
    normalized: float
    lam: float
    alpha_1c: float


def max_reduction_capacity(dist: CapacityDistribution, r: float, condition: str = "first_order") -> MaxReduction:
    """Largest ``W(alpha, lam) - W(min(r alpha, 1), lam)`` over ``alpha, lam``.

    The maximiser has ``alpha = 1/r``; ``lam`` solves
    :func:`capacity_condition` by bisection after a decade scan over
    ``1e-6 .. 1e4``.  ``normalized`` divides by the noncooperation energy
    ``W(0, 0)``.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    base = expected_task_energy(dist, 0.0, 0.0)
    if r == 1:
        return MaxReduction(0.0, 0.0, math.nan, 1.0)
    h = lambda lam: capacity_condition(dist, r, lam, condition)  # noqa: E731
    vals = [h(lam) for lam in LAMBDA_SCAN]
    root = None
    for (l0, v0), (l1, v1) in zip(zip(LAMBDA_SCAN, vals), zip(LAMBDA_SCAN[1:], vals[1:])):
        if v0 == 0:
            root = l0
            break
        if v0 * v1 < 0:
            root = bisect(h, l0, l1, xtol=LAMBDA_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
            break
    if root is None:
        raise BracketFailure(f"no sign change of the condition on [{LAMBDA_SCAN[0]}, {LAMBDA_SCAN[-1]}]")
    a1 = 1.0 / r
    delta = delta_task_energy(dist, r, a1, root)
    return MaxReduction(delta, delta / base, float(root), a1)


def _caching_shape(r: float) -> float:
    if r == 1:
        return 0.0
    lr = math.log(r)
    return math.exp(-lr / (r - 1)) - math.exp(-r * lr / (r - 1))


def max_reduction_caching(cache_ratio: float, r: float) -> MaxReduction:
    """Closed-form largest caching reduction; ``normalized`` divides by ``Z(0, 0)``."""
    if r < 1:
        raise ValueError("r must be at least 1")
    if not 0 < cache_ratio <= 1:
        raise ValueError("cache_ratio must lie in (0, 1]")
    shape = _caching_shape(r)
    # at r = 1 nothing is gained and no degree is singled out
    lam = math.nan if r == 1 else r * math.log(r) / ((r - 1) * cache_ratio)
    return MaxReduction((1.0 - cache_ratio) * shape, shape, lam, 1.0 / r)


def optimal_alpha_caching(cache_ratio: float, r: float, lam: float) -> float:
    """Best 1C participation for the caching reduction at mean degree ``lam``."""
    if r <= 1:
        raise ValueError("r must exceed 1")
    threshold = r * math.log(r) / ((r - 1) * cache_ratio)
    if lam <= threshold:
        return 1.0 / r
    return math.log(r) / ((r - 1) * lam * cache_ratio)


# ---------------------------------------------------------------------------
# Monte Carlo


def monte_carlo_task_energy(
    dist: CapacityDistribution,
    alpha: float,
    lam: float,
    N: int = 2000,
    trials: int = 50,
    seed: int = 0,
) -> tuple[float, float]:
    """Simulated mean task energy on ``G(N, lam/N)`` and its standard error.

    Every trial draws a fresh graph, capacities and participation flags
    from its own generator seeded with ``(seed, trial)``.  A task costs
    ``1 / max`` capacity over its owner and participating neighbours.
    """
    if dist.sampler is None:
        raise ValueError("distribution has no sampler")
    p = lam / N
    iu, ju = np.triu_indices(N, k=1)
    means = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        q = np.asarray(dist.sampler(rng, N), dtype=float)
        joins = rng.random(N) < alpha
        linked = rng.random(len(iu)) < p
        i, j = iu[linked], ju[linked]
        best = q.copy()
        np.maximum.at(best, i, np.where(joins[j], q[j], 0.0))
        np.maximum.at(best, j, np.where(joins[i], q[i], 0.0))
        means[t] = np.mean(1.0 / best)
    se = float(np.std(means, ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return float(np.mean(means)), se


# ---------------------------------------------------------------------------
# sweeps


def reduction_curve(curve: str, r_grid, params) -> list[tuple[float, float, float, float]]:
    """Rows ``(r, param, normalized_reduction, lambda_tilde)``.

    ``curve="capacity"`` takes ``params`` as ``(mu, sigma, a, b)`` tuples and
    reports ``sigma``; ``curve="caching"`` takes cache ratios.
    """
    rows = []
    for par in params:
        for r in r_grid:
            if curve == "capacity":
                mu, sigma, a, b = par
                m = max_reduction_capacity(truncated_normal(mu, sigma, a, b), float(r))
                rows.append((float(r), float(sigma), m.normalized, m.lam))
            elif curve == "caching":
                m = max_reduction_caching(float(par), float(r))
                rows.append((float(r), float(par), m.normalized, m.lam))
            else:
                raise ValueError(f"unknown curve {curve!r}")
    return rows
