"""Maximum-likelihood fitting and the one-sample Kolmogorov-Smirnov test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from . import distributions as dist
from .distributions import Family, as_family
from .errors import FitError
from .simplex import nelder_mead

N_STARTS = 5
START_SPREAD = 0.5
LOG_PARAM_BOUND = 30.0


@dataclass
class FittedModel:
    family: Family
    params: Optional[np.ndarray]
    log_likelihood: float
    n: int
    ks_d: Optional[float] = None
    ks_p: Optional[float] = None
    n_evals: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def param_dict(self) -> Dict[str, float]:
        if self.params is None:
            return {}
        return dict(zip(self.family.param_names, map(float, self.params)))

    def to_json(self):
        row = {
            "family": self.family.value,
            "params": self.param_dict(),
            "loglik": None if self.params is None else float(self.log_likelihood),
            "D": self.ks_d,
            "p": self.ks_p,
            "n": self.n,
        }
        if self.error is not None:
            row["error"] = self.error
        return row


def log_likelihood(f, theta, data) -> float:
    return float(np.sum(dist.logpdf(f, theta, data)))


# --- parameter transforms -------------------------------------------------

def _to_free(f: Family, theta):
    real = dist.REAL_PARAMS.get(f, ())
    return np.array([v if i in real else math.log(v) for i, v in enumerate(theta)])


def _from_free(f: Family, z):
    real = dist.REAL_PARAMS.get(f, ())
    return np.array([v if i in real else math.exp(v) for i, v in enumerate(z)])


def initial_guess(f: Family, x: np.ndarray) -> np.ndarray:
    """Moment-style starting point; only its neighbourhood matters."""
    if f is Family.STUDENT_T:
        med = float(np.median(x))
        mad = float(np.median(np.abs(x - med))) * 1.4826
        return np.array([5.0, med, max(mad, 1e-6)])
    lx = np.log(x)
    m, s = float(lx.mean()), max(float(lx.std()), 1e-6)
    if f is Family.LOG_NORMAL:
        return np.array([m, s])
    if f in (Family.WEIBULL, Family.EXP_WEIBULL):
        k = 1.2825 / s
        lam = math.exp(m + 0.5772 / k)
        return np.array([k, lam]) if f is Family.WEIBULL else np.array([k, 1.0, lam])
    if f is Family.GAMMA:
        mean, var = float(x.mean()), max(float(x.var()), 1e-12)
        return np.array([mean * mean / var, mean / var])
    # power log-normal: match the log-median given sigma = sd of log x
    q = float(special.ndtr(-float(np.median(lx)) / s))
    p = math.log(0.5) / math.log(q) if 0 < q < 1 else 1.0
    return np.array([min(max(p, 1e-3), 1e3), s])


def fit_mle(f, data, n_starts: int = N_STARTS, xtol: float = 1e-8, max_evals: int = 10_000) -> FittedModel:
    """Maximum-likelihood fit of one family (K-S fields left empty).

    Log-normal is solved in closed form.  The other families run a
    Nelder-Mead search in log-parameter space from ``n_starts`` deterministic
    starts and keep the converged start with the highest likelihood.  A start
    that ends on the edge of the search box (|log theta| = 30) counts as not
    converged: the likelihood has no interior maximum along that direction.
    """
    f = as_family(f)
    x = np.asarray(data, dtype=float)
    if x.size < 10:
        raise ValueError("need at least 10 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain non-finite values")
    if f.positive_support and np.any(x <= 0):
        raise ValueError(f"{f.value} needs strictly positive data")

    if f is Family.LOG_NORMAL:
        lx = np.log(x)
        theta = np.array([lx.mean(), lx.std()])
        return FittedModel(f, theta, log_likelihood(f, theta, x), x.size)

    n = x.size

    log_idx = [i for i in range(len(f.param_names)) if i not in dist.REAL_PARAMS.get(f, ())]

    def objective(z):
        # outside the box the density underflows and the objective turns meaningless
        if np.any(np.abs(z[log_idx]) > LOG_PARAM_BOUND):
            return np.inf
        theta = _from_free(f, z)
        return -float(np.sum(dist.logpdf(f, theta, x))) / n

    z0 = _to_free(f, initial_guess(f, x))
    best = None
    best_any = None
    total_evals = 0
    for seed in range(n_starts):
        start = z0 if seed == 0 else z0 + np.random.default_rng(seed).normal(0.0, START_SPREAD, z0.size)
        with np.errstate(all="ignore"):
            res = nelder_mead(objective, start, xtol=xtol, max_evals=max_evals)
        total_evals += res.n_evals
        if np.isfinite(res.fun) and (best_any is None or res.fun < best_any.fun):
            best_any = res
        on_bound = bool(np.any(np.abs(res.x[log_idx]) > LOG_PARAM_BOUND - 1.0))
        if res.converged and not on_bound and np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        carry = None if best_any is None else (_from_free(f, best_any.x), -best_any.fun * n)
        raise FitError(f"{f.value}: no start converged to an interior optimum", best=carry)
    theta = _from_free(f, best.x)
    return FittedModel(f, theta, log_likelihood(f, theta, x), n, n_evals=total_evals)


# --- Kolmogorov-Smirnov -----------------------------------------------------

def ks_statistic(data, cdf_values_sorted=None, f=None, theta=None) -> float:
    x = np.sort(np.asarray(data, dtype=float))
    F = dist.cdf(f, theta, x) if cdf_values_sorted is None else np.asarray(cdf_values_sorted)
    n = x.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution.

    Uses ``2 sum (-1)^(k-1) exp(-2 k^2 lam^2)`` for lam >= 1 and the
    equivalent Jacobi-theta form of the CDF below that, where the alternating
    series converges too slowly.
    """
    if lam < 0.04:
        # the CDF is below 1e-300 here
        return 1.0
    if lam < 1.0:
        c = math.pi ** 2 / (8 * lam * lam)
        s = 0.0
        k = 1
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * c)
            s += term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2 * k * k * lam * lam)
        s += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2 * s))


def ks_test(data, f, theta) -> Tuple[float, float]:
    """``(D, p)``: exact sup distance between the step ECDF and the model CDF,
    with the asymptotic Kolmogorov p-value at ``sqrt(n) * D``."""
    x = np.asarray(data, dtype=float)
    if x.size < 1:
        raise ValueError("ks_test needs at least one observation")
    d = ks_statistic(x, f=f, theta=theta)
    return d, kolmogorov_sf(math.sqrt(x.size) * d)


def fit_and_rank(data, families: Sequence = dist.ALL_FAMILIES, **fit_options) -> List[FittedModel]:
    """Fit every family, attach K-S results and sort by ascending D.

    Ties go to the higher p-value, then family declaration order.  Families
    that could not be fit follow the ranked rows with ``error`` set.
    """
    if not families:
        raise ValueError("no families requested")
    x = np.asarray(data, dtype=float)
    ranked, failed = [], []
    for f in map(as_family, families):
        try:
            m = fit_mle(f, x, **fit_options)
        except (FitError, ValueError) as exc:
            best = getattr(exc, "best", None)
            failed.append(FittedModel(f, None if best is None else best[0],
                                      float("nan") if best is None else best[1], x.size, error=str(exc)))
            continue
        m.ks_d, m.ks_p = ks_test(x, f, m.params)
        ranked.append(m)
    order = list(dist.ALL_FAMILIES)
    ranked.sort(key=lambda m: (m.ks_d, -m.ks_p, order.index(m.family)))
    return ranked + failed
