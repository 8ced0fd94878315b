"""The six candidate families: densities, CDFs, quantiles and samplers.

Parameter vectors (all positive unless noted):

==================  ===========================
log_normal          (mu [real], sigma)
weibull             (k, lam)
gamma               (alpha, beta)   beta is a rate
student_t           (nu, loc [real], scale)
exp_weibull         (k, alpha, lam)
power_log_normal    (p, sigma)
==================  ===========================
"""
from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np
from scipy import special

from .errors import ParameterDomainError


class Family(str, Enum):
    LOG_NORMAL = "log_normal"
    WEIBULL = "weibull"
    GAMMA = "gamma"
    STUDENT_T = "student_t"
    EXP_WEIBULL = "exp_weibull"
    POWER_LOG_NORMAL = "power_log_normal"

    @property
    def param_names(self):
        return PARAM_NAMES[self]

    @property
    def positive_support(self) -> bool:
        return self is not Family.STUDENT_T


PARAM_NAMES = {
    Family.LOG_NORMAL: ("mu", "sigma"),
    Family.WEIBULL: ("k", "lam"),
    Family.GAMMA: ("alpha", "beta"),
    Family.STUDENT_T: ("nu", "loc", "scale"),
    Family.EXP_WEIBULL: ("k", "alpha", "lam"),
    Family.POWER_LOG_NORMAL: ("p", "sigma"),
}

# Indices of parameters allowed to be any real number.
REAL_PARAMS = {Family.LOG_NORMAL: (0,), Family.STUDENT_T: (1,)}

ALL_FAMILIES = tuple(Family)

_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


def as_family(f) -> Family:
    return f if isinstance(f, Family) else Family(f)


def check_params(f, theta: Sequence[float]) -> np.ndarray:
    f = as_family(f)
    theta = np.asarray(theta, dtype=float)
    names = PARAM_NAMES[f]
    if theta.shape != (len(names),):
        raise ParameterDomainError(f"{f.value} takes {len(names)} parameters, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ParameterDomainError(f"non-finite parameters {theta}")
    real = REAL_PARAMS.get(f, ())
    for i, v in enumerate(theta):
        if i not in real and not v > 0:
            raise ParameterDomainError(f"{f.value}: {names[i]} must be > 0, got {v}")
    return theta


def _log_pos(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(np.where(x > 0, x, np.nan))


def logpdf(f, theta, x):
    """Log density; ``-inf`` outside the support."""
    f = as_family(f)
    theta = check_params(f, theta)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if f is Family.STUDENT_T:
            nu, loc, scale = theta
            t = (x - loc) / scale
            out = (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
                   - 0.5 * np.log(nu * np.pi) - np.log(scale)
                   - (nu + 1) / 2 * np.log1p(t * t / nu))
            return out
        lx = _log_pos(x)
        if f is Family.LOG_NORMAL:
            mu, s = theta
            out = -lx - np.log(s) - _LOG_SQRT_2PI - (lx - mu) ** 2 / (2 * s * s)
        elif f is Family.WEIBULL:
            k, lam = theta
            z = lx - np.log(lam)
            out = np.log(k / lam) + (k - 1) * z - np.exp(k * z)
        elif f is Family.GAMMA:
            a, b = theta
            out = a * np.log(b) + (a - 1) * lx - b * x - special.gammaln(a)
        elif f is Family.EXP_WEIBULL:
            k, a, lam = theta
            z = lx - np.log(lam)
            u = np.exp(k * z)
            # log(1 - e^-u) ~ log u - u/2 once u is tiny (and u may underflow to 0)
            log_base = np.where(u < 1e-10, k * z - u / 2, np.log(-np.expm1(-u)))
            out = np.log(a * k / lam) + (k - 1) * z + (a - 1) * log_base - u
        elif f is Family.POWER_LOG_NORMAL:
            p, s = theta
            z = lx / s
            zpos = np.where(z > 0, z, 0.0)
            # for z > 0, log Phi(-z) = log(erfcx(z/sqrt2)/2) - z^2/2; folding the
            # z^2 terms together avoids cancellation when z is huge
            tail = -0.5 * p * zpos * zpos + (p - 1) * np.log(0.5 * special.erfcx(zpos / np.sqrt(2)))
            head = -0.5 * z * z + (p - 1) * special.log_ndtr(-np.where(z > 0, 0.0, z))
            out = np.log(p / s) - lx - _LOG_SQRT_2PI + np.where(z > 0, tail, head)
        out = np.where(np.isnan(lx), -np.inf, out)
    return out


def pdf(f, theta, x):
    """Density at ``x``; zero outside the support (never raises for x)."""
    out = np.exp(logpdf(f, theta, x))
    return float(out) if np.ndim(out) == 0 else out


def cdf(f, theta, x):
    f = as_family(f)
    theta = check_params(f, theta)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if f is Family.STUDENT_T:
            nu, loc, scale = theta
            out = special.stdtr(nu, (x - loc) / scale)
        else:
            pos = x > 0
            xp = np.where(pos, x, 1.0)
            if f is Family.LOG_NORMAL:
                mu, s = theta
                v = special.ndtr((np.log(xp) - mu) / s)
            elif f is Family.WEIBULL:
                k, lam = theta
                v = -np.expm1(-(xp / lam) ** k)
            elif f is Family.GAMMA:
                a, b = theta
                v = special.gammainc(a, b * xp)
            elif f is Family.EXP_WEIBULL:
                k, a, lam = theta
                v = (-np.expm1(-(xp / lam) ** k)) ** a
            elif f is Family.POWER_LOG_NORMAL:
                p, s = theta
                v = -np.expm1(p * special.log_ndtr(-np.log(xp) / s))
            out = np.where(pos, v, 0.0)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def ppf(f, theta, u):
    """Quantile function (inverse CDF) for ``u`` in (0, 1)."""
    f = as_family(f)
    theta = check_params(f, theta)
    u = np.asarray(u, dtype=float)
    if f is Family.LOG_NORMAL:
        mu, s = theta
        return np.exp(mu + s * special.ndtri(u))
    if f is Family.WEIBULL:
        k, lam = theta
        return lam * (-np.log1p(-u)) ** (1 / k)
    if f is Family.GAMMA:
        a, b = theta
        return special.gammaincinv(a, u) / b
    if f is Family.STUDENT_T:
        nu, loc, scale = theta
        return loc + scale * special.stdtrit(nu, u)
    if f is Family.EXP_WEIBULL:
        k, a, lam = theta
        return lam * (-np.log1p(-u ** (1 / a))) ** (1 / k)
    p, s = theta
    # 1 - Phi(-ln x / s)^p = u
    return np.exp(-s * special.ndtri((1 - u) ** (1 / p)))


def sample(f, theta, seed, n: int) -> np.ndarray:
    """``n`` draws, deterministic in ``seed`` (an int or a numpy Generator)."""
    f = as_family(f)
    theta = check_params(f, theta)
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if f is Family.LOG_NORMAL:
        return np.exp(theta[0] + theta[1] * rng.standard_normal(n))
    if f is Family.GAMMA:
        return rng.gamma(theta[0], 1.0 / theta[1], n)
    if f is Family.STUDENT_T:
        return theta[1] + theta[2] * rng.standard_t(theta[0], n)
    # Open interval keeps the quantile finite at both ends.
    u = rng.random(n)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return ppf(f, theta, u)


def mean(f, theta) -> float:
    """Distribution mean (numerical for the families without a simple form)."""
    f = as_family(f)
    theta = check_params(f, theta)
    if f is Family.LOG_NORMAL:
        return float(np.exp(theta[0] + theta[1] ** 2 / 2))
    if f is Family.WEIBULL:
        return float(theta[1] * special.gamma(1 + 1 / theta[0]))
    if f is Family.GAMMA:
        return float(theta[0] / theta[1])
    if f is Family.STUDENT_T:
        return float(theta[1]) if theta[0] > 1 else float("nan")
    from scipy import integrate
    val, _ = integrate.quad(lambda u: ppf(f, theta, u), 0, 1, limit=200)
    return float(val)
