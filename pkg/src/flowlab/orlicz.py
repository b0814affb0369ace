"""Young-type functions, modulars, Luxembourg norms, and the duality bound.

Three parametric families are provided, all built on log+(t) = max(1, log t):

    Zygmund(r, s):   P(t) = t * (log+ t)^r * (log+ log+ t)^s
    ExpLog(gamma):   P(t) = exp(t / (log+ t)^gamma) - 1
    PhiAlpha(alpha): P(t) = t * exp((log+ t)^alpha)

Because log+ >= 1 everywhere, PhiAlpha(1) = e for every alpha, and each
family is linear (Zygmund, PhiAlpha) or plain-exponential (ExpLog) on [0, e].

The Luxembourg norm of f is the smallest lambda with
integral of P(|f|/lambda) d(mu) <= 1, located by bisection on a bracket of
the level-1 crossing; the modular (the integral itself) is exposed
separately since several estimates bound modulars rather than norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gaussian import (
    STATE_DIVERGENT,
    STATE_INAPPLICABLE,
    STATE_OK,
    STATE_UNBOUNDED,
    ExpectationScheme,
    GaussianMeasure,
    NormEstimate,
    _log_weighted_sum,
)

__all__ = [
    "OrliczFunction",
    "Zygmund",
    "ExpLog",
    "PhiAlpha",
    "log_plus",
    "modular",
    "modular_from_log_values",
    "luxembourg_norm",
    "duality_bound_check",
    "DualityReport",
    "DUALITY_PAIRINGS",
]

LAMBDA_CAP = 1e12


def log_plus(t) -> np.ndarray:
    """log+(t) = max(1, log t); equals 1 on [0, e]."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.maximum(1.0, np.log(t))


def _log_plus_from_log(log_t) -> np.ndarray:
    return np.maximum(1.0, np.asarray(log_t, dtype=float))


class OrliczFunction:
    """Common interface: pointwise evaluation and log-space evaluation."""

    def __call__(self, t) -> np.ndarray:
        raise NotImplementedError

    def log_value(self, log_t) -> np.ndarray:
        """log P(t) from log t; usable far beyond float overflow of t."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


def _validate_nonneg(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("Orlicz functions are defined on [0, inf)")
    return t


@dataclass(frozen=True)
class Zygmund(OrliczFunction):
    """P(t) = t (log+ t)^r (log+ log+ t)^s; the space L log^r L log^s log L."""

    r: float
    s: float

    def __post_init__(self):
        if self.r < 0 or self.s < 0:
            raise ValueError("Zygmund exponents must be >= 0")

    def __call__(self, t):
        t = _validate_nonneg(t)
        lp = log_plus(t)
        lpp = np.maximum(1.0, np.log(lp))
        return t * lp**self.r * lpp**self.s

    def log_value(self, log_t):
        log_t = np.asarray(log_t, dtype=float)
        lp = _log_plus_from_log(log_t)
        lpp = np.maximum(1.0, np.log(lp))
        return log_t + self.r * np.log(lp) + self.s * np.log(lpp)

    def describe(self):
        return {"family": "zygmund", "r": self.r, "s": self.s}


@dataclass(frozen=True)
class ExpLog(OrliczFunction):
    """P(t) = exp(t / (log+ t)^gamma) - 1; the space Exp(L / log^gamma L)."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    def _exponent(self, t, lp):
        return t / lp**self.gamma

    def __call__(self, t):
        t = _validate_nonneg(t)
        u = self._exponent(t, log_plus(t))
        return np.expm1(u)

    def log_value(self, log_t):
        log_t = np.asarray(log_t, dtype=float)
        lp = _log_plus_from_log(log_t)
        # log u is always representable; u itself may overflow, in which case
        # log P = u = inf honestly reports an astronomically large value.
        log_u = log_t - self.gamma * np.log(lp)
        u = np.exp(log_u)
        small = u < 30.0
        with np.errstate(divide="ignore"):
            out = np.where(small, np.log(np.expm1(np.where(small, u, 0.0))), u)
        out = np.where(np.isneginf(log_u), -math.inf, out)
        return out

    def describe(self):
        return {"family": "exp-log", "gamma": self.gamma}


@dataclass(frozen=True)
class PhiAlpha(OrliczFunction):
    """P(t) = t exp((log+ t)^alpha); integrability class of pushforward densities."""

    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")

    def __call__(self, t):
        t = _validate_nonneg(t)
        return t * np.exp(log_plus(t) ** self.alpha)

    def log_value(self, log_t):
        log_t = np.asarray(log_t, dtype=float)
        return log_t + _log_plus_from_log(log_t) ** self.alpha

    def describe(self):
        return {"family": "phi-alpha", "alpha": self.alpha}


def modular_from_log_values(
    P: OrliczFunction, log_u: np.ndarray, weights: np.ndarray, scheme=None
) -> NormEstimate:
    """Weighted sum of P(u) from log u values, fully in log-space."""
    return _log_weighted_sum(P.log_value(log_u), weights, scheme)


def modular(
    f: Callable, P: OrliczFunction, m: GaussianMeasure, scheme: ExpectationScheme
) -> NormEstimate:
    """Estimate the modular: integral of P(|f|) against mu."""
    pts, w = scheme.nodes(m)
    with np.errstate(divide="ignore"):
        log_u = np.log(np.abs(np.asarray(f(pts), dtype=float)))
    est = modular_from_log_values(P, log_u, w, scheme)
    if scheme.is_quadrature and est.state == STATE_OK:
        pts2, w2 = ExpectationScheme.gauss_hermite(scheme.level + 1).nodes(m)
        with np.errstate(divide="ignore"):
            log_u2 = np.log(np.abs(np.asarray(f(pts2), dtype=float)))
        est2 = modular_from_log_values(P, log_u2, w2, None)
        err = abs(est2.value - est.value) if math.isfinite(est.value) else math.inf
        return NormEstimate(est.value, err, scheme, state=est.state, log_value=est.log_value)
    return est


def _tail_divergence_trend(abs_f: Callable, P: OrliczFunction) -> bool:
    """Detect integrands whose modular diverges for every lambda.

    For the exponential families the modular with parameter lambda is finite
    for some lambda exactly when u(x)/(log+ u(x))^gamma stays comparable to
    x^2/2.  The ratio of the two is probed on a grid geometric in x (so
    linear in log x); a trend whose increments do not die out marks
    divergence for every lambda, hence an unbounded norm.  Only meaningful in
    one dimension and for ExpLog-type functions; quadrature alone cannot see
    this, since the divergence may live beyond any representable range.
    """
    if not isinstance(P, ExpLog):
        return False
    xs = np.geomspace(10.0, 1e6, 48).reshape(-1, 1)
    u = np.abs(np.asarray(abs_f(xs), dtype=float)).ravel()
    if not np.all(np.isfinite(u)) or np.any(u <= 0):
        return False
    ratio = (u / log_plus(u) ** P.gamma) / (0.5 * xs.ravel() ** 2)
    if np.any(~np.isfinite(ratio)):
        return True
    deltas = np.diff(ratio)
    if not np.all(deltas > 0) or ratio[-1] <= 2.0 * ratio[0]:
        return False
    q = len(deltas) // 4
    early = float(np.mean(deltas[:q]))
    late = float(np.mean(deltas[-q:]))
    # a ratio converging to a finite limit has increments dying out on the
    # log-x grid; a log-or-faster growth keeps them at the same scale
    return late > 0.25 * early


def luxembourg_norm(
    f: Callable,
    P: OrliczFunction,
    m: GaussianMeasure,
    scheme: ExpectationScheme,
    tol: float | None = None,
    tail_probe: bool | None = None,
) -> NormEstimate:
    """Smallest lambda with modular(P, |f|/lambda) <= 1, by bisection.

    The modular is nonincreasing in lambda, which the bracket search relies
    on.  Returns 0 for f identically zero on the nodes.  If no lambda up to
    1e12 brings the modular below 1, or the one-dimensional tail probe shows
    divergence for every lambda, the result state is "unbounded".
    """
    if tol is None:
        tol = 1e-6 if scheme.is_quadrature else 1e-3
    if tol <= 0:
        raise ValueError("tol must be > 0")
    pts, w = scheme.nodes(m)
    u = np.abs(np.asarray(f(pts), dtype=float))
    if np.any(~np.isfinite(u)):
        return NormEstimate(math.inf, math.inf, scheme, state=STATE_UNBOUNDED)
    if not np.any(u > 0):
        return NormEstimate(0.0, 0.0, scheme)

    with np.errstate(divide="ignore"):
        log_u = np.log(u)
    logw = np.log(w)

    if m.dim == 1 and (tail_probe is None or tail_probe):
        if _tail_divergence_trend(f, P):
            return NormEstimate(math.inf, math.inf, scheme, state=STATE_UNBOUNDED)

    def log_modular(lam: float) -> float:
        contrib = P.log_value(log_u - math.log(lam)) + logw
        mx = float(np.max(contrib))
        if not math.isfinite(mx):
            return mx
        return mx + math.log(float(np.sum(np.exp(contrib - mx))))

    lam_hi = max(1.0, float(np.exp(logw) @ np.exp(log_u)))
    while log_modular(lam_hi) > 0.0:
        lam_hi *= 2.0
        if lam_hi > LAMBDA_CAP:
            return NormEstimate(math.inf, math.inf, scheme, state=STATE_UNBOUNDED)
    lam_lo = lam_hi / 2.0
    while log_modular(lam_lo) <= 0.0:
        lam_hi = lam_lo
        lam_lo /= 2.0
        if lam_lo < 1e-280:
            return NormEstimate(0.0, lam_hi, scheme)
    while (lam_hi - lam_lo) > tol * lam_hi:
        mid = 0.5 * (lam_lo + lam_hi)
        if log_modular(mid) <= 0.0:
            lam_hi = mid
        else:
            lam_lo = mid
    lam = 0.5 * (lam_lo + lam_hi)
    return NormEstimate(lam, 0.5 * (lam_hi - lam_lo), scheme)


# Pairings of the duality bound: integral of |fg| dmu <= 2 ||f|| ||g||.
DUALITY_PAIRINGS = {
    "zygmund11-explog1": (Zygmund(1.0, 1.0), ExpLog(1.0)),
    "zygmund10-explog0": (Zygmund(1.0, 0.0), ExpLog(0.0)),
}


@dataclass(frozen=True)
class DualityReport:
    lhs: float
    rhs: float
    holds: bool
    state: str
    norm_f: NormEstimate
    norm_g: NormEstimate
    lhs_error: float

    def describe(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "state": self.state,
            "lhs_error": self.lhs_error,
            "norm_f": self.norm_f.describe(),
            "norm_g": self.norm_g.describe(),
        }


def duality_bound_check(
    f: Callable,
    g: Callable,
    pairing: str | tuple[OrliczFunction, OrliczFunction],
    m: GaussianMeasure,
    scheme: ExpectationScheme,
    tol: float | None = None,
) -> DualityReport:
    """Check integral of |fg| <= 2 ||f||_{P_f} ||g||_{P_g} for a dual pairing."""
    if isinstance(pairing, str):
        P_f, P_g = DUALITY_PAIRINGS[pairing]
    else:
        P_f, P_g = pairing
    nf = luxembourg_norm(f, P_f, m, scheme, tol)
    ng = luxembourg_norm(g, P_g, m, scheme, tol)
    if nf.state != STATE_OK or ng.state != STATE_OK:
        return DualityReport(
            math.nan, math.nan, False, STATE_INAPPLICABLE, nf, ng, math.nan
        )
    from .gaussian import expect

    prod = expect(m, lambda x: np.abs(f(x) * g(x)), scheme)
    if prod.state != STATE_OK:
        return DualityReport(
            math.inf, math.nan, False, STATE_DIVERGENT, nf, ng, math.inf
        )
    rhs = 2.0 * nf.value * ng.value
    rhs_err = 2.0 * (nf.abs_error * ng.value + ng.abs_error * nf.value)
    holds = prod.value <= rhs + rhs_err + prod.abs_error
    return DualityReport(prod.value, rhs, bool(holds), STATE_OK, nf, ng, prod.abs_error)
