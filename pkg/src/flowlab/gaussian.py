"""Standard Gaussian measure on R^n: density, sampling, and expectations.

The measure mu has density (2*pi)^(-n/2) * exp(-|x|^2 / 2) with respect to
Lebesgue measure.  Every integral in the package is an expectation under mu,
estimated either by tensor Gauss-Hermite quadrature (probabilists' weight, so
nodes live on mu directly) or by seeded Monte Carlo.  Estimates carry explicit
error bars; a divergent integral is a result state, never an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

__all__ = [
    "GaussianMeasure",
    "ExpectationScheme",
    "NormEstimate",
    "gaussian_pdf",
    "gaussian_log_pdf",
    "sample",
    "derive_seed",
    "expect",
    "expect_log",
]

# Tensor Gauss-Hermite grids are only usable in low dimension (node count
# grows like level^dim); above this the schemes must be Monte Carlo.
MAX_TENSOR_DIM = 3

# Result states shared by estimates across the package.
STATE_OK = "ok"
STATE_DIVERGENT = "divergent"
STATE_UNBOUNDED = "unbounded"
STATE_INAPPLICABLE = "inapplicable"
STATE_UNRELIABLE = "unreliable"


@dataclass(frozen=True)
class GaussianMeasure:
    """Standard Gaussian probability measure on R^dim."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dim}")

    def pdf(self, x) -> np.ndarray:
        return gaussian_pdf(self, x)

    def log_pdf(self, x) -> np.ndarray:
        return gaussian_log_pdf(self, x)


def _as_points(m: GaussianMeasure, x) -> tuple[np.ndarray, bool]:
    """Normalize x to shape (N, dim); report whether the input was a single point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if m.dim != 1:
            raise ValueError("scalar point given for a measure of dimension > 1")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] != m.dim:
            raise ValueError(f"point has dimension {arr.shape[0]}, expected {m.dim}")
        return arr.reshape(1, m.dim), True
    if arr.ndim == 2 and arr.shape[1] == m.dim:
        return arr, False
    raise ValueError(f"cannot interpret array of shape {arr.shape} as points in R^{m.dim}")


def gaussian_log_pdf(m: GaussianMeasure, x) -> np.ndarray:
    pts, single = _as_points(m, x)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite point passed to the Gaussian density")
    out = -0.5 * np.sum(pts * pts, axis=1) - 0.5 * m.dim * math.log(2.0 * math.pi)
    return out[0] if single else out


def gaussian_pdf(m: GaussianMeasure, x) -> np.ndarray:
    """Density (2*pi)^(-n/2) exp(-|x|^2/2) of mu at x (a point or an (N, n) batch)."""
    return np.exp(gaussian_log_pdf(m, x))


def derive_seed(seed: int, shard: int) -> int:
    """Deterministic per-shard seed for parallel sample streams (seed XOR shard)."""
    return int(seed) ^ int(shard)


def sample(m: GaussianMeasure, n_samples: int, seed: int) -> np.ndarray:
    """Draw n_samples points from mu, deterministically for a given seed."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_samples, m.dim))


@dataclass(frozen=True)
class ExpectationScheme:
    """How integrals against mu are estimated.

    kind = "gauss-hermite": tensor grid with `level` nodes per axis
    (probabilists' convention, weights normalized to sum to one).
    kind = "monte-carlo": `n_samples` seeded standard-normal draws.
    """

    kind: str
    level: int = 12
    n_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gauss-hermite", "monte-carlo"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "gauss-hermite" and self.level < 2:
            raise ValueError("Gauss-Hermite level must be >= 2")
        if self.kind == "monte-carlo" and self.n_samples < 1:
            raise ValueError("Monte Carlo sample count must be >= 1")

    @staticmethod
    def gauss_hermite(level: int) -> "ExpectationScheme":
        return ExpectationScheme(kind="gauss-hermite", level=level)

    @staticmethod
    def monte_carlo(n_samples: int, seed: int) -> "ExpectationScheme":
        return ExpectationScheme(kind="monte-carlo", n_samples=n_samples, seed=seed)

    @property
    def is_quadrature(self) -> bool:
        return self.kind == "gauss-hermite"

    def with_seed(self, seed: int) -> "ExpectationScheme":
        return replace(self, seed=seed)

    def nodes(self, m: GaussianMeasure) -> tuple[np.ndarray, np.ndarray]:
        """Points (M, dim) and probability weights (M,) realizing this scheme."""
        if self.kind == "gauss-hermite":
            if m.dim > MAX_TENSOR_DIM:
                raise ValueError(
                    f"tensor Gauss-Hermite grids are limited to dim <= {MAX_TENSOR_DIM}; "
                    "use a Monte Carlo scheme"
                )
            return _tensor_hermite(self.level, m.dim)
        pts = sample(m, self.n_samples, self.seed)
        w = np.full(self.n_samples, 1.0 / self.n_samples)
        return pts, w

    def describe(self) -> dict:
        if self.kind == "gauss-hermite":
            return {"kind": self.kind, "level": self.level}
        return {"kind": self.kind, "n_samples": self.n_samples, "seed": self.seed}


def _tensor_hermite(level: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    x1, w1 = hermegauss(level)
    w1 = w1 / w1.sum()  # weights sum to one, so expect(1) == 1
    if dim == 1:
        return x1.reshape(-1, 1), w1
    grids = np.meshgrid(*([x1] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = w1
    for _ in range(dim - 1):
        w = np.multiply.outer(w, w1)
    return pts, w.ravel()


@dataclass(frozen=True)
class NormEstimate:
    """A scalar estimate with an absolute error bar and a result state.

    abs_error == 0 only for deterministic quadrature or analytic cases.
    state is one of "ok", "divergent", "unbounded", "inapplicable",
    "unreliable".  log_value mirrors value in log-space when the linear value
    is at risk of overflow (modulars of heavy-tailed densities).
    """

    value: float
    abs_error: float
    scheme: ExpectationScheme | None
    state: str = STATE_OK
    log_value: float | None = None

    @property
    def ok(self) -> bool:
        return self.state == STATE_OK

    def describe(self) -> dict:
        return {
            "value": self.value,
            "abs_error": self.abs_error,
            "state": self.state,
            "log_value": self.log_value,
            "scheme": self.scheme.describe() if self.scheme is not None else None,
        }


def _check_values(vals: np.ndarray) -> None:
    bad = ~np.isfinite(vals) & ~np.isposinf(vals)
    if np.any(bad):
        raise ValueError("integrand returned NaN or -inf at a node")


def expect(m: GaussianMeasure, f: Callable, scheme: ExpectationScheme) -> NormEstimate:
    """Estimate the integral of f against mu.

    f maps an (N, dim) batch of points to N values.  +inf values mark a
    divergent integral and flip the result state; NaN or -inf raise.
    Gauss-Hermite error bars compare levels L and L+1 (zero for polynomials of
    degree <= 2L-1); Monte Carlo error bars are 3 * sample std / sqrt(N).
    """
    if scheme.kind == "gauss-hermite":
        pts, w = scheme.nodes(m)
        vals = np.asarray(f(pts), dtype=float)
        _check_values(vals)
        if np.any(np.isposinf(vals)):
            return NormEstimate(math.inf, math.inf, scheme, state=STATE_DIVERGENT)
        est = float(w @ vals)
        pts2, w2 = ExpectationScheme.gauss_hermite(scheme.level + 1).nodes(m)
        vals2 = np.asarray(f(pts2), dtype=float)
        _check_values(vals2)
        if np.any(np.isposinf(vals2)):
            return NormEstimate(math.inf, math.inf, scheme, state=STATE_DIVERGENT)
        err = abs(float(w2 @ vals2) - est)
        return NormEstimate(est, err, scheme)

    pts, w = scheme.nodes(m)
    vals = np.asarray(f(pts), dtype=float)
    _check_values(vals)
    if np.any(np.isposinf(vals)):
        return NormEstimate(math.inf, math.inf, scheme, state=STATE_DIVERGENT)
    est = float(np.mean(vals))
    n = len(vals)
    sd = float(np.std(vals, ddof=1)) if n > 1 else 0.0
    return NormEstimate(est, 3.0 * sd / math.sqrt(n), scheme)


def expect_log(m: GaussianMeasure, log_f: Callable, scheme: ExpectationScheme) -> NormEstimate:
    """Estimate the integral of exp(log_f) against mu, working in log-space.

    Meant for integrands whose values overflow float64 (density modulars).
    Returns an estimate whose log_value is always finite when the sum is;
    value is exp(log_value) and may be inf.
    """
    pts, w = scheme.nodes(m)
    lv = np.asarray(log_f(pts), dtype=float)
    if np.any(np.isnan(lv)):
        raise ValueError("log-integrand returned NaN at a node")
    return _log_weighted_sum(lv, w, scheme)


def _log_weighted_sum(log_vals: np.ndarray, weights: np.ndarray, scheme) -> NormEstimate:
    """Sum w_i * exp(log_vals_i) via log-sum-exp, with an error bar."""
    log_vals = np.asarray(log_vals, dtype=float)
    if np.any(np.isposinf(log_vals)):
        return NormEstimate(math.inf, math.inf, scheme, state=STATE_DIVERGENT, log_value=math.inf)
    logw = np.log(weights)
    contrib = log_vals + logw
    mx = np.max(contrib)
    if mx == -math.inf:
        return NormEstimate(0.0, 0.0, scheme, log_value=-math.inf)
    total = np.sum(np.exp(contrib - mx))
    log_est = mx + math.log(total)
    est = math.exp(log_est) if log_est < 709 else math.inf

    if scheme is not None and scheme.kind == "monte-carlo":
        n = len(log_vals)
        shifted = np.exp(log_vals - np.max(log_vals))
        sd_shift = float(np.std(shifted, ddof=1)) if n > 1 else 0.0
        log_err = (
            float(np.max(log_vals)) + math.log(3.0 * sd_shift / math.sqrt(n))
            if sd_shift > 0
            else -math.inf
        )
        err = math.exp(log_err) if log_err < 709 else math.inf
        return NormEstimate(est, err, scheme, log_value=log_est)
    return NormEstimate(est, 0.0, scheme, log_value=log_est)
