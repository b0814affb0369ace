"""Time-dependent velocity fields and their Gaussian-measure diagnostics.

A VectorField bundles vectorized evaluators for the velocity, its spatial
divergence (analytic when available, central finite differences otherwise)
and an optional Jacobian.  On top of those this module provides:

  * div_mu(f, t, x)        the Gaussian divergence  div b - x . b
  * growth_norm(f, t)      sup of |b| / (1 + |x| log+ |x|), probed on a grid
  * beta_norm(f, t, gamma) Luxembourg norm of div_mu against ExpLog(gamma)
  * ou_smooth(f, eps)      Ornstein-Uhlenbeck smoothing with frozen nodes
  * a small library of named analytic fields used throughout the package

All evaluators are pure and safe for concurrent use once constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .gaussian import (
    ExpectationScheme,
    GaussianMeasure,
    NormEstimate,
)
from .orlicz import ExpLog, log_plus, luxembourg_norm

__all__ = [
    "VectorField",
    "FieldLibraryEntry",
    "FIELD_LIBRARY",
    "make_field",
    "library_entry",
    "div_mu",
    "growth_norm",
    "beta_norm",
    "beta_time_integral",
    "ou_smooth",
    "ou_smooth_scalar",
    "ou_divergence_identity_check",
]


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"point has dimension {arr.shape[0]}, expected {dim}")
        return arr.reshape(1, dim), True
    if arr.ndim == 2 and arr.shape[1] == dim:
        return arr, False
    raise ValueError(f"cannot interpret shape {arr.shape} as points in R^{dim}")


class VectorField:
    """Velocity field b(t, x) with divergence and Jacobian-norm evaluators.

    value_fn(t, x): t scalar or (N,), x (N, dim) -> (N, dim)
    div_fn, jac_fn are optional analytic evaluators with the same batching;
    jac_fn returns (N, dim, dim).  When absent, central finite differences
    with step h = fd_scale * (1 + |x|) are used.
    """

    def __init__(
        self,
        dim: int,
        value_fn: Callable,
        div_fn: Callable | None = None,
        jac_fn: Callable | None = None,
        time_domain: tuple[float, float] = (0.0, 1.0),
        name: str = "custom",
        params: dict | None = None,
        time_independent: bool = True,
        fd_scale: float = 1e-5,
    ):
        self.dim = dim
        self._value = value_fn
        self._div = div_fn
        self._jac = jac_fn
        self.time_domain = (float(time_domain[0]), float(time_domain[1]))
        self.name = name
        self.params = dict(params or {})
        self.time_independent = time_independent
        self.fd_scale = fd_scale

    def cache_key(self):
        if self.name == "custom":
            return None  # ad-hoc fields are not safely distinguishable
        items = tuple(sorted((k, str(v)) for k, v in self.params.items()))
        return (self.name, items, self.dim)

    def describe(self) -> dict:
        return {"name": self.name, "params": self.params, "dim": self.dim}

    def eval(self, t, x) -> np.ndarray:
        pts, single = _as_batch(x, self.dim)
        out = np.asarray(self._value(t, pts), dtype=float)
        return out[0] if single else out

    def div(self, t, x) -> np.ndarray:
        pts, single = _as_batch(x, self.dim)
        if self._div is not None:
            out = np.asarray(self._div(t, pts), dtype=float)
        else:
            out = self._fd_div(t, pts)
        return out[0] if single else out

    def jac_norm(self, t, x) -> np.ndarray:
        """Frobenius norm of the Jacobian; local Lipschitz estimate."""
        pts, single = _as_batch(x, self.dim)
        if self._jac is not None:
            J = np.asarray(self._jac(t, pts), dtype=float)
            out = np.sqrt(np.sum(J * J, axis=(1, 2)))
        else:
            _, out = self._fd_first_order(t, pts)
        return out[0] if single else out

    def div_mu(self, t, x) -> np.ndarray:
        """Gaussian divergence div b(t,x) - x . b(t,x)."""
        pts, single = _as_batch(x, self.dim)
        vel = np.asarray(self._value(t, pts), dtype=float)
        d = (
            np.asarray(self._div(t, pts), dtype=float)
            if self._div is not None
            else self._fd_div(t, pts)
        )
        out = d - np.sum(pts * vel, axis=1)
        return out[0] if single else out

    def _fd_first_order(self, t, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Central-difference divergence and Frobenius Jacobian norm together."""
        h = self.fd_scale * (1.0 + np.sqrt(np.sum(pts * pts, axis=1)))
        div = np.zeros(pts.shape[0])
        fro2 = np.zeros(pts.shape[0])
        for j in range(self.dim):
            shift = np.zeros_like(pts)
            shift[:, j] = h
            col = (
                np.asarray(self._value(t, pts + shift), dtype=float)
                - np.asarray(self._value(t, pts - shift), dtype=float)
            ) / (2.0 * h[:, None])
            div += col[:, j]
            fro2 += np.sum(col * col, axis=1)
        return div, np.sqrt(fro2)

    def _fd_div(self, t, pts: np.ndarray) -> np.ndarray:
        return self._fd_first_order(t, pts)[0]


def div_mu(f: VectorField, t, x) -> np.ndarray:
    return f.div_mu(t, x)


def _probe_directions(dim: int, n: int = 48) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # Fibonacci sphere, deterministic
    i = np.arange(n, dtype=float) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def growth_norm(
    f: VectorField, t: float, scheme: ExpectationScheme | None = None
) -> NormEstimate:
    """Sup of |b(t,x)| / (1 + |x| log+ |x|) over a deterministic probe grid.

    The grid is radial (log-spaced radii out to 500) plus the scheme's nodes
    when a scheme is given.  The value is a lower bound of the essential sup.
    """
    radii = np.concatenate([[0.0], np.geomspace(1e-2, 500.0, 320)])
    dirs = _probe_directions(f.dim)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, f.dim)
    if scheme is not None:
        m = GaussianMeasure(f.dim)
        nodes, _ = scheme.nodes(m)
        pts = np.concatenate([pts, nodes])
    vel = f.eval(t, pts)
    speed = np.sqrt(np.sum(vel * vel, axis=1))
    r = np.sqrt(np.sum(pts * pts, axis=1))
    denom = 1.0 + r * log_plus(r)
    return NormEstimate(float(np.max(speed / denom)), 0.0, scheme)


def beta_norm(
    f: VectorField,
    t: float,
    gamma: float,
    m: GaussianMeasure,
    scheme: ExpectationScheme,
    tol: float | None = None,
) -> NormEstimate:
    """Luxembourg norm of x -> div_mu b(t, x) against ExpLog(gamma)."""
    return luxembourg_norm(
        lambda x: f.div_mu(t, x), ExpLog(gamma), m, scheme, tol
    )


_BETA_INTEGRAL_CACHE: dict = {}


def beta_time_integral(
    f: VectorField,
    interval: tuple[float, float],
    gamma: float,
    m: GaussianMeasure,
    scheme: ExpectationScheme,
    tol: float | None = None,
    n_nodes: int = 9,
) -> tuple[float, list[float]]:
    """Integral of beta(r) over [s, t] by composite Simpson on n_nodes nodes.

    Each node costs a full Luxembourg solve, so results are cached per
    (field, interval, gamma, scheme).  Returns (integral, per-node values);
    the integral is inf if beta is unbounded at any node.
    """
    s, t = float(interval[0]), float(interval[1])
    key = None
    if f.cache_key() is not None:
        key = (f.cache_key(), s, t, gamma, tuple(sorted(scheme.describe().items())), tol)
        if key in _BETA_INTEGRAL_CACHE:
            return _BETA_INTEGRAL_CACHE[key]
    if n_nodes % 2 == 0:
        n_nodes += 1
    if f.time_independent:
        b0 = beta_norm(f, s, gamma, m, scheme, tol)
        val = b0.value * (t - s) if b0.ok else math.inf
        out = (val, [b0.value] * n_nodes)
    else:
        times = np.linspace(s, t, n_nodes)
        vals = []
        for r in times:
            est = beta_norm(f, float(r), gamma, m, scheme, tol)
            vals.append(est.value if est.ok else math.inf)
        if any(math.isinf(v) for v in vals):
            out = (math.inf, vals)
        else:
            h = (t - s) / (n_nodes - 1)
            w = np.ones(n_nodes)
            w[1:-1:2] = 4.0
            w[2:-1:2] = 2.0
            out = (float(h / 3.0 * np.dot(w, vals)), vals)
    if key is not None:
        _BETA_INTEGRAL_CACHE[key] = out
    return out


def ou_smooth(
    f: VectorField,
    eps: float,
    scheme: ExpectationScheme | None = None,
) -> VectorField:
    """Ornstein-Uhlenbeck smoothing: averages b(t, e^-eps x + sigma y) over mu.

    The averaging nodes are frozen at construction so the smoothed field is a
    deterministic function (ODE right-hand sides must be reproducible).  The
    divergence evaluator is derived from b's analytic divergence when present:
    d/dx of the average pulls out a factor e^-eps.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if scheme is None:
        scheme = ExpectationScheme.gauss_hermite(20 if f.dim == 1 else 12)
    m = GaussianMeasure(f.dim)
    nodes, w = scheme.nodes(m)  # (M, dim), (M,)
    decay = math.exp(-eps)
    sigma = math.sqrt(1.0 - math.exp(-2.0 * eps))
    shifted = sigma * nodes  # (M, dim)

    if not np.all(np.isfinite(shifted)):
        raise ValueError("non-finite smoothing node")

    def value_fn(t, x):
        out = np.zeros_like(x)
        base = decay * x
        for j in range(len(w)):
            vals = f.eval(t, base + shifted[j])
            if not np.all(np.isfinite(vals)):
                raise FloatingPointError("smoothed-field integrand non-finite at a node")
            out += w[j] * vals
        return out

    div_fn = None
    if f._div is not None:

        def div_fn(t, x):
            out = np.zeros(x.shape[0])
            base = decay * x
            for j in range(len(w)):
                out += w[j] * f.div(t, base + shifted[j])
            return decay * out

    jac_fn = None
    if f._jac is not None:

        def jac_fn(t, x):
            out = np.zeros((x.shape[0], f.dim, f.dim))
            base = decay * x
            for j in range(len(w)):
                out += w[j] * np.asarray(f._jac(t, base + shifted[j]), dtype=float)
            return decay * out

    return VectorField(
        f.dim,
        value_fn,
        div_fn=div_fn,
        jac_fn=jac_fn,
        time_domain=f.time_domain,
        name=f"ou({f.name})",
        params={**f.params, "ou_eps": eps},
        time_independent=f.time_independent,
    )


def ou_smooth_scalar(
    fn: Callable, eps: float, m: GaussianMeasure, scheme: ExpectationScheme
) -> Callable:
    """OU smoothing of a scalar function g: the average of g(e^-eps x + sigma y)."""
    nodes, w = scheme.nodes(m)
    decay = math.exp(-eps)
    sigma = math.sqrt(1.0 - math.exp(-2.0 * eps))
    shifted = sigma * nodes

    def smoothed(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[0])
        base = decay * x
        for j in range(len(w)):
            out += w[j] * np.asarray(fn(base + shifted[j]), dtype=float)
        return out

    return smoothed


def ou_divergence_identity_check(
    f: VectorField,
    eps: float,
    t: float,
    probe_points,
    scheme: ExpectationScheme | None = None,
) -> dict:
    """Compare div_mu(P_eps b) with e^eps P_eps(div_mu b) at probe points.

    Both sides are evaluated with the same frozen node set; the identity
    itself is a nontrivial Gaussian integration by parts, so agreement is a
    real check, not a tautology.
    """
    m = GaussianMeasure(f.dim)
    if scheme is None:
        scheme = ExpectationScheme.gauss_hermite(20 if f.dim == 1 else 12)
    pts, _ = _as_batch(probe_points, f.dim)
    smoothed = ou_smooth(f, eps, scheme)
    lhs = smoothed.div_mu(t, pts)
    g = ou_smooth_scalar(lambda x: f.div_mu(t, x), eps, m, scheme)
    rhs = math.exp(eps) * g(pts)
    rel = np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))
    return {
        "max_rel_error": float(np.max(rel)),
        "lhs": lhs,
        "rhs": rhs,
        "eps": eps,
        "t": t,
    }


# ---------------------------------------------------------------------------
# Field library
# ---------------------------------------------------------------------------


@dataclass
class FieldLibraryEntry:
    """A named constructor plus analytic flow/density maps when known.

    flow_map(s, t, x) -> forward flow states; inverse_map(s, t, x) -> backward.
    log_density(s, t, x) -> log of the pushforward density of mu under the
    forward flow, when a closed form exists.
    """

    name: str
    make: Callable[..., VectorField]
    defaults: dict = dc_field(default_factory=dict)
    flow_map: Callable | None = None
    inverse_map: Callable | None = None
    log_density: Callable | None = None
    notes: str = ""


def _zero(dim: int = 1) -> VectorField:
    dim = int(dim)
    return VectorField(
        dim,
        lambda t, x: np.zeros_like(x),
        div_fn=lambda t, x: np.zeros(x.shape[0]),
        jac_fn=lambda t, x: np.zeros((x.shape[0], dim, dim)),
        name="zero",
        params={"dim": dim},
    )


def _constant(c=(1.0,)) -> VectorField:
    c = np.asarray(c, dtype=float)
    dim = c.shape[0]
    return VectorField(
        dim,
        lambda t, x: np.broadcast_to(c, x.shape).copy(),
        div_fn=lambda t, x: np.zeros(x.shape[0]),
        jac_fn=lambda t, x: np.zeros((x.shape[0], dim, dim)),
        name="constant",
        params={"c": c.tolist()},
    )


def _linear(matrix) -> VectorField:
    A = np.asarray(matrix, dtype=float)
    if A.ndim == 1:
        n = int(math.isqrt(A.size))
        A = A.reshape(n, n)
    dim = A.shape[0]
    trace = float(np.trace(A))
    return VectorField(
        dim,
        lambda t, x: x @ A.T,
        div_fn=lambda t, x: np.full(x.shape[0], trace),
        jac_fn=lambda t, x: np.broadcast_to(A, (x.shape[0], dim, dim)).copy(),
        name="linear",
        params={"matrix": A.tolist()},
    )


def _linear_contraction(dim: int = 1, rate: float = 1.0) -> VectorField:
    dim, rate = int(dim), float(rate)
    fld = VectorField(
        dim,
        lambda t, x: -rate * x,
        div_fn=lambda t, x: np.full(x.shape[0], -rate * dim),
        jac_fn=lambda t, x: np.broadcast_to(
            -rate * np.eye(dim), (x.shape[0], dim, dim)
        ).copy(),
        name="linear-contraction",
        params={"dim": dim, "rate": rate},
    )
    return fld


def _rotation() -> VectorField:
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    fld = _linear(A)
    fld.name = "rotation"
    fld.params = {}
    return fld


def _pulsed_contraction(dim: int = 1, amplitude: float = 0.5) -> VectorField:
    dim, amplitude = int(dim), float(amplitude)

    def rate(t, n):
        r = 1.0 + amplitude * np.sin(2.0 * math.pi * np.asarray(t, dtype=float))
        return np.broadcast_to(r, (n,))

    def val(t, x):
        return -rate(t, x.shape[0])[:, None] * x

    def dv(t, x):
        return -dim * rate(t, x.shape[0])

    def jac(t, x):
        return -rate(t, x.shape[0])[:, None, None] * np.eye(dim)

    return VectorField(
        dim,
        val,
        div_fn=dv,
        jac_fn=jac,
        name="pulsed-contraction",
        params={"dim": dim, "amplitude": amplitude},
        time_independent=False,
    )


def _blowup(strength: float = 1.0) -> VectorField:
    """One-dimensional field with divergence growing like x^2 log x.

    b(x) = strength * x * log(e + x^2) keeps |b| within the admissible growth
    envelope (the ratio against 1 + |x| log+ |x| stays bounded), while
    div_mu b = strength * (log(e+x^2) + 2x^2/(e+x^2) - x^2 log(e+x^2))
    is subexponentially but not exponentially integrable: ExpLog(1) norms are
    finite, ExpLog(0) norms are not.  The sign makes the forward flow expand,
    so the pushforward density has a heavy upper tail and nontrivial level
    sets.  Trajectories never blow up in finite time (Osgood growth).
    """
    s = float(strength)

    def val(t, x):
        return s * x * np.log(math.e + x * x)

    def dv(t, x):
        x0 = x[:, 0]
        q = x0 * x0
        return s * (np.log(math.e + q) + 2.0 * q / (math.e + q))

    def jac(t, x):
        return dv(t, x).reshape(-1, 1, 1)

    return VectorField(
        1,
        val,
        div_fn=dv,
        jac_fn=jac,
        name="blowup",
        params={"strength": s},
    )


def _cubic(coeff: float = 1.0) -> VectorField:
    """b(x) = coeff * x^3: violates the admissible growth, trajectories from
    large seeds explode in finite time.  Used to exercise the blow-up and
    freeze machinery, not the theory checks."""
    c = float(coeff)
    return VectorField(
        1,
        lambda t, x: c * x**3,
        div_fn=lambda t, x: 3.0 * c * x[:, 0] ** 2,
        jac_fn=lambda t, x: (3.0 * c * x[:, 0] ** 2).reshape(-1, 1, 1),
        name="cubic",
        params={"coeff": c},
    )


def _polynomial(dim: int = 1, seed: int = 0, scale: float = 0.2) -> VectorField:
    """Random cubic polynomial field with seeded coefficients.

    Component i is sum over multi-indices of degree <= 3 of c_ia * x^a with
    coefficients drawn once at construction.  Smooth, moderate growth at desk
    scale; used for randomized identity checks.
    """
    dim = int(dim)
    rng = np.random.default_rng(seed)
    # coefficients for monomials 1, x_j, x_j^2, x_j^3, and pairwise x_j x_k
    c0 = rng.normal(size=dim) * scale
    c1 = rng.normal(size=(dim, dim)) * scale
    c2 = rng.normal(size=(dim, dim)) * scale * 0.5
    c3 = rng.normal(size=(dim, dim)) * scale * 0.2

    def val(t, x):
        out = np.broadcast_to(c0, x.shape).copy()
        out += x @ c1.T
        out += (x * x) @ c2.T
        out += (x * x * x) @ c3.T
        return out

    def dv(t, x):
        out = np.full(x.shape[0], float(np.trace(c1)))
        out += 2.0 * np.sum(x * np.diag(c2), axis=1)
        out += 3.0 * np.sum(x * x * np.diag(c3), axis=1)
        return out

    def jac(t, x):
        J = np.broadcast_to(c1, (x.shape[0], dim, dim)).copy()
        J += 2.0 * c2[None, :, :] * x[:, None, :]
        J += 3.0 * c3[None, :, :] * (x * x)[:, None, :]
        return J

    return VectorField(
        dim,
        val,
        div_fn=dv,
        jac_fn=jac,
        name="polynomial",
        params={"dim": dim, "seed": int(seed), "scale": scale},
    )


def _expm(A: np.ndarray) -> np.ndarray:
    from scipy.linalg import expm

    return expm(A)


def _linear_flow_maps(A: np.ndarray):
    def flow(s, t, x):
        return np.asarray(x, dtype=float) @ _expm((t - s) * A).T

    def inverse(s, t, x):
        return np.asarray(x, dtype=float) @ _expm(-(t - s) * A).T

    return flow, inverse


def _symmetric_linear_log_density(A: np.ndarray):
    """Closed-form log density for symmetric A: for the forward flow over
    [s, t], log K(x) = -tau tr A + x . (I - e^{-2 tau A}) x / 2."""

    def log_density(s, t, x):
        tau = t - s
        x = np.asarray(x, dtype=float)
        M = np.eye(A.shape[0]) - _expm(-2.0 * tau * A)
        return -tau * float(np.trace(A)) + 0.5 * np.sum((x @ M.T) * x, axis=1)

    return log_density


def _contraction_maps(dim: int, rate: float):
    def flow(s, t, x):
        return np.asarray(x, dtype=float) * math.exp(-rate * (t - s))

    def inverse(s, t, x):
        return np.asarray(x, dtype=float) * math.exp(rate * (t - s))

    def log_density(s, t, x):
        tau = t - s
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=1)
        return dim * rate * tau - 0.5 * r2 * (math.exp(2.0 * rate * tau) - 1.0)

    return flow, inverse, log_density


def _pulsed_exponent(s, t, amplitude):
    # integral of 1 + amplitude*sin(2 pi r) over [s, t]
    return (t - s) + amplitude * (math.cos(2 * math.pi * s) - math.cos(2 * math.pi * t)) / (
        2 * math.pi
    )


def _pulsed_maps(dim: int, amplitude: float):
    def flow(s, t, x):
        return np.asarray(x, dtype=float) * math.exp(-_pulsed_exponent(s, t, amplitude))

    def inverse(s, t, x):
        return np.asarray(x, dtype=float) * math.exp(_pulsed_exponent(s, t, amplitude))

    def log_density(s, t, x):
        a = _pulsed_exponent(s, t, amplitude)
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=1)
        return dim * a - 0.5 * r2 * (math.exp(2.0 * a) - 1.0)

    return flow, inverse, log_density


def _rotation_maps():
    def _rot(theta, x):
        c, s = math.cos(theta), math.sin(theta)
        R = np.array([[c, -s], [s, c]])
        return np.asarray(x, dtype=float) @ R.T

    def flow(s, t, x):
        return _rot(t - s, x)

    def inverse(s, t, x):
        return _rot(-(t - s), x)

    def log_density(s, t, x):
        return np.zeros(np.asarray(x).shape[0])

    return flow, inverse, log_density


def _build_library() -> dict[str, FieldLibraryEntry]:
    lib: dict[str, FieldLibraryEntry] = {}

    lib["zero"] = FieldLibraryEntry(
        "zero",
        _zero,
        defaults={"dim": 1},
        flow_map=lambda s, t, x: np.asarray(x, dtype=float).copy(),
        inverse_map=lambda s, t, x: np.asarray(x, dtype=float).copy(),
        log_density=lambda s, t, x: np.zeros(np.asarray(x).shape[0]),
    )

    def _constant_flow(s, t, x, c):
        return np.asarray(x, dtype=float) + (t - s) * np.asarray(c)

    def _constant_logK(s, t, x, c):
        c = np.asarray(c, dtype=float)
        tau = t - s
        return tau * (np.asarray(x, dtype=float) @ c) - 0.5 * tau * tau * float(c @ c)

    lib["constant"] = FieldLibraryEntry(
        "constant",
        _constant,
        defaults={"c": [1.0]},
        flow_map=lambda s, t, x, c=(1.0,): _constant_flow(s, t, x, c),
        inverse_map=lambda s, t, x, c=(1.0,): _constant_flow(t, s, x, c),
        log_density=lambda s, t, x, c=(1.0,): _constant_logK(s, t, x, c),
    )

    lib["linear-contraction"] = FieldLibraryEntry(
        "linear-contraction",
        _linear_contraction,
        defaults={"dim": 1, "rate": 1.0},
        notes="analytic maps depend on (dim, rate); see library_entry()",
    )

    lib["linear"] = FieldLibraryEntry(
        "linear",
        _linear,
        defaults={"matrix": [[-1.0]]},
        notes="analytic maps built from the matrix; see library_entry()",
    )

    rf, ri, rd = _rotation_maps()
    lib["rotation"] = FieldLibraryEntry(
        "rotation", lambda: _rotation(), flow_map=rf, inverse_map=ri, log_density=rd
    )

    lib["pulsed-contraction"] = FieldLibraryEntry(
        "pulsed-contraction",
        _pulsed_contraction,
        defaults={"dim": 1, "amplitude": 0.5},
        notes="analytic maps depend on (dim, amplitude); see library_entry()",
    )

    lib["blowup"] = FieldLibraryEntry(
        "blowup",
        _blowup,
        defaults={"strength": 1.0},
        notes="no closed-form flow; divergence in ExpLog(1) minus ExpLog(0)",
    )

    lib["cubic"] = FieldLibraryEntry(
        "cubic",
        _cubic,
        defaults={"coeff": 1.0},
        notes="finite-time trajectory blow-up from large seeds; failure-path tests",
    )

    lib["polynomial"] = FieldLibraryEntry(
        "polynomial", _polynomial, defaults={"dim": 1, "seed": 0, "scale": 0.2}
    )

    return lib


FIELD_LIBRARY = _build_library()


def make_field(name: str, **params) -> VectorField:
    """Construct a library field by name with keyword parameters."""
    if name not in FIELD_LIBRARY:
        raise KeyError(f"unknown field {name!r}; known: {sorted(FIELD_LIBRARY)}")
    entry = FIELD_LIBRARY[name]
    kwargs = {**entry.defaults, **params}
    return entry.make(**kwargs)


def library_entry(name: str, **params) -> FieldLibraryEntry:
    """Library entry with analytic maps specialized to the given parameters."""
    base = FIELD_LIBRARY[name]
    kwargs = {**base.defaults, **params}
    if name == "linear-contraction":
        dim, rate = int(kwargs["dim"]), float(kwargs["rate"])
        fl, inv, ld = _contraction_maps(dim, rate)
        return FieldLibraryEntry(name, base.make, kwargs, fl, inv, ld)
    if name == "pulsed-contraction":
        dim, amp = int(kwargs["dim"]), float(kwargs["amplitude"])
        fl, inv, ld = _pulsed_maps(dim, amp)
        return FieldLibraryEntry(name, base.make, kwargs, fl, inv, ld)
    if name == "linear":
        A = np.asarray(kwargs["matrix"], dtype=float)
        if A.ndim == 1:
            n = int(math.isqrt(A.size))
            A = A.reshape(n, n)
        fl, inv = _linear_flow_maps(A)
        ld = _symmetric_linear_log_density(A) if np.allclose(A, A.T) else None
        return FieldLibraryEntry(name, base.make, kwargs, fl, inv, ld)
    if name == "constant":
        c = tuple(np.asarray(kwargs["c"], dtype=float))
        return FieldLibraryEntry(
            name,
            base.make,
            kwargs,
            lambda s, t, x: base.flow_map(s, t, x, c),
            lambda s, t, x: base.inverse_map(s, t, x, c),
            lambda s, t, x: base.log_density(s, t, x, c),
        )
    return FieldLibraryEntry(
        name, base.make, kwargs, base.flow_map, base.inverse_map, base.log_density
    )
