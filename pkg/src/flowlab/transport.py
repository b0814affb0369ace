"""Transport solutions by characteristics and quantitative stability checks.

The Cauchy problem du/dt + b . grad u = 0 is solved along characteristics:
with datum u0 at time 0, u(t, x) = u0(X~(0, t, x)); with datum at t0,
u(s, x) = u0(X(s, t0, x)).  The weak formulation against the Gaussian
measure reads, for a smooth test function phi supported in [0, T) x R^n,

    - int int u dphi/dt dmu dt - int u0 phi(0,.) dmu
    - int int u (phi div_mu b + b . grad phi) dmu dt  =  0,

which is checked by Simpson-in-time x mu-scheme-in-space quadrature.

The quantitative stability checks compare iterated logarithms of initial
and transported masses of a small set E.  Set masses live in log-space
throughout: the applicability conditions demand masses far below linear
float range, and the transported mass is obtained by exact density
transport (quadrature of K~ over E) rather than sample counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .gaussian import (
    STATE_INAPPLICABLE,
    STATE_OK,
    ExpectationScheme,
    GaussianMeasure,
    NormEstimate,
    sample,
)
from .fields import VectorField, beta_time_integral
from .flow import (
    STATUS_OK,
    TimeInterval,
    integrate_backward,
    integrate_forward,
)

__all__ = [
    "TransportSolution",
    "solve_characteristics",
    "SpaceTimeTestFunction",
    "gaussian_bump_test",
    "default_test_functions",
    "weak_residual",
    "weak_residual_lebesgue",
    "IntervalSet",
    "transported_set_log_mass",
    "stability_triple_log_check",
    "stability_double_log_check",
]

# L-infinity bound of the indicator data in the stability checks
M_BOUND = 1.0


class TransportSolution:
    """Lagrangian solution of the transport equation.

    orientation "forward-cauchy": datum at time 0, solution on [0, T];
    orientation "backward-cauchy": datum at datum_time, solution for s <= t0.
    Each evaluation integrates one characteristic per point at tolerance tol.
    """

    def __init__(self, field, u0, orientation, tol, datum_time, evaluator=None):
        if orientation not in ("forward-cauchy", "backward-cauchy"):
            raise ValueError(f"unknown orientation {orientation!r}")
        self.field = field
        self.u0 = u0
        self.orientation = orientation
        self.tol = tol
        self.datum_time = float(datum_time)
        self._evaluator = evaluator

    @classmethod
    def from_evaluator(cls, field, fn, orientation="forward-cauchy", datum_time=0.0):
        """Wrap an explicit candidate u(t, x); used for negative controls."""
        sol = cls(field, None, orientation, 0.0, datum_time, evaluator=fn)
        return sol

    def evaluate(self, tau: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x.reshape(1, -1) if single else x
        if self._evaluator is not None:
            vals = np.asarray(self._evaluator(tau, pts), dtype=float)
            return vals[0] if single else vals
        if self.orientation == "forward-cauchy":
            if tau < self.datum_time:
                raise ValueError("forward-cauchy solutions live at times >= 0")
            if tau == self.datum_time:
                vals = np.asarray(self.u0(pts), dtype=float)
            else:
                bundle = integrate_backward(
                    self.field, TimeInterval(self.datum_time, tau), pts, self.tol
                )
                if not np.all(bundle.ok):
                    raise RuntimeError("characteristic failure during evaluation")
                vals = np.asarray(self.u0(bundle.positions[:, 0, :]), dtype=float)
        else:
            if tau > self.datum_time:
                raise ValueError("backward-cauchy solutions live at times <= t0")
            if tau == self.datum_time:
                vals = np.asarray(self.u0(pts), dtype=float)
            else:
                bundle = integrate_forward(
                    self.field, TimeInterval(tau, self.datum_time), pts, self.tol
                )
                if not np.all(bundle.ok):
                    raise RuntimeError("characteristic failure during evaluation")
                vals = np.asarray(self.u0(bundle.final_positions), dtype=float)
        return vals[0] if single else vals


def solve_characteristics(
    field: VectorField,
    u0,
    orientation: str = "forward-cauchy",
    tol: float = 1e-9,
    datum_time: float = 0.0,
) -> TransportSolution:
    return TransportSolution(field, u0, orientation, tol, datum_time)


@dataclass
class SpaceTimeTestFunction:
    """Smooth space-time test function with time derivative and gradient."""

    value: callable  # (t, x) -> (N,)
    dt: callable
    grad: callable  # (t, x) -> (N, dim)
    name: str = "test"


def gaussian_bump_test(center, radius: float, horizon: float, power: int = 4):
    """Compactly supported space bump times a cos^power time cutoff.

    Space factor rho(x) = exp(1 - 1/(1 - |x-c|^2/R^2)) inside the ball of
    radius R around the center, zero outside; time factor
    theta(t) = cos^power(pi t / (2 T)) vanishes at t = T with zero slope.
    """
    c = np.atleast_1d(np.asarray(center, dtype=float))
    R2 = float(radius) ** 2
    T = float(horizon)

    def rho_and_grad(x):
        d = x - c
        q = np.sum(d * d, axis=1) / R2
        inside = q < 1.0
        rho = np.zeros(x.shape[0])
        grad = np.zeros_like(x)
        qi = np.where(inside, q, 0.0)
        with np.errstate(divide="ignore", over="ignore"):
            val = np.exp(1.0 - 1.0 / (1.0 - qi))
        rho[inside] = val[inside]
        coef = np.where(inside, -2.0 / R2 / (1.0 - qi) ** 2, 0.0)
        grad[inside] = (rho * coef)[inside, None] * d[inside]
        return rho, grad

    def theta(t):
        return np.cos(math.pi * t / (2.0 * T)) ** power

    def theta_dt(t):
        a = math.pi * t / (2.0 * T)
        return -power * np.cos(a) ** (power - 1) * np.sin(a) * math.pi / (2.0 * T)

    def value(t, x):
        return theta(t) * rho_and_grad(x)[0]

    def dt(t, x):
        return theta_dt(t) * rho_and_grad(x)[0]

    def grad(t, x):
        return theta(t) * rho_and_grad(x)[1]

    return SpaceTimeTestFunction(
        value, dt, grad, name=f"bump(c={c.tolist()},R={radius},p={power})"
    )


def default_test_functions(dim: int, horizon: float) -> list[SpaceTimeTestFunction]:
    """Three off-center bumps with different widths and time profiles."""
    base = np.zeros(dim)
    c1, c2, c3 = base.copy(), base.copy(), base.copy()
    c1[0] = 0.7
    c2[0] = -0.4
    if dim > 1:
        c2[1] = 0.8
    c3[0] = 0.2
    return [
        gaussian_bump_test(c1, 2.0, horizon, power=4),
        gaussian_bump_test(c2, 1.5, horizon, power=2),
        gaussian_bump_test(c3, 2.5, horizon, power=4),
    ]


def _simpson_weights(n_nodes: int, length: float) -> tuple[np.ndarray, np.ndarray]:
    if n_nodes % 2 == 0:
        n_nodes += 1
    ts = np.linspace(0.0, length, n_nodes)
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= length / (n_nodes - 1) / 3.0
    return ts, w


def _residual_on_nodes(sol, test_fn, field, ts, tw, pts):
    """Per-space-node contribution of the weak-form residual."""
    n = pts.shape[0]
    acc = np.zeros(n)
    for ti, wi in zip(ts, tw):
        u = sol.evaluate(float(ti), pts)
        phi_t = test_fn.dt(float(ti), pts)
        phi = test_fn.value(float(ti), pts)
        gphi = test_fn.grad(float(ti), pts)
        vel = field.eval(float(ti), pts)
        dmu = field.div_mu(float(ti), pts)
        acc += wi * (-u * phi_t - u * (phi * dmu + np.sum(vel * gphi, axis=1)))
    acc += -sol.evaluate(0.0, pts) * test_fn.value(0.0, pts)
    return acc


def weak_residual(
    sol: TransportSolution,
    test_fn: SpaceTimeTestFunction,
    scheme: ExpectationScheme,
    horizon: float,
    time_nodes: int = 17,
) -> NormEstimate:
    """Gaussian weak-form residual; zero within error bars for true solutions.

    Error bar combines the space-scheme uncertainty with a time-resolution
    term (Simpson at full versus half node count).
    """
    field = sol.field
    m = GaussianMeasure(field.dim)
    pts, w = scheme.nodes(m)
    ts, tw = _simpson_weights(time_nodes, horizon)
    per_node = _residual_on_nodes(sol, test_fn, field, ts, tw, pts)
    value = float(w @ per_node)
    if scheme.is_quadrature:
        pts2, w2 = ExpectationScheme.gauss_hermite(scheme.level + 1).nodes(m)
        per2 = _residual_on_nodes(sol, test_fn, field, ts, tw, pts2)
        space_err = abs(float(w2 @ per2) - value)
    else:
        n = len(per_node)
        space_err = 3.0 * float(np.std(per_node, ddof=1)) / math.sqrt(n)
    ts_half, tw_half = _simpson_weights((time_nodes - 1) // 2 + 1, horizon)
    per_half = _residual_on_nodes(sol, test_fn, field, ts_half, tw_half, pts)
    time_err = abs(float(w @ per_half) - value)
    return NormEstimate(value, space_err + time_err + 1e-12, scheme)


def weak_residual_lebesgue(
    sol: TransportSolution,
    test_fn: SpaceTimeTestFunction,
    box_lo,
    box_hi,
    horizon: float,
    n_gl: int = 48,
    time_nodes: int = 17,
) -> float:
    """Lebesgue weak-form residual over the test function's support box.

    Independent quadrature path (tensor Gauss-Legendre in space against
    Lebesgue measure, divergence instead of Gaussian divergence): for
    bounded solutions the Gaussian and Lebesgue forms vanish together.
    """
    field = sol.field
    lo = np.atleast_1d(np.asarray(box_lo, dtype=float))
    hi = np.atleast_1d(np.asarray(box_hi, dtype=float))
    gl_x, gl_w = np.polynomial.legendre.leggauss(n_gl)
    axes_pts, axes_w = [], []
    for d in range(field.dim):
        mid, half = 0.5 * (lo[d] + hi[d]), 0.5 * (hi[d] - lo[d])
        axes_pts.append(mid + half * gl_x)
        axes_w.append(half * gl_w)
    grids = np.meshgrid(*axes_pts, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = axes_w[0]
    for nxt in axes_w[1:]:
        w = np.multiply.outer(w, nxt)
    w = w.ravel()

    ts, tw = _simpson_weights(time_nodes, horizon)
    acc = np.zeros(pts.shape[0])
    for ti, wi in zip(ts, tw):
        u = sol.evaluate(float(ti), pts)
        phi_t = test_fn.dt(float(ti), pts)
        phi = test_fn.value(float(ti), pts)
        gphi = test_fn.grad(float(ti), pts)
        vel = field.eval(float(ti), pts)
        div = field.div(float(ti), pts)
        acc += wi * (-u * phi_t - u * (phi * div + np.sum(vel * gphi, axis=1)))
    acc += -sol.evaluate(0.0, pts) * test_fn.value(0.0, pts)
    return float(w @ acc)


@dataclass(frozen=True)
class IntervalSet:
    """Axis-aligned box, the initial set of the stability checks."""

    lo: tuple
    hi: tuple

    @staticmethod
    def of(lo, hi) -> "IntervalSet":
        lo = tuple(float(v) for v in np.atleast_1d(lo))
        hi = tuple(float(v) for v in np.atleast_1d(hi))
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("need lo < hi per axis")
        return IntervalSet(lo, hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def indicator(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.ones(x.shape[0], dtype=bool)
        for d in range(self.dim):
            inside &= (x[:, d] > self.lo[d]) & (x[:, d] <= self.hi[d])
        return inside.astype(float)

    def log_mu_mass(self) -> float:
        """log of the Gaussian mass, stable arbitrarily deep in the tail."""
        total = 0.0
        for a, b in zip(self.lo, self.hi):
            total += _log_interval_mass(a, b)
        return total

    def describe(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


def _log_interval_mass(a: float, b: float) -> float:
    if a >= 0.0:
        la, lb = log_ndtr(-a), log_ndtr(-b)
        return la + math.log1p(-math.exp(lb - la))
    if b <= 0.0:
        return _log_interval_mass(-b, -a)
    return math.log(ndtr(b) - ndtr(a))


def transported_set_log_mass(
    field: VectorField,
    interval: TimeInterval,
    E: IntervalSet,
    tol: float,
    n_gl: int = 24,
) -> float:
    """log of integral over E of K~_{s,t} dmu: the transported mass of E.

    The transported solution u(t, x) = indicator_E(X~(s,t,x)) has
    L^1(mu)-mass equal to the K~-weighted mass of E; quadrature of the
    forward accumulator over E keeps everything in log-space.
    """
    gl_x, gl_w = np.polynomial.legendre.leggauss(n_gl)
    axes_pts, axes_logw = [], []
    for d in range(E.dim):
        mid = 0.5 * (E.lo[d] + E.hi[d])
        half = 0.5 * (E.hi[d] - E.lo[d])
        axes_pts.append(mid + half * gl_x)
        axes_logw.append(np.log(half * gl_w))
    grids = np.meshgrid(*axes_pts, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    logw = axes_logw[0]
    for nxt in axes_logw[1:]:
        logw = np.add.outer(logw, nxt)
    logw = logw.ravel()

    bundle = integrate_forward(field, interval, pts, tol)
    if not np.all(bundle.ok):
        raise RuntimeError("characteristic failure while transporting the set")
    log_ktilde = bundle.div_accum[:, -1]
    log_gauss = -0.5 * np.sum(pts * pts, axis=1) - 0.5 * E.dim * math.log(2 * math.pi)
    contrib = log_ktilde + log_gauss + logw
    mx = float(np.max(contrib))
    return mx + math.log(float(np.sum(np.exp(contrib - mx))))


def _lll(w: float) -> float:
    """logloglog(1/eps) from L = log eps: returns ln(ln(-L))."""
    return math.log(math.log(-w))


def stability_triple_log_check(
    field: VectorField,
    interval: TimeInterval,
    E: IntervalSet,
    p: float,
    m: GaussianMeasure,
    scheme: ExpectationScheme,
    tol: float = 1e-8,
    mc_cross_check: int | None = None,
) -> dict:
    """Triple-log mass stability for subexponentially integrable divergence.

    With u0 the indicator of E, compares logloglog(1/m0) and
    logloglog(1/mT) for m0 = mu(E), mT the transported mass; the budget is
    16e times the time integral of the ExpLog(1) divergence norm.  The
    applicability condition on eps = m0 (with sup bound M = 1) is checked in
    log-space; violations give the inapplicable state, not a failure.
    """
    integral, _ = beta_time_integral(
        field, (interval.s, interval.t), 1.0, m, scheme, tol=None
    )
    log_m0 = E.log_mu_mass()
    report = {
        "kind": "triple-log",
        "p": p,
        "log_mass_0": log_m0,
        "beta_integral": integral,
        "interval": interval.describe(),
        "set": E.describe(),
    }
    if not math.isfinite(integral):
        report.update(state=STATE_INAPPLICABLE, reason="beta unbounded")
        return report
    # eps < (1/2) exp(-e^{e+M})  and  logloglog(1/eps) > lnln(e^{e+M}+ln2) + 32e*I
    eps_cap = -math.log(2.0) - math.exp(math.e + M_BOUND)
    lll_floor = (
        math.log(math.log(math.exp(math.e + M_BOUND) + math.log(2.0)))
        + 32.0 * math.e * integral
    )
    if log_m0 >= eps_cap or _lll(log_m0) <= lll_floor:
        report.update(
            state=STATE_INAPPLICABLE,
            reason="eps-condition violated",
            eps_cap_log=eps_cap,
            lll_required=lll_floor,
            lll_actual=_lll(log_m0) if log_m0 < -math.e else None,
        )
        return report

    log_mT = transported_set_log_mass(field, interval, E, tol)
    # a second rule at doubled node count to bound the quadrature error
    log_mT2 = transported_set_log_mass(field, interval, E, tol, n_gl=48)
    lhs_gap = abs(_lll(log_mT) - _lll(log_m0))
    budget = 16.0 * math.e * integral
    allowance = abs(_lll(log_mT2) - _lll(log_mT)) + 1e-9
    report.update(
        state=STATE_OK,
        log_mass_T=log_mT,
        lhs_gap=lhs_gap,
        budget=budget,
        allowance=allowance,
        holds=lhs_gap <= budget + allowance,
        slack_ratio=lhs_gap / budget if budget > 0 else 0.0,
    )
    if mc_cross_check:
        pts = sample(m, mc_cross_check, scheme.seed)
        bundle = integrate_backward(field, interval, pts, tol)
        hits = E.indicator(bundle.positions[:, 0, :])[bundle.ok]
        report["mc_mass_T"] = float(np.mean(hits))
        report["mc_samples"] = mc_cross_check
    return report


def stability_double_log_check(
    field: VectorField,
    interval: TimeInterval,
    E: IntervalSet,
    p: float,
    m: GaussianMeasure,
    scheme: ExpectationScheme,
    tol: float = 1e-8,
) -> dict:
    """Double-log mass stability for exponentially integrable divergence.

    As the triple-log check with two logs, beta against ExpLog(0), budget
    4 * integral of beta.  Fields whose ExpLog(0) norm is unbounded are
    reported inapplicable.
    """
    integral, _ = beta_time_integral(
        field, (interval.s, interval.t), 0.0, m, scheme, tol=None
    )
    log_m0 = E.log_mu_mass()
    report = {
        "kind": "double-log",
        "p": p,
        "log_mass_0": log_m0,
        "beta_integral": integral,
        "interval": interval.describe(),
        "set": E.describe(),
    }
    if not math.isfinite(integral):
        report.update(state=STATE_INAPPLICABLE, reason="ExpLog(0) norm unbounded")
        return report
    # eps < 1/e  and  loglog(1/eps) > lnln(2(e+M)) + 8*I
    ll_floor = math.log(math.log(2.0 * (math.e + M_BOUND))) + 8.0 * integral
    if log_m0 >= -1.0 or math.log(-log_m0) <= ll_floor:
        report.update(
            state=STATE_INAPPLICABLE,
            reason="eps-condition violated",
            ll_required=ll_floor,
            ll_actual=math.log(-log_m0) if log_m0 < -1.0 else None,
        )
        return report

    log_mT = transported_set_log_mass(field, interval, E, tol)
    log_mT2 = transported_set_log_mass(field, interval, E, tol, n_gl=48)
    lhs_gap = abs(math.log(-log_mT) - math.log(-log_m0))
    budget = 4.0 * integral
    allowance = abs(math.log(-log_mT2) - math.log(-log_mT)) + 1e-9
    report.update(
        state=STATE_OK,
        log_mass_T=log_mT,
        lhs_gap=lhs_gap,
        budget=budget,
        allowance=allowance,
        holds=lhs_gap <= budget + allowance,
        slack_ratio=lhs_gap / budget if budget > 0 else 0.0,
    )
    return report
