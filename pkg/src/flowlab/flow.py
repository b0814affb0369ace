"""Forward and backward flow maps by adaptive embedded Runge-Kutta.

The ODE is integrated with the Dormand-Prince 5(4) pair, batched over
particles (each particle has its own adaptive step size, PI-controlled).
The state is augmented with a scalar accumulator A satisfying
A'(r) = div_mu b(r, X(r)), integrated by the same stepper and included in
the error control: the accumulator is the log of the pushforward density
and must share the error budget.

Conventions:
  * forward bundles start at time s from the seeds and record states
    X(s, c, x) at the requested checkpoint times c, with
    div_accum(c) = integral of div_mu b from s to c along the path;
  * backward bundles start at time t and record X~(c, t, x), with
    div_accum(c) = integral from t down to c (so the value at c = s equals
    minus the integral from s to t, i.e. log K_{s,t} directly).

Particles whose position norm exceeds 1e8 are marked blown_up and frozen;
step-size underflow marks tolerance_failure.  A bundle never aborts.
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import VectorField

__all__ = [
    "TimeInterval",
    "TrajectoryBundle",
    "STATUS_OK",
    "STATUS_BLOWN_UP",
    "STATUS_TOLERANCE_FAILURE",
    "integrate_forward",
    "integrate_backward",
    "check_inverse_identity",
    "check_semigroup",
    "check_ode_residual",
    "distance_in_measure",
    "save_bundle",
    "load_bundle",
]

STATUS_OK = 0
STATUS_BLOWN_UP = 1
STATUS_TOLERANCE_FAILURE = 2
STATUS_NAMES = {0: "ok", 1: "blown_up", 2: "tolerance_failure"}
STATUS_CODES = {v: k for k, v in STATUS_NAMES.items()}

BLOWUP_RADIUS = 1e8
MAX_ROUNDS = 200_000


@dataclass(frozen=True)
class TimeInterval:
    """Ordered pair of times 0 <= s <= t."""

    s: float
    t: float

    def __post_init__(self):
        if not (0.0 <= self.s <= self.t):
            raise ValueError(f"need 0 <= s <= t, got s={self.s}, t={self.t}")

    @property
    def tau(self) -> float:
        return self.t - self.s

    def describe(self) -> dict:
        return {"s": self.s, "t": self.t}


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# dense-output coefficients (order-4 interpolant with O(h^5) error)
_D = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)


@dataclass
class TrajectoryBundle:
    """Checkpointed particle trajectories with divergence accumulators."""

    direction: str  # "forward" | "backward"
    interval: TimeInterval
    seeds: np.ndarray  # (N, dim)
    checkpoint_times: np.ndarray  # (C,) ascending, within [s, t]
    positions: np.ndarray  # (N, C, dim)
    div_accum: np.ndarray  # (N, C)
    status: np.ndarray  # (N,) int codes
    tol: float
    field_desc: dict
    stats: dict = dc_field(default_factory=dict)
    steps: list | None = None  # per-particle dense step records (store_steps)

    @property
    def n_particles(self) -> int:
        return self.seeds.shape[0]

    @property
    def dim(self) -> int:
        return self.seeds.shape[1]

    @property
    def ok(self) -> np.ndarray:
        return self.status == STATUS_OK

    @property
    def final_positions(self) -> np.ndarray:
        idx = -1 if self.direction == "forward" else 0
        return self.positions[:, idx, :]

    @property
    def final_div_accum(self) -> np.ndarray:
        idx = -1 if self.direction == "forward" else 0
        return self.div_accum[:, idx]

    def status_names(self) -> list[str]:
        return [STATUS_NAMES[int(s)] for s in self.status]


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("FLOWLAB_THREADS", "1")))
    except ValueError:
        return 1


def _dense_eval(rcont: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Evaluate the dense interpolant at thetas in [0, 1]; rcont shape (5, m)."""
    r1, r2, r3, r4, r5 = rcont
    th = np.asarray(theta, dtype=float)[:, None]
    return r1 + th * (r2 + (1.0 - th) * (r3 + th * (r4 + (1.0 - th) * r5)))


def _integrate_batch(
    field: VectorField,
    t_start: float,
    t_stop: float,
    x0: np.ndarray,
    tol: float,
    stops: np.ndarray,
    store_steps: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict, list | None]:
    """Batched DOPRI5 from t_start to t_stop, landing exactly on each stop.

    stops are strictly monotone in the direction of integration and end at
    t_stop.  Returns (positions (N,C,dim), accum (N,C), status (N,), stats,
    step records or None).
    """
    N, dim = x0.shape
    m = dim + 1
    C = len(stops)
    span = abs(t_stop - t_start)
    sign = 1.0 if t_stop >= t_start else -1.0
    if span == 0.0:
        pos = np.repeat(x0[:, None, :], C, axis=1)
        acc = np.zeros((N, C))
        return pos, acc, np.zeros(N, dtype=np.int64), {"steps": 0, "rejected": 0, "rhs_evals": 0}, (
            [[] for _ in range(N)] if store_steps else None
        )

    def rhs(tv, Y):
        x = Y[:, :dim]
        out = np.empty_like(Y)
        out[:, :dim] = field._value(tv, x)
        out[:, dim] = field.div_mu(tv, x)
        return out

    if store_steps and N > 20_000:
        raise ValueError("store_steps is meant for small bundles (N <= 20000)")

    y = np.concatenate([x0, np.zeros((N, 1))], axis=1)
    t = np.full(N, t_start)
    h = np.full(N, sign * span / 100.0)
    err_prev = np.ones(N)
    status = np.zeros(N, dtype=np.int64)
    done = np.zeros(N, dtype=bool)
    next_cp = np.zeros(N, dtype=np.int64)
    out_pos = np.zeros((N, C, dim))
    out_acc = np.zeros((N, C))
    k1 = rhs(t, y)
    cap = 0.1 / (1.0 + field.jac_norm(t, y[:, :dim]))
    steps_rec = [[] for _ in range(N)] if store_steps else None
    n_steps = n_rej = 0
    n_evals = N
    tiny = 1e-13 * span + 1e-15 * (abs(t_start) + abs(t_stop) + 1.0)

    def freeze(which, code):
        status[which] = code
        done[which] = True
        for i in np.atleast_1d(which):
            j = next_cp[i]
            out_pos[i, j:, :] = y[i, :dim]
            out_acc[i, j:] = y[i, dim]

    rounds = 0
    while not np.all(done):
        rounds += 1
        if rounds > MAX_ROUNDS:
            freeze(np.flatnonzero(~done), STATUS_TOLERANCE_FAILURE)
            break
        idx = np.flatnonzero(~done)
        ti = t[idx]
        yi = y[idx]
        hi = np.abs(h[idx])
        # Lipschitz cap, then stretch-to-fit onto the next stop: when the
        # remaining gap is within 20% of the step, take the gap exactly
        target = stops[np.minimum(next_cp[idx], C - 1)]
        remaining = np.maximum((target - ti) * sign, 0.0)
        hi = np.minimum(hi, cap[idx])
        hi = np.where(remaining <= 1.2 * hi, remaining, hi)
        hi = sign * np.maximum(hi, tiny * 0.25)

        K = np.empty((7, len(idx), m))
        K[0] = k1[idx]
        bad = np.zeros(len(idx), dtype=bool)
        for j in range(1, 7):
            yj = yi + hi[:, None] * np.tensordot(_A[j], K[:j], axes=(0, 0))
            tj = ti + _C[j] * hi
            Kj = rhs(tj, yj)
            n_evals += len(idx)
            finite = np.all(np.isfinite(Kj), axis=1)
            bad |= ~finite
            Kj[~finite] = 0.0
            K[j] = Kj
        y_new = yi + hi[:, None] * np.tensordot(_A[6], K[:6], axes=(0, 0))
        err_vec = hi[:, None] * np.tensordot(_ERR, K, axes=(0, 0))
        scale = tol * (1.0 + np.maximum(np.abs(yi), np.abs(y_new)))
        with np.errstate(invalid="ignore"):
            err = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
        err = np.where(bad | ~np.isfinite(err), np.inf, err)

        accept = err <= 1.0
        with np.errstate(divide="ignore", over="ignore"):
            fac = 0.9 * err ** (-0.14) * err_prev[idx] ** 0.08
        fac = np.where(err == 0.0, 5.0, fac)
        fac = np.clip(np.nan_to_num(fac, nan=0.2, posinf=5.0), 0.2, 5.0)
        with np.errstate(divide="ignore", over="ignore"):
            shrink = np.clip(np.nan_to_num(0.9 * err ** (-0.2), nan=0.1), 0.1, 1.0)
        fac = np.where(accept, fac, shrink)

        n_steps += int(np.sum(accept))
        n_rej += int(np.sum(~accept))

        # rejected: shrink and retry (k1 unchanged)
        rej = idx[~accept]
        if len(rej):
            h[rej] = hi[~accept] * fac[~accept]
            under = rej[np.abs(h[rej]) < tiny]
            if len(under):
                freeze(under, STATUS_TOLERANCE_FAILURE)

        acc_mask = accept
        acc_idx = idx[acc_mask]
        if len(acc_idx) == 0:
            continue
        ya = y_new[acc_mask]
        ha = hi[acc_mask]
        ta = ti[acc_mask] + ha
        k7 = K[6][acc_mask]
        t[acc_idx] = ta
        y[acc_idx] = ya
        k1[acc_idx] = k7
        err_prev[acc_idx] = np.maximum(err[acc_mask], 1e-10)
        h[acc_idx] = ha * fac[acc_mask]
        cap[acc_idx] = 0.1 / (1.0 + field.jac_norm(ta, ya[:, :dim]))

        if store_steps:
            yi_acc = yi[acc_mask]
            Ka = K[:, acc_mask, :]
            delta = ya - yi_acc
            r3 = ha[:, None] * Ka[0] - delta
            r4 = delta - ha[:, None] * k7 - r3
            r5 = ha[:, None] * np.tensordot(_D, Ka, axes=(0, 0))
            ti_acc = ti[acc_mask]
            for row, i in enumerate(acc_idx):
                steps_rec[i].append(
                    (
                        float(ti_acc[row]),
                        float(ha[row]),
                        np.stack([yi_acc[row], delta[row], r3[row], r4[row], r5[row]]),
                    )
                )

        radius = np.sqrt(np.sum(ya[:, :dim] ** 2, axis=1))
        blown = (radius > BLOWUP_RADIUS) | ~np.isfinite(radius)
        if np.any(blown):
            freeze(acc_idx[blown], STATUS_BLOWN_UP)

        # checkpoint landings (stretch-to-fit makes them exact to roundoff)
        live = acc_idx[~blown]
        if len(live):
            at_stop = np.abs(stops[np.minimum(next_cp[live], C - 1)] - t[live]) <= tiny
            hit = live[at_stop]
            if len(hit):
                out_pos[hit, next_cp[hit], :] = y[hit, :dim]
                out_acc[hit, next_cp[hit]] = y[hit, dim]
                next_cp[hit] += 1
                finished = hit[next_cp[hit] == C]
                done[finished] = True

    stats = {"steps": n_steps, "rejected": n_rej, "rhs_evals": n_evals}
    return out_pos, out_acc, status, stats, steps_rec


def _run_batched(field, t_start, t_stop, seeds, tol, stops, store_steps):
    workers = _worker_count()
    n = seeds.shape[0]
    if workers == 1 or n < 2 * workers:
        return _integrate_batch(field, t_start, t_stop, seeds, tol, stops, store_steps)
    chunks = np.array_split(np.arange(n), workers)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        parts = list(
            ex.map(
                lambda ix: _integrate_batch(
                    field, t_start, t_stop, seeds[ix], tol, stops, store_steps
                ),
                chunks,
            )
        )
    pos = np.concatenate([p[0] for p in parts])
    acc = np.concatenate([p[1] for p in parts])
    stat = np.concatenate([p[2] for p in parts])
    stats = {
        k: int(sum(p[3][k] for p in parts)) for k in ("steps", "rejected", "rhs_evals")
    }
    steps = None
    if store_steps:
        steps = []
        for p in parts:
            steps.extend(p[4])
    return pos, acc, stat, stats, steps


def _prep(seeds, dim):
    seeds = np.asarray(seeds, dtype=float)
    if seeds.ndim == 1:
        seeds = seeds.reshape(-1, dim) if dim == 1 else seeds.reshape(1, -1)
    if seeds.ndim != 2 or seeds.shape[1] != dim:
        raise ValueError(f"seeds must have shape (N, {dim})")
    if not np.all(np.isfinite(seeds)):
        raise ValueError("seeds must be finite")
    return seeds


def _checkpoints(interval: TimeInterval, checkpoints, terminal: float) -> np.ndarray:
    if checkpoints is None:
        cps = np.array([terminal])
    else:
        cps = np.asarray(checkpoints, dtype=float)
        if np.any(cps < interval.s - 1e-12) or np.any(cps > interval.t + 1e-12):
            raise ValueError("checkpoints must lie within the interval")
        if np.any(np.diff(cps) <= 0):
            raise ValueError("checkpoints must be strictly increasing")
        if abs(cps[-1] - terminal) > 1e-12 and terminal == interval.t:
            cps = np.append(cps, terminal)
        if abs(cps[0] - terminal) > 1e-12 and terminal == interval.s:
            cps = np.insert(cps, 0, terminal)
    return cps


def integrate_forward(
    field: VectorField,
    interval: TimeInterval,
    seeds,
    tol: float,
    checkpoints=None,
    store_steps: bool = False,
) -> TrajectoryBundle:
    """Integrate dX/dr = b(r, X) from s to t with the divergence accumulator."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    seeds = _prep(seeds, field.dim)
    cps = _checkpoints(interval, checkpoints, interval.t)
    pos, acc, stat, stats, steps = _run_batched(
        field, interval.s, interval.t, seeds, tol, cps, store_steps
    )
    return TrajectoryBundle(
        "forward", interval, seeds, cps, pos, acc, stat, tol, field.describe(), stats, steps
    )


def integrate_backward(
    field: VectorField,
    interval: TimeInterval,
    seeds,
    tol: float,
    checkpoints=None,
    store_steps: bool = False,
) -> TrajectoryBundle:
    """Integrate the same ODE from t down to s: states X~(c, t, x).

    div_accum at checkpoint c is the signed integral of div_mu from t down
    to c, so at c = s it equals log K_{s,t} at the seed.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    seeds = _prep(seeds, field.dim)
    cps = _checkpoints(interval, checkpoints, interval.s)
    stops = cps[::-1].copy()  # integration visits checkpoints in reverse
    pos, acc, stat, stats, steps = _run_batched(
        field, interval.t, interval.s, seeds, tol, stops, store_steps
    )
    return TrajectoryBundle(
        "backward",
        interval,
        seeds,
        cps,
        pos[:, ::-1, :].copy(),
        acc[:, ::-1].copy(),
        stat,
        tol,
        field.describe(),
        stats,
        steps,
    )


def check_inverse_identity(field, interval, seeds, tol) -> dict:
    """Max error of X(s,t, X~(s,t,x)) = x and X~(s,t, X(s,t,x)) = x."""
    seeds = _prep(seeds, field.dim)
    fwd = integrate_forward(field, interval, seeds, tol)
    back = integrate_backward(field, interval, seeds, tol)
    back_of_fwd = integrate_backward(field, interval, fwd.final_positions, tol)
    fwd_of_back = integrate_forward(field, interval, back.final_positions, tol)
    ok = fwd.ok & back.ok & back_of_fwd.ok & fwd_of_back.ok
    errs = []
    for comp in (back_of_fwd.final_positions, fwd_of_back.final_positions):
        errs.append(np.sqrt(np.sum((comp - seeds) ** 2, axis=1)))
    err = np.maximum(*errs)
    return {
        "max_error": float(np.max(err[ok])) if np.any(ok) else math.nan,
        "excluded": int(np.sum(~ok)),
        "n": len(seeds),
    }


def check_semigroup(field, r: float, s: float, t: float, seeds, tol) -> dict:
    """Max error of X(s,t, X(r,s,x)) = X(r,t,x), and the backward analogue."""
    if not (0.0 <= r <= s <= t):
        raise ValueError("need 0 <= r <= s <= t")
    seeds = _prep(seeds, field.dim)
    leg1 = integrate_forward(field, TimeInterval(r, s), seeds, tol)
    leg2 = integrate_forward(field, TimeInterval(s, t), leg1.final_positions, tol)
    direct = integrate_forward(field, TimeInterval(r, t), seeds, tol)
    ok_f = leg1.ok & leg2.ok & direct.ok
    err_f = np.sqrt(
        np.sum((leg2.final_positions - direct.final_positions) ** 2, axis=1)
    )

    bleg1 = integrate_backward(field, TimeInterval(s, t), seeds, tol)
    bleg2 = integrate_backward(field, TimeInterval(r, s), bleg1.final_positions, tol)
    bdirect = integrate_backward(field, TimeInterval(r, t), seeds, tol)
    ok_b = bleg1.ok & bleg2.ok & bdirect.ok
    err_b = np.sqrt(
        np.sum((bleg2.final_positions - bdirect.final_positions) ** 2, axis=1)
    )
    return {
        "max_error_forward": float(np.max(err_f[ok_f])) if np.any(ok_f) else math.nan,
        "max_error_backward": float(np.max(err_b[ok_b])) if np.any(ok_b) else math.nan,
        "excluded": int(np.sum(~ok_f) + np.sum(~ok_b)),
        "n": len(seeds),
    }


_GL4_NODES = np.array(
    [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526]
)
_GL4_WEIGHTS = np.array(
    [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538]
)


def check_ode_residual(bundle: TrajectoryBundle, field: VectorField) -> dict:
    """Re-quadrature of the right-hand side along stored steps.

    For every ok particle and checkpoint c, compares the recorded
    displacement X(c) - x0 against a 4-point Gauss-Legendre quadrature of
    b(r, X(r)) per accepted step, with X(r) from the dense interpolant.
    Requires a bundle integrated with store_steps=True.
    """
    if bundle.steps is None:
        raise ValueError("bundle was not integrated with store_steps=True")
    dim = bundle.dim
    start_time = bundle.interval.s if bundle.direction == "forward" else bundle.interval.t
    worst = 0.0
    checked = 0
    order = (
        range(len(bundle.checkpoint_times))
        if bundle.direction == "forward"
        else range(len(bundle.checkpoint_times) - 1, -1, -1)
    )
    for i in range(bundle.n_particles):
        if bundle.status[i] != STATUS_OK:
            continue
        quad = np.zeros(dim)
        seg = 0
        segments = bundle.steps[i]
        for j in order:
            c = bundle.checkpoint_times[j]
            while seg < len(segments):
                t0, hstep, rcont = segments[seg]
                t1 = t0 + hstep
                past = t1 - c > 1e-12 if hstep > 0 else c - t1 > 1e-12
                if past:
                    break
                theta = 0.5 * (_GL4_NODES + 1.0)
                ts = t0 + theta * hstep
                states = _dense_eval(rcont, theta)
                vel = field.eval(ts, states[:, :dim])
                quad += 0.5 * hstep * (_GL4_WEIGHTS @ vel)
                seg += 1
            disp = bundle.positions[i, j] - bundle.seeds[i]
            worst = max(worst, float(np.max(np.abs(disp - quad))))
            checked += 1
    return {"max_residual": worst, "checked": checked}


def distance_in_measure(
    bundle_a: TrajectoryBundle,
    bundle_b: TrajectoryBundle,
    gamma: float,
    product_measure: bool = False,
) -> float:
    """Fraction of seeds whose trajectories differ by more than gamma.

    Default: fraction over seeds of sup-over-checkpoints |X_A - X_B| > gamma.
    product_measure=True: fraction over (checkpoint, seed) pairs instead.
    Particles not ok in either bundle count as exceeding (conservative).
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if not np.array_equal(bundle_a.seeds, bundle_b.seeds):
        raise ValueError("bundles must share identical seed lists")
    if not np.array_equal(bundle_a.checkpoint_times, bundle_b.checkpoint_times):
        raise ValueError("bundles must share identical checkpoint times")
    diff = np.sqrt(np.sum((bundle_a.positions - bundle_b.positions) ** 2, axis=2))
    bad = ~(bundle_a.ok & bundle_b.ok)
    if product_measure:
        exceed = diff > gamma
        exceed[bad, :] = True
        return float(np.mean(exceed))
    exceed = np.max(diff, axis=1) > gamma
    exceed[bad] = True
    return float(np.mean(exceed))


def save_bundle(bundle: TrajectoryBundle, path: str, seed: int | None = None) -> None:
    """Write the documented columnar form: comment header, then CSV rows.

    Header: field name, params, interval, tol, seed; one extra row per
    particle at the start time carries the seed point (div_accum 0).
    """
    buf = io.StringIO()
    header = {
        "field": bundle.field_desc.get("name"),
        "params": bundle.field_desc.get("params", {}),
        "direction": bundle.direction,
        "s": bundle.interval.s,
        "t": bundle.interval.t,
        "tol": bundle.tol,
        "seed": seed,
    }
    start_time = bundle.interval.s if bundle.direction == "forward" else bundle.interval.t
    buf.write("# flowlab-bundle v1\n")
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    coords = ",".join(f"x{k}" for k in range(bundle.dim))
    buf.write(f"particle,checkpoint_time,{coords},div_accum,status\n")
    write_start = not np.any(np.abs(bundle.checkpoint_times - start_time) <= 1e-15)
    for i in range(bundle.n_particles):
        name = STATUS_NAMES[int(bundle.status[i])]
        if write_start:
            xs = ",".join(repr(float(v)) for v in bundle.seeds[i])
            buf.write(f"{i},{start_time!r},{xs},0.0,{name}\n")
        for j, c in enumerate(bundle.checkpoint_times):
            xs = ",".join(repr(float(v)) for v in bundle.positions[i, j])
            buf.write(f"{i},{float(c)!r},{xs},{float(bundle.div_accum[i, j])!r},{name}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(buf.getvalue())


def load_bundle(path: str) -> TrajectoryBundle:
    """Read a bundle file back; checkpoint times include the start time."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != "# flowlab-bundle v1":
        raise ValueError("not a flowlab bundle file")
    header = json.loads(lines[1][2:])
    cols = lines[2].split(",")
    dim = sum(1 for c in cols if c.startswith("x"))
    rows = [ln.split(",") for ln in lines[3:] if ln]
    n = max(int(r[0]) for r in rows) + 1
    times = sorted({float(r[1]) for r in rows})
    cmap = {tm: j for j, tm in enumerate(times)}
    pos = np.zeros((n, len(times), dim))
    acc = np.zeros((n, len(times)))
    stat = np.zeros(n, dtype=np.int64)
    for r in rows:
        i, j = int(r[0]), cmap[float(r[1])]
        pos[i, j] = [float(v) for v in r[2 : 2 + dim]]
        acc[i, j] = float(r[2 + dim])
        stat[i] = STATUS_CODES[r[2 + dim + 1]]
    interval = TimeInterval(header["s"], header["t"])
    seeds = (
        pos[:, 0, :].copy() if header["direction"] == "forward" else pos[:, -1, :].copy()
    )
    return TrajectoryBundle(
        header["direction"],
        interval,
        seeds,
        np.array(times),
        pos,
        acc,
        stat,
        header["tol"],
        {"name": header["field"], "params": header["params"]},
    )
