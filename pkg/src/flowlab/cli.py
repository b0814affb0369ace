"""Command-line surface of the laboratory.

Subcommands: norms, field-check, flow, density, transport, mollify,
stability, lebesgue, report.  Each reads a JSON config (--config), applies
flag overrides, and writes two files: <output>.csv (comma-separated,
header row, UTF-8, LF) and <output>.jsonl (one JSON object per line, the
first being the fully resolved config).  Exit codes: 0 success, 1 config
or usage error, 2 numerical failure state.
"""

from __future__ import annotations

import argparse
import glob
import io
import json
import math
import os
import sys

import numpy as np

from .gaussian import ExpectationScheme, GaussianMeasure, sample
from .orlicz import ExpLog
from .fields import (
    beta_norm,
    beta_time_integral,
    growth_norm,
    library_entry,
    make_field,
    ou_divergence_identity_check,
)
from .flow import TimeInterval, integrate_forward, save_bundle
from .density import (
    ALPHA_CONSTANTS,
    alpha_threshold,
    density_exact,
    mass_check,
    phi_alpha_modular,
)
from .transport import (
    IntervalSet,
    default_test_functions,
    solve_characteristics,
    stability_double_log_check,
    stability_triple_log_check,
    weak_residual,
)
from .studies import (
    run_lebesgue_quasi_invariance,
    run_mollification_study,
    run_stability_study,
)
from .config import ExperimentConfig, jsonable

__all__ = ["cli", "main"]

SUBCOMMANDS = [
    "norms",
    "field-check",
    "flow",
    "density",
    "transport",
    "mollify",
    "stability",
    "lebesgue",
    "report",
]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _write_outputs(cfg: ExperimentConfig, rows: list[dict], records: list[dict]):
    out = cfg.output
    d = os.path.dirname(out)
    if d:
        os.makedirs(d, exist_ok=True)
    # columnar file: stable column order from the union of row keys
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for r in rows:
        cells = []
        for c in cols:
            v = jsonable(r.get(c, ""))
            if isinstance(v, float):
                cells.append(repr(v))
            elif isinstance(v, (dict, list)):
                cells.append(json.dumps(v, sort_keys=True).replace(",", ";"))
            else:
                cells.append(str(v))
        buf.write(",".join(cells) + "\n")
    with open(out + ".csv", "w", encoding="utf-8", newline="\n") as f:
        f.write(buf.getvalue())
    with open(out + ".jsonl", "w", encoding="utf-8", newline="\n") as f:
        f.write(
            json.dumps({"record": "config", "config": jsonable(cfg.__dict__)}, sort_keys=True)
            + "\n"
        )
        for rec in records:
            f.write(json.dumps(jsonable(rec), sort_keys=True) + "\n")


def _field_and_interval(cfg: ExperimentConfig):
    fld = make_field(cfg.field, **cfg.field_params)
    interval = TimeInterval(float(cfg.interval[0]), float(cfg.interval[1]))
    return fld, interval


def _seed_points(cfg: ExperimentConfig, fld) -> np.ndarray:
    pts = cfg.extras.get("seed_points")
    if pts is not None:
        return np.asarray(pts, dtype=float).reshape(-1, fld.dim)
    m = GaussianMeasure(fld.dim)
    return sample(m, cfg.n_particles, cfg.seed)


def _cmd_norms(cfg: ExperimentConfig) -> int:
    fld, interval = _field_and_interval(cfg)
    m = GaussianMeasure(fld.dim)
    scheme = cfg.scheme_object()
    rows, records = [], []
    g = growth_norm(fld, interval.s, scheme)
    rows.append({"quantity": "growth_norm", "value": g.value, "abs_error": g.abs_error, "state": g.state})
    for gamma in (1.0, 0.0):
        b = beta_norm(fld, interval.s, gamma, m, scheme)
        rows.append(
            {
                "quantity": f"beta_norm_gamma={gamma}",
                "value": b.value,
                "abs_error": b.abs_error,
                "state": b.state,
            }
        )
        integral, _ = beta_time_integral(
            fld, (interval.s, interval.t), gamma, m, scheme
        )
        rows.append(
            {
                "quantity": f"beta_integral_gamma={gamma}",
                "value": integral,
                "abs_error": 0.0,
                "state": "ok" if math.isfinite(integral) else "unbounded",
            }
        )
    for name in sorted(ALPHA_CONSTANTS):
        val, det = alpha_threshold(fld, interval, name, m, scheme, details=True)
        rows.append(
            {
                "quantity": f"alpha_threshold_{name}",
                "value": val,
                "abs_error": 0.0,
                "state": "ok",
            }
        )
        records.append({"record": "alpha_threshold", **det})
    records.extend({"record": "norm", **r} for r in rows)
    _write_outputs(cfg, rows, records)
    return 0


def _cmd_field_check(cfg: ExperimentConfig) -> int:
    fld, interval = _field_and_interval(cfg)
    rng = np.random.default_rng(cfg.seed)
    pts = rng.standard_normal((100, fld.dim)) * 1.5
    ts = rng.uniform(interval.s, interval.t, size=100)
    rows = []
    failure = False

    if fld._div is not None:
        worst = 0.0
        for k in range(0, 100, 10):
            tk = float(ts[k])
            batch = pts[k : k + 10]
            ana = fld.div(tk, batch)
            fd = fld._fd_div(tk, batch)
            worst = max(worst, float(np.max(np.abs(ana - fd))))
        ok = worst < 1e-4
        failure |= not ok
        rows.append({"check": "analytic_vs_fd_divergence", "max_error": worst, "ok": ok})

    entry = library_entry(cfg.field, **cfg.field_params)
    if entry.flow_map is not None:
        h = 1e-5
        worst = 0.0
        for k in range(10):
            t0 = float(rng.uniform(interval.s + 2 * h, interval.t - 2 * h))
            x0 = pts[k : k + 1]
            xt = entry.flow_map(interval.s, t0, x0)
            dplus = entry.flow_map(interval.s, t0 + h, x0)
            dminus = entry.flow_map(interval.s, t0 - h, x0)
            vel = (dplus - dminus) / (2 * h)
            worst = max(worst, float(np.max(np.abs(vel - fld.eval(t0, xt)))))
        ok = worst < 1e-8
        failure |= not ok
        rows.append({"check": "analytic_flow_ode_residual", "max_error": worst, "ok": ok})

    rep = ou_divergence_identity_check(fld, 0.3, interval.s, pts[:20])
    ok = rep["max_rel_error"] < 1e-4
    failure |= not ok
    rows.append({"check": "ou_divergence_identity", "max_error": rep["max_rel_error"], "ok": ok})

    _write_outputs(cfg, rows, [{"record": "field-check", **r} for r in rows])
    return 2 if failure else 0


def _cmd_flow(cfg: ExperimentConfig) -> int:
    fld, interval = _field_and_interval(cfg)
    seeds = _seed_points(cfg, fld)
    n_cp = int(cfg.extras.get("n_checkpoints", 8))
    cps = np.linspace(interval.s, interval.t, n_cp + 1)[1:]
    bundle = integrate_forward(fld, interval, seeds, cfg.tol, checkpoints=cps)
    save_bundle(bundle, cfg.output + ".bundle.csv", seed=cfg.seed)
    blown = int(np.sum(bundle.status == 1))
    failed = int(np.sum(bundle.status == 2))
    frac_blown = blown / bundle.n_particles
    rows = [
        {
            "n_particles": bundle.n_particles,
            "blown_up": blown,
            "tolerance_failure": failed,
            "frac_blown": frac_blown,
            "steps": bundle.stats["steps"],
            "rejected": bundle.stats["rejected"],
            "rhs_evals": bundle.stats["rhs_evals"],
        }
    ]
    _write_outputs(cfg, rows, [{"record": "flow-summary", **rows[0]}])
    return 2 if frac_blown > 0.01 else 0


def _cmd_density(cfg: ExperimentConfig) -> int:
    fld, interval = _field_and_interval(cfg)
    m = GaussianMeasure(fld.dim)
    scheme = cfg.scheme_object()
    pts = sample(m, max(cfg.n_particles, 1000), cfg.seed)
    d = density_exact(fld, interval, pts, cfg.tol)
    mass = mass_check(d, scheme)
    thr, det = alpha_threshold(fld, interval, cfg.extras.get("constant", "16e"), m, scheme, details=True)
    alpha = float(cfg.extras.get("alpha", 0.5 * thr if thr > 0 else 0.5))
    mod_scheme = (
        scheme
        if scheme.kind == "monte-carlo"
        else ExpectationScheme.monte_carlo(int(cfg.extras.get("modular_samples", 20000)), cfg.seed)
    )
    mod = phi_alpha_modular(d, alpha, mod_scheme)
    rows = [
        {
            "quantity": "mass",
            "value": mass.value,
            "abs_error": mass.abs_error,
            "state": mass.state,
        },
        {"quantity": "alpha_threshold", "value": thr, "abs_error": 0.0, "state": "ok"},
        {
            "quantity": f"phi_alpha_modular(alpha={alpha!r})",
            "value": mod.value,
            "abs_error": mod.abs_error,
            "state": mod.state,
        },
    ]
    records = [
        {"record": "density-summary", **d.describe()},
        {"record": "mass", **mass.describe()},
        {"record": "alpha_threshold", **det},
        {"record": "modular", "alpha": alpha, **mod.describe()},
    ]
    _write_outputs(cfg, rows, records)
    mass_bad = mass.state != "ok"
    return 2 if mass_bad else 0


def _cmd_transport(cfg: ExperimentConfig) -> int:
    fld, interval = _field_and_interval(cfg)
    m = GaussianMeasure(fld.dim)
    scheme = cfg.scheme_object()
    horizon = interval.t - interval.s

    def u0(x):
        return np.tanh(x[:, 0])

    sol = solve_characteristics(fld, u0, "forward-cauchy", cfg.tol)
    rows, records = [], []
    for tf in default_test_functions(fld.dim, horizon):
        est = weak_residual(sol, tf, scheme, horizon)
        ok = abs(est.value) <= est.abs_error
        rows.append(
            {
                "check": "weak_residual",
                "test_fn": tf.name,
                "value": est.value,
                "abs_error": est.abs_error,
                "within_bars": ok,
            }
        )
    set_cfg = cfg.extras.get("set")
    if set_cfg:
        E = IntervalSet.of(set_cfg["lo"], set_cfg["hi"])
        p = float(cfg.extras.get("p", 1.0))
        tri = stability_triple_log_check(fld, interval, E, p, m, scheme, cfg.tol)
        dbl = stability_double_log_check(fld, interval, E, p, m, scheme, cfg.tol)
        for rep in (tri, dbl):
            rows.append(
                {
                    "check": rep["kind"],
                    "state": rep["state"],
                    "lhs_gap": rep.get("lhs_gap", ""),
                    "budget": rep.get("budget", ""),
                    "holds": rep.get("holds", ""),
                }
            )
            records.append({"record": "stability", **rep})
    records.extend({"record": "transport", **r} for r in rows)
    _write_outputs(cfg, rows, records)
    return 0


def _cmd_mollify(cfg: ExperimentConfig) -> int:
    fld, interval = _field_and_interval(cfg)
    ladder = cfg.extras.get("eps_ladder")
    gammas = tuple(cfg.extras.get("gammas", (0.1, 0.01)))
    out = run_mollification_study(
        fld,
        interval,
        cfg.n_particles,
        cfg.seed,
        eps_ladder=ladder,
        gammas=gammas,
        tol=cfg.tol,
    )
    rows = out["ladder"]
    records = [{"record": "mollify", **jsonable(out)}]
    _write_outputs(cfg, rows, records)
    return 0


def _cmd_stability(cfg: ExperimentConfig) -> int:
    fld, interval = _field_and_interval(cfg)
    out = run_stability_study(
        fld,
        interval,
        cfg.n_particles,
        cfg.seed,
        k_values=cfg.extras.get("k_values", (1, 2, 4, 8)),
        kind=cfg.extras.get("kind", "ou"),
        tol=cfg.tol,
    )
    _write_outputs(cfg, out["rows"], [{"record": "stability-study", **jsonable(out)}])
    return 0


def _cmd_lebesgue(cfg: ExperimentConfig) -> int:
    fld, interval = _field_and_interval(cfg)
    box = cfg.extras.get("box", {"lo": [-1.0] * fld.dim, "hi": [1.0] * fld.dim})
    out = run_lebesgue_quasi_invariance(
        fld,
        interval,
        box["lo"],
        box["hi"],
        int(cfg.extras.get("n_uniform", 200000)),
        cfg.seed,
        tol=cfg.tol,
    )
    rows = [
        {
            "direct_estimate": out["direct_estimate"],
            "direct_error": out["direct_error"],
            "identity_estimate": out["identity_estimate"],
            "agree_3sigma": out["agree_3sigma"],
        }
    ]
    _write_outputs(cfg, rows, [{"record": "lebesgue", **jsonable(out)}])
    return 0 if out["agree_3sigma"] else 2


def _cmd_report(cfg: ExperimentConfig) -> int:
    pattern = cfg.extras.get("glob", "*.jsonl")
    files = sorted(glob.glob(pattern))
    if not files:
        print(f"no record files match {pattern!r}", file=sys.stderr)
        return 1
    rows, records = [], []
    for fp in files:
        states: dict[str, int] = {}
        kinds: dict[str, int] = {}
        n = 0
        with open(fp, "r", encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                rec = json.loads(line)
                n += 1
                kinds[rec.get("record", "?")] = kinds.get(rec.get("record", "?"), 0) + 1
                if "state" in rec:
                    states[rec["state"]] = states.get(rec["state"], 0) + 1
        rows.append(
            {
                "file": fp,
                "records": n,
                "states": json.dumps(states, sort_keys=True).replace(",", ";"),
            }
        )
        records.append({"record": "report-entry", "file": fp, "kinds": kinds, "states": states})
    _write_outputs(cfg, rows, records)
    return 0


_COMMANDS = {
    "norms": _cmd_norms,
    "field-check": _cmd_field_check,
    "flow": _cmd_flow,
    "density": _cmd_density,
    "transport": _cmd_transport,
    "mollify": _cmd_mollify,
    "stability": _cmd_stability,
    "lebesgue": _cmd_lebesgue,
    "report": _cmd_report,
}


def _build_parser() -> _Parser:
    p = _Parser(prog="flowlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="path to a JSON experiment config")
        sp.add_argument("--output", help="output base path override")
        sp.add_argument("--seed", type=int, help="seed override")
        sp.add_argument("--samples", type=int, help="scheme sample-count override")
        sp.add_argument("--tolerance", "--tol", dest="tolerance", type=float)
        sp.add_argument("--field", help="library field name override")
        sp.add_argument("--tau", type=float, help="sets the interval to [0, tau]")
        sp.add_argument("--particles", type=int, help="particle count override")
        sp.add_argument("--alpha", type=float, help="modular exponent (density)")
        sp.add_argument("--glob", help="record-file glob (report)")
    return p


def cli(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.config:
            cfg = ExperimentConfig.from_file(args.config)
            if cfg.experiment != args.command:
                cfg = cfg.with_overrides(experiment=args.command)
        else:
            cfg = ExperimentConfig(experiment=args.command)
        cfg = cfg.with_overrides(
            output=args.output,
            seed=args.seed,
            tol=args.tolerance,
            field=args.field,
            n_particles=args.particles,
        )
        if args.tau is not None:
            cfg = cfg.with_overrides(interval=[0.0, float(args.tau)])
        if args.samples is not None:
            scheme = dict(cfg.scheme)
            if scheme.get("kind") == "monte-carlo":
                scheme["n_samples"] = args.samples
            else:
                scheme = {"kind": "monte-carlo", "n_samples": args.samples, "seed": cfg.seed}
            cfg = cfg.with_overrides(scheme=scheme)
        if args.alpha is not None:
            cfg.extras = {**cfg.extras, "alpha": args.alpha}
        if args.glob is not None:
            cfg.extras = {**cfg.extras, "glob": args.glob}
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](cfg)
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
