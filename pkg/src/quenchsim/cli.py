"""Batch entry point.

    quench <experiment> [--preset NAME] [--config FILE] [flags]

Experiments: linear-qkt (single-mode occupancy kinetics), toy (two-mode
ensemble flows, Gaussian contours, optional master-equation snapshots),
ring (field-evolution winding runs at one quench time), scan (winding
statistics across quench times or domain counts).

All artifacts are CSV/JSON under --out-dir, stamped with the config
hash and master seed.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import departure_time, fit_power_law
from .config import ExperimentConfig, config_hash, resolve_config
from .csvio import write_csv, write_json
from .errors import ConfigError, NumericsError
from .flow import (
    GaussianState,
    evolve_gaussian,
    integrate_flow,
    metastable_probability,
    seed_ensemble,
)
from .linear_qkt import (
    ModeSpec,
    competitive_modes,
    equilibrium_occupancy,
    freeze_out_time,
    frozen_correlation_length,
    integrate_occupancy,
)
from .ring import domain_scan, kz_scan
from .toy_model import ProbabilityGrid, evolve_master, stationary_distribution

__all__ = ["main", "build_parser"]

_BASE = {
    "linear-qkt": {
        "experiment": "linear-qkt",
        "schedule": {"kind": "linear-bias", "theta": 0.0, "beta": 1.0},
        "model": {"gamma0": 1.0, "e_k": 0.0, "k": 0, "ring_l": 256.0, "ring_k_max": 16},
        "ensemble": {"master_seed": 0},
        "output": {"prefix": "linear"},
    },
    "toy": {
        "experiment": "toy",
        "ensemble": {"master_seed": 0, "seed_mode": "line"},
        "output": {"prefix": "toy", "traj_points": 101},
    },
    "ring": {
        "experiment": "ring",
        "schedule": {"kind": "tanh", "beta_c": 1.0, "constant_beta": True},
        "model": {"pipeline": "ring-tdgl", "l": 256.0, "n_sites": 512, "lam": 1.0,
                  "tau0": 1.0, "dt": 0.25, "seed_fraction": 0.01, "gamma0": 1.0},
        "ensemble": {"master_seed": 0, "runs": 100},
        "output": {"prefix": "ring"},
    },
    "scan": {
        "experiment": "scan",
        "schedule": {"kind": "tanh", "beta_c": 1.0, "constant_beta": True},
        "model": {"pipeline": "ring-tdgl", "l": 256.0, "n_sites": 512, "lam": 1.0,
                  "tau0": 1.0, "dt": 0.25, "seed_fraction": 0.01, "gamma0": 1.0},
        "ensemble": {"master_seed": 0, "runs": 1000},
        "output": {"prefix": "scan"},
    },
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="quench",
        description="Quench-dynamics experiments: occupancy kinetics, two-mode "
                    "flows, ring winding statistics.",
    )
    p.add_argument("--version", action="version", version=f"quench {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)
    for cmd in ("linear-qkt", "toy", "ring", "scan"):
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--preset", help="named parameter set shipped with the package")
        sp.add_argument("--seed", type=int, help="master random seed (overrides config)")
        sp.add_argument("--out-dir", default="outputs", help="artifact directory")
        sp.add_argument("--sweep", help="key=v1,v2,... parameter sweep")
        sp.add_argument("--runs", type=int, help="ensemble size (overrides config)")
        sp.add_argument("--output-times", help="comma-separated snapshot times")
        if cmd == "linear-qkt":
            sp.add_argument("--tau-q", type=float, help="quench time constant")
            sp.add_argument("--gamma0", type=float, help="scattering rate")
            sp.add_argument("--e-k", type=float, help="mode energy")
        if cmd in ("ring", "scan"):
            sp.add_argument("--tau-q", type=float, help="quench time constant")
            sp.add_argument("--pipeline", choices=["ring-tdgl", "random-walk"])
            sp.add_argument("--workers", type=int, default=1,
                            help="worker processes (does not affect results)")
    return p


def _parse_sweep(text: str):
    if "=" not in text:
        raise ConfigError(f"--sweep wants key=v1,v2,..., got {text!r}")
    key, _, vals = text.partition("=")
    key = key.strip()
    try:
        values = [float(v) for v in vals.split(",") if v.strip()]
    except ValueError as ex:
        raise ConfigError(f"--sweep {key}: {ex}") from ex
    if not values:
        raise ConfigError(f"--sweep {key}: no values given")
    return key, values


def _resolve(args) -> tuple[ExperimentConfig, dict]:
    overrides = {}
    if args.seed is not None:
        overrides["ensemble.master_seed"] = args.seed
    if args.runs is not None:
        overrides["ensemble.runs"] = args.runs
    if args.output_times:
        try:
            overrides["output.times"] = [float(t) for t in args.output_times.split(",")]
        except ValueError as ex:
            raise ConfigError(f"--output-times: {ex}") from ex
    if getattr(args, "tau_q", None) is not None:
        overrides["schedule.tau_q"] = args.tau_q
    if getattr(args, "gamma0", None) is not None:
        overrides["model.gamma0"] = args.gamma0
    if getattr(args, "e_k", None) is not None:
        overrides["model.e_k"] = args.e_k
    if getattr(args, "pipeline", None) is not None:
        overrides["model.pipeline"] = args.pipeline

    cfg = resolve_config(preset=args.preset, config_path=args.config, overrides={})
    merged = ExperimentConfig(_deep_merge(_BASE[args.cmd], cfg.data))
    for path, val in overrides.items():
        merged.set(path, val)

    sweep = _parse_sweep(args.sweep) if args.sweep else None
    if sweep is not None:
        # sweeps change what gets computed, so they belong in the hash
        merged.set("sweep", {"key": sweep[0], "values": list(sweep[1])})

    if merged.experiment != _BASE[args.cmd]["experiment"]:
        raise ConfigError(
            f"experiment: config says {merged.experiment!r} but the "
            f"{args.cmd!r} command was invoked"
        )

    runtime = {
        "out_dir": Path(args.out_dir),
        "workers": getattr(args, "workers", 1),
        "sweep": sweep,
    }
    return merged, runtime


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _meta(cfg: ExperimentConfig, schema: str) -> dict:
    data = copy.deepcopy(cfg.data)
    data.get("output", {}).pop("out_dir", None)
    return {
        "config_hash": config_hash(data),
        "seed": cfg.require("ensemble.master_seed", int),
        "schema": schema,
    }


# ---------------------------------------------------------------- linear-qkt


def _occupancy_run(cfg: ExperimentConfig, tau_q: float):
    work = ExperimentConfig(copy.deepcopy(cfg.data))
    work.set("schedule.tau_q", tau_q)
    s = work.schedule()
    m = ModeSpec(
        e_k=work.require("model.e_k", float),
        gamma0=work.require("model.gamma0", float),
        k=int(work.get("model.k", 0)),
    )
    gamma0 = m.gamma0
    that = freeze_out_time(tau_q, gamma0) if s.kind != "constant" else None
    theta = float(work.get("schedule.theta", 0.0))
    if s.kind == "constant":
        t_i = float(work.get("output.t_i", 0.0))
        t_f = float(work.get("output.t_f", 100.0 / gamma0))
        n_i = float(work.get("model.n_i", 0.0))
        series = integrate_occupancy(s, m, t_i, t_f, n_i=n_i)
    else:
        t_i = float(work.get("output.t_i", theta - 5.0 * tau_q))
        t_f = float(work.get("output.t_f", theta - 1e-4 * tau_q))
        series = integrate_occupancy(s, m, t_i, t_f)
    return work, s, m, series, that


def run_linear_qkt(cfg: ExperimentConfig, runtime: dict) -> None:
    out = runtime["out_dir"]
    prefix = cfg.get("output.prefix", "linear")
    sweep = runtime["sweep"]
    if sweep is not None and sweep[0] not in ("tau_q", "schedule.tau_q"):
        raise ConfigError(f"--sweep {sweep[0]}: linear-qkt only sweeps tau_q")

    if sweep is not None:
        taus = sweep[1]
    elif cfg.get("schedule.kind", "linear-bias") == "constant":
        taus = [0.0]
    else:
        taus = [cfg.require("schedule.tau_q", float)]

    meta = _meta(cfg, "occupancy")
    rows_scaling, summaries = [], []
    for i, tau_q in enumerate(taus):
        work, s, m, series, that = _occupancy_run(cfg, tau_q)
        name = (f"{prefix}_occupancy.csv" if sweep is None
                else f"{prefix}_occupancy_{i:02d}.csv")
        write_csv(
            out / name,
            ["t", "nbar", "nbar_eq", "mode_k"],
            [(float(t), float(nb), float(ne), m.k)
             for t, nb, ne in zip(series.times, series.nbar, series.nbar_eq)],
            dict(meta, tau_q=repr(float(tau_q))),
        )
        t_dep = departure_time(series, float(cfg.get("model.departure_factor", 2.0)))
        xi = frozen_correlation_length(tau_q, m.gamma0) if that is not None else None
        if that is not None:
            rows_scaling.append(
                (tau_q, that, xi, abs(t_dep) if t_dep is not None else None)
            )

        ring_l = float(cfg.get("model.ring_l", 256.0))
        k_max = int(cfg.get("model.ring_k_max", 16))
        spectrum = [
            ModeSpec(e_k=(2.0 * math.pi * k / ring_l) ** 2, gamma0=m.gamma0, k=k)
            for k in range(-k_max, k_max + 1)
        ]
        beta_x = s.beta(float(cfg.get("schedule.theta", 0.0)))
        comp = (competitive_modes(spectrum, beta_x, tau_q, m.gamma0)
                if that is not None else [])
        summaries.append({
            "experiment": "linear-qkt",
            "tau_q": tau_q,
            "t_hat": that,
            "xi_hat": xi,
            "departure_time": t_dep,
            "competitive_modes": sorted(comp),
            "final_nbar": float(series.nbar[-1]),
            "capped_at": series.capped_at,
        })

    payload = summaries[0] if sweep is None else {"runs": summaries}
    write_json(out / f"{prefix}_summary.json", payload, meta)

    if sweep is not None:
        write_csv(
            out / f"{prefix}_scaling.csv",
            ["tau_q", "t_hat", "xi_hat", "departure_time"],
            rows_scaling,
            dict(meta, schema="occupancy-scaling"),
        )
        usable = [(tq, td) for tq, th, xi, td in rows_scaling if td is not None]
        if len(usable) >= 3:
            fit = fit_power_law([u[0] for u in usable], [u[1] for u in usable])
            write_csv(
                out / f"{prefix}_fit.csv",
                ["x", "y", "n_points", "exponent", "exponent_stderr",
                 "amplitude", "r_squared"],
                [("tau_q", "departure_time", fit.n_points, fit.exponent,
                  fit.exponent_stderr, fit.amplitude, fit.r_squared)],
                dict(meta, schema="power-law-fit"),
            )


# ----------------------------------------------------------------------- toy


def run_toy(cfg: ExperimentConfig, runtime: dict) -> None:
    if runtime["sweep"] is not None:
        raise ConfigError("--sweep: not supported for the toy experiment")
    out = runtime["out_dir"]
    prefix = cfg.get("output.prefix", "toy")
    s = cfg.schedule()
    params = cfg.toy_params()
    # renderers draw the metastability line from the header alone
    meta = dict(_meta(cfg, "toy"), threshold=params.n_c + 1.0)

    seed_mode = cfg.get("ensemble.seed_mode", "line")
    t_start = cfg.require("ensemble.t_start", float)
    t_end = cfg.require("output.t_end", float)
    master_seed = cfg.require("ensemble.master_seed", int)
    if seed_mode == "line":
        count = cfg.require("ensemble.line_seeds", int)
        seeds = seed_ensemble(
            None, count, master_seed, mode="line",
            line_const=cfg.require("ensemble.line_const", float), t_s=t_start,
        )
    elif seed_mode == "stochastic":
        count = cfg.require("ensemble.runs", int)
        nbars = (
            cfg.require("ensemble.nbar0", float),
            cfg.require("ensemble.nbar1", float),
        )
        seeds = seed_ensemble(nbars, count, master_seed, mode="stochastic", t_s=t_start)
    else:
        raise ConfigError(f"ensemble.seed_mode: unknown mode {seed_mode!r}")

    traj_points = int(cfg.get("output.traj_points", 101))
    t_eval = np.linspace(t_start, t_end, traj_points)

    finals = {}
    for flow in ("qkt", "tdgl"):
        for i, seed in enumerate(seeds):
            t, y0, y1 = integrate_flow(seed, flow, s, params, t_end, t_eval=t_eval)
            finals[flow, i] = (float(y0[-1]), float(y1[-1]))
            write_csv(
                out / f"{prefix}_traj_{flow}_{i:03d}.csv",
                ["t", "n0", "n1"],
                [(float(tt), float(a), float(b))
                 for tt, a, b in zip(t, y0, y1)],
                dict(meta, schema="toy-trajectory", flow=flow, seed_index=i),
            )

    out_q = metastable_probability(seeds, "qkt", s, params, t_end=t_end)
    out_t = metastable_probability(seeds, "tdgl", s, params, t_end=t_end)
    for flow, res in (("qkt", out_q), ("tdgl", out_t)):
        write_csv(
            out / f"{prefix}_outcomes_{flow}.csv",
            ["seed", "outcome", "n0_final", "n1_final"],
            [(i, res.outcomes[i], finals[flow, i][0], finals[flow, i][1])
             for i in range(len(seeds))],
            dict(meta, schema="toy-outcomes", flow=flow),
        )
    above = [i for i, st in enumerate(seeds) if st.n1 > st.n0]
    frac_above = {}
    for tag, res in (("qkt", out_q), ("tdgl", out_t)):
        hits = sum(1 for i in above if res.outcomes[i] == "metastable-vortex")
        frac_above[tag] = hits / len(above) if above else float("nan")
    agreement = (
        sum(1 for a, b in zip(out_q.outcomes, out_t.outcomes) if a == b) / len(seeds)
    )
    summary = {
        "experiment": "toy",
        "n_seeds": len(seeds),
        "fraction_qkt": out_q.fraction,
        "fraction_tdgl": out_t.fraction,
        "stderr_qkt": out_q.stderr,
        "stderr_tdgl": out_t.stderr,
        "fraction_qkt_above_diagonal": frac_above["qkt"],
        "fraction_tdgl_above_diagonal": frac_above["tdgl"],
        "n_above_diagonal": len(above),
        "agreement": agreement,
        "undecided_qkt": out_q.n_undecided,
        "undecided_tdgl": out_t.n_undecided,
        "threshold": params.n_c + 1.0,
    }
    write_json(out / f"{prefix}_summary.json", summary, meta)

    if bool(cfg.get("gaussian.enabled", False)):
        times = cfg.get("output.times")
        if not times:
            raise ConfigError("output.times: required when gaussian.enabled")
        times = [float(t) for t in times]
        mid = cfg.require("ensemble.line_const", float) / 2.0
        g0 = GaussianState(
            mean=np.array([mid, mid]), cov=np.diag([mid, mid]), t=t_start
        )
        dense = np.linspace(t_start, times[-1], traj_points)
        eval_ts = sorted({float(t) for t in dense} | set(times))
        traj = evolve_gaussian(g0, s, params, t_f=times[-1],
                               output_times=eval_ts)
        write_csv(
            out / f"{prefix}_traj_gaussian.csv",
            ["t", "n0", "n1", "c00", "c01", "c11"],
            [(g.t, g.mean[0], g.mean[1], g.cov[0, 0], g.cov[0, 1],
              g.cov[1, 1]) for g in traj],
            dict(meta, schema="toy-trajectory-gaussian", flow="qkt"),
        )
        wanted = set(times)
        contour_rows = []
        for g in traj:
            if g.t not in wanted:
                continue
            major, minor, angle = g.ellipse()
            contour_rows.append(
                ("qkt", g.t, g.mean[0], g.mean[1], g.cov[0, 0], g.cov[0, 1],
                 g.cov[1, 1], major, minor, angle)
            )
        write_csv(
            out / f"{prefix}_contours.csv",
            ["flow", "t", "mean0", "mean1", "cov00", "cov01", "cov11",
             "major", "minor", "angle"],
            contour_rows,
            dict(meta, schema="toy-contours"),
        )

    master_cfg = cfg.get("master", {})
    if master_cfg and bool(master_cfg.get("enabled", False)):
        n_max = int(master_cfg["n_max"])
        times = [float(t) for t in (cfg.get("output.times") or [t_start, t_end])]
        # the grid starts from equilibrium well before the crossing
        t0m = float(master_cfg.get("t_start", -3.0 * float(cfg.get("schedule.tau_q", 1.0))))
        p0 = stationary_distribution(
            s.beta(t0m), s.beta_mu(t0m) / s.beta(t0m), params, n_max
        )
        grid = ProbabilityGrid(n_max=n_max, p=p0.p, t=t0m)
        traj = evolve_master(
            grid, s, params, t_f=times[-1], output_times=times,
            boundary_threshold=float(master_cfg.get("boundary_threshold", 1e-6)),
        )
        for j, g in enumerate(traj.grids):
            n0g, n1g = np.nonzero(g.p > 0)
            write_csv(
                out / f"{prefix}_snapshot_{j:02d}.csv",
                ["n0", "n1", "p"],
                [(int(a), int(b), float(g.p[a, b])) for a, b in zip(n0g, n1g)],
                dict(meta, schema="toy-snapshot", t=repr(float(g.t)),
                     schedule=repr(s), params=repr(params)),
            )


# ---------------------------------------------------------------- ring/scan


def _run_scan(cfg: ExperimentConfig, runtime: dict, taus) -> None:
    out = runtime["out_dir"]
    prefix = cfg.get("output.prefix", "scan")
    meta = _meta(cfg, "winding-scan")
    pipeline = cfg.require("model.pipeline", str)
    runs = cfg.require("ensemble.runs", int)
    master_seed = cfg.require("ensemble.master_seed", int)

    sweep = runtime["sweep"]
    if sweep is not None and sweep[0] == "n_domains":
        if pipeline != "random-walk":
            raise ConfigError("--sweep n_domains: only the random-walk pipeline")
        rows = domain_scan([int(v) for v in sweep[1]], runs, master_seed=master_seed)
        x_name = "n_domains"
        xs = [r.n_domains for r in rows]
    else:
        rows = kz_scan(
            taus, runs, pipeline,
            l=cfg.require("model.l", float),
            n_sites=int(cfg.get("model.n_sites", 512)),
            k_max=cfg.get("model.k_max"),
            lam=float(cfg.get("model.lam", 1.0)),
            tau0=float(cfg.get("model.tau0", 1.0)),
            dt=float(cfg.get("model.dt", 0.25)),
            seed_fraction=float(cfg.get("model.seed_fraction", 0.01)),
            master_seed=master_seed,
            gamma0=float(cfg.get("model.gamma0", 1.0)),
            beta_c=float(cfg.get("schedule.beta_c", 1.0)),
            workers=runtime["workers"],
        )
        x_name = "tau_q"
        xs = [r.tau_q for r in rows]

    write_csv(
        out / f"{prefix}_samples.csv",
        ["w", "tau_q", "seed", "final_density", "pipeline"],
        [(smp.w, smp.tau_q, smp.seed, smp.final_density, r.pipeline)
         for r in rows for smp in r.samples],
        dict(meta, schema="winding-samples"),
    )
    write_csv(
        out / f"{prefix}_scan.csv",
        ["tau_q", "xi_hat", "n_domains", "runs", "w_rms", "w_rms_stderr", "pipeline"],
        [(r.tau_q, r.xi_hat, r.n_domains, r.runs, r.w_rms, r.w_rms_stderr, r.pipeline)
         for r in rows],
        meta,
    )
    summary = {
        "experiment": cfg.experiment,
        "pipeline": pipeline,
        "runs": runs,
        "n_aborted": int(sum(r.n_aborted for r in rows)),
        "n_unfrozen": int(sum(r.n_unfrozen for r in rows)),
    }
    ok = [(x, r.w_rms) for x, r in zip(xs, rows) if r.w_rms > 0]
    if len(ok) >= 3:
        fit = fit_power_law([x for x, _ in ok], [y for _, y in ok])
        write_csv(
            out / f"{prefix}_fit.csv",
            ["x", "y", "n_points", "exponent", "exponent_stderr",
             "amplitude", "r_squared"],
            [(x_name, "w_rms", fit.n_points, fit.exponent, fit.exponent_stderr,
              fit.amplitude, fit.r_squared)],
            dict(meta, schema="power-law-fit"),
        )
        summary["exponent"] = fit.exponent
        summary["exponent_stderr"] = fit.exponent_stderr
    write_json(out / f"{prefix}_summary.json", summary, meta)


def run_ring(cfg: ExperimentConfig, runtime: dict) -> None:
    sweep = runtime["sweep"]
    if sweep is not None and sweep[0] in ("tau_q", "schedule.tau_q"):
        taus = sweep[1]
    else:
        taus = [cfg.require("schedule.tau_q", float)]
    _run_scan(cfg, runtime, taus)


def run_scan(cfg: ExperimentConfig, runtime: dict) -> None:
    sweep = runtime["sweep"]
    if sweep is not None and sweep[0] in ("tau_q", "schedule.tau_q"):
        taus = sweep[1]
    elif sweep is not None and sweep[0] == "n_domains":
        taus = []
    else:
        taus = cfg.get("model.tau_qs")
        if not taus:
            raise ConfigError(
                "model.tau_qs: required (or pass --sweep tau_q=... / n_domains=...)"
            )
        taus = [float(t) for t in taus]
    _run_scan(cfg, runtime, taus)


_RUNNERS = {
    "linear-qkt": run_linear_qkt,
    "toy": run_toy,
    "ring": run_ring,
    "scan": run_scan,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, runtime = _resolve(args)
        _RUNNERS[args.cmd](cfg, runtime)
    except ConfigError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 2
    except NumericsError as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
