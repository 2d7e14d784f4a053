"""Command-line front end.

    qvdp <command> --config run.ini --out results/ [--workers N]

Commands: steady, evolve, spectrum, wigner, effective, classical-diagram, scan.
Exit codes: 0 success, 2 configuration error, 3 resource error, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from qvdp import __version__, classical, effective, lindblad, observables, spectrum
from qvdp.config import RunConfig, load_config
from qvdp.errors import ConfigError, DomainError, InstabilityError, ResourceError, SolverError

logger = logging.getLogger("qvdp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_SOLVER = 4

WORKERS_ENV = "QVDP_WORKERS"


# --------------------------------------------------------------------------
# output helpers


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    if value is None:
        return "nan"
    return format(float(value), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(float(obj.real)), "im": _jsonable(float(obj.imag))}
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def write_csv(path: Path, cfg: RunConfig, columns: list[str], rows) -> None:
    """CSV with two provenance comment lines, a header naming units, then data."""
    lines = [
        f"# qvdp {__version__}",
        "# config: " + json.dumps(_jsonable(cfg.resolved()), sort_keys=True),
        ",".join(columns),
    ]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, cfg: RunConfig, payload: dict) -> None:
    doc = {"version": __version__, "config": cfg.resolved(), **payload}
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# shared steps


def _steady(cfg: RunConfig):
    space = cfg.space()
    L = lindblad.build_liouvillian(cfg.params, space, cfg.max_unknowns)
    return L, lindblad.steady_state(L)


def _initial_state(cfg: RunConfig, L: lindblad.Liouvillian):
    kind = cfg.get_str("evolve", "initial", "cat", ("cat", "coherent", "vacuum", "fock", "steady"))
    space = L.space
    center = complex(cfg.get("evolve", "center_re", space.shift.real),
                     cfg.get("evolve", "center_im", space.shift.imag))
    offset = complex(cfg.get("evolve", "offset_re", 2.0), cfg.get("evolve", "offset_im", 0.0))
    try:
        if kind == "cat":
            return lindblad.cat_state(space, center, offset)
        if kind == "coherent":
            return lindblad.coherent_state(space, center + offset)
        if kind == "vacuum":
            return lindblad.vacuum(space)
        if kind == "fock":
            return lindblad.fock_state(space, cfg.get("evolve", "fock_n", 0, int))
        return lindblad.steady_state(L)
    except DomainError as exc:
        raise ResourceError(f"evolve.initial: {exc}") from exc


def _summary_of(dm: lindblad.DensityMatrix, L: lindblad.Liouvillian) -> dict:
    trunc = lindblad.truncation_check(L, dm)
    return {
        "mean_b": dm.mean_amplitude(),
        "occupation": dm.occupation(),
        "truncation_top_population": trunc.top_population,
        "truncation_flagged": trunc.flagged,
    }


# --------------------------------------------------------------------------
# commands


def cmd_steady(cfg: RunConfig, out: Path, workers: int) -> dict:
    L, rho = _steady(cfg)
    n_phi = cfg.get("steady", "n_phi", 256, int)
    pd = observables.phase_distribution(rho, n_phi)
    write_csv(out / "phase_distribution.csv", cfg, ["phi [rad]", "P [1/rad]"],
              zip(pd.phi_grid, pd.values))
    peak_phi, peak_height = pd.peak()
    summary = _summary_of(rho, L)
    summary.update({
        "residual": lindblad.steady_state_residual(L, rho),
        "phase_peak_position": peak_phi,
        "phase_peak_height": peak_height,
        "phase_width": pd.width(),
        "covariance": observables.covariance_from_state(rho),
    })
    write_json(out / "steady.json", cfg, {"steady": summary, "effective": _effective_point(cfg.params)})
    return summary


def cmd_wigner(cfg: RunConfig, out: Path, workers: int) -> dict:
    L, rho = _steady(cfg)
    gx, gp = observables.default_wigner_grid(rho.mean_amplitude(), cfg.get("wigner", "n", 201, int))
    x = cfg.linspace("wigner", "x", gx)
    p = cfg.linspace("wigner", "p", gp)
    w = observables.wigner(rho, x, p)
    rows = ((xi, pj, w.values[i, j]) for i, xi in enumerate(x) for j, pj in enumerate(p))
    write_csv(out / "wigner.csv", cfg, ["x [quadrature]", "p [quadrature]", "W"], rows)
    summary = {"integral": w.integral(), "negativity_volume": observables.negativity_volume(w),
               "min": float(w.values.min()), "max": float(w.values.max())}
    write_json(out / "wigner.json", cfg, {"wigner": summary})
    return summary


def cmd_evolve(cfg: RunConfig, out: Path, workers: int) -> dict:
    space = cfg.space()
    L = lindblad.build_liouvillian(cfg.params, space, cfg.max_unknowns)
    rho0 = _initial_state(cfg, L)
    t_max = cfg.get("evolve", "t_max", 1.0)
    n_times = cfg.get("evolve", "n_times", 51, int)
    if t_max <= 0:
        raise ConfigError("evolve.t_max", "must be > 0")
    if n_times < 2:
        raise ConfigError("evolve.n_times", "must be >= 2")
    method = cfg.get_str("evolve", "method", "DOP853", ("DOP853", "RK45", "expm"))
    times = np.linspace(0.0, t_max, n_times)
    snaps = lindblad.evolve(L, rho0, times, method=method)

    fp = effective.stable_fixed_point(cfg.params)
    ref = fp.beta if fp is not None else effective.default_center(cfg.params)
    frame = observables.QuadratureFrame.build(space, math.atan2(ref.imag, ref.real))
    dev = observables.phase_deviation_series(snaps, frame, max(abs(ref), 1e-300))
    half = cfg.get("evolve", "wigner_half_width", 7.0)
    n_w = cfg.get("evolve", "wigner_n", 121, int)
    c = space.shift
    gx = np.linspace(-half, half, n_w) + math.sqrt(2) * c.real
    gp = np.linspace(-half, half, n_w) + math.sqrt(2) * c.imag
    rows = []
    for k, (t, dm) in enumerate(zip(times, snaps)):
        mean = dm.mean_amplitude()
        neg = observables.negativity_volume(observables.wigner(dm, gx, gp, coverage_tol=1.0))
        rows.append((t, mean.real, mean.imag, dm.occupation(), dm.trace.real, neg,
                     dev.delta_phi[k], dev.var_r_perp[k]))
    write_csv(out / "evolve.csv", cfg,
              ["t [1/gamma1]", "Re<b>", "Im<b>", "<b^+b>", "trace", "negativity_volume",
               "delta_phi [rad]", "Var(r_perp)"], rows)
    summary = {"final": _summary_of(snaps[-1], L), "initial_negativity": rows[0][5],
               "final_negativity": rows[-1][5], "n_snapshots": len(rows)}
    write_json(out / "evolve.json", cfg, {"evolve": summary})
    return summary


def cmd_spectrum(cfg: RunConfig, out: Path, workers: int) -> dict:
    L, rho = _steady(cfg)
    omega = cfg.linspace("spectrum", "omega", None)
    if omega is None:
        omega = spectrum.default_omega_grid(cfg.params, cfg.get("spectrum", "n_omega_default", 2048, int))
    trace = spectrum.spectrum_full(L, rho, omega, workers=workers)
    fp = effective.stable_fixed_point(cfg.params)
    s_eff = None
    if fp is not None:
        try:
            s_eff = effective.effective_spectrum(cfg.params, fp, omega).values
        except InstabilityError:
            s_eff = None
    cols = ["omega [gamma1]", "S [1/gamma1]", "S_eff [1/gamma1]"]
    rows = [(w, s, s_eff[i] if s_eff is not None else None) for i, (w, s) in enumerate(zip(omega, trace.values))]
    write_csv(out / "spectrum.csv", cfg, cols, rows)
    summary = {
        "peaks": trace.peaks(cfg.get("spectrum", "rel_prominence", 0.01)),
        "coherent_weight": trace.coherent_weight,
        "incoherent_weight": trace.incoherent_weight(),
        "occupation": rho.occupation(),
        "failed_frequencies": [w for w, _ in trace.failed],
        "effective": _effective_point(cfg.params),
    }
    if trace.failed:
        write_json(out / "spectrum.json", cfg, {"spectrum": summary})
        raise SolverError(f"resolvent failed at {len(trace.failed)} frequencies")
    write_json(out / "spectrum.json", cfg, {"spectrum": summary})
    return summary


def _effective_point(params) -> dict:
    label, summary = effective.classify_regime(params)
    return summary.to_dict()


def cmd_effective(cfg: RunConfig, out: Path, workers: int) -> dict:
    base = _effective_point(cfg.params)
    payload = {"effective": base}
    param = cfg.get_str("effective", "sweep", None, ("Delta", "F", "gamma2"))
    if param is not None:
        values = cfg.linspace("effective", "values", None)
        if values is None:
            raise ConfigError("effective.values_min", "sweep needs values_min, values_max, n_values")
        points = [cfg.params.replace(**{param: float(v)}) for v in values]
        results = _map(_effective_point, points, workers)
        cols = [f"{param} [gamma1]", "regime", "Omega_eff [gamma1]", "Gamma [gamma1]",
                "Gamma_deph [gamma1]", "n_eff", "quality", "min_cov_eigenvalue", "asymmetry"]
        rows = []
        for v, r in zip(values, results):
            ev = r["cov_eigenvalues"]
            rows.append((v, r["regime"], r["Omega_eff"], r["Gamma"], r["Gamma_deph"], r["n_eff"],
                         r["quality"], ev[0] if ev else None, r["asymmetry"]))
        write_csv(out / "effective_sweep.csv", cfg, cols, rows)
        payload["sweep"] = {"parameter": param, "points": results}
    write_json(out / "effective.json", cfg, payload)
    return payload


def cmd_classical_diagram(cfg: RunConfig, out: Path, workers: int) -> dict:
    F = cfg.linspace("diagram", "F", None)
    D = cfg.linspace("diagram", "Delta", None)
    if F is None:
        raise ConfigError("diagram.F_min", "F grid is required")
    if D is None:
        raise ConfigError("diagram.Delta_min", "Delta grid is required")
    kwargs = {
        "transient": cfg.get("diagram", "transient", 50.0),
        "window": cfg.get("diagram", "window", 50.0),
        "tol": cfg.get("diagram", "tol", 1e-6),
    }
    grid = classical.scan_phase_diagram(cfg.params, F, D, workers=workers, **kwargs)
    rows = [(c.F, c.Delta, c.label, c.winding, c.period) for row in grid for c in row]
    write_csv(out / "diagram.csv", cfg,
              ["F [gamma1]", "Delta [gamma1]", "label", "winding", "period [1/gamma1]"], rows)
    counts = {label: 0 for label in classical.LABELS}
    for r in rows:
        counts[r[2]] += 1
    payload = {"diagram": {"counts": counts, "n_F": len(F), "n_Delta": len(D)}}
    write_json(out / "diagram.json", cfg, payload)
    return payload


def _scan_point(job) -> dict:
    task, params, n_max, frame, center, max_unknowns, n_phi = job
    if task == "effective":
        return _effective_point(params)
    from qvdp.hilbert import FockSpace

    if frame == "lab":
        space = FockSpace(n_max)
    else:
        space = FockSpace(n_max, center if center is not None else effective.default_center(params))
    L = lindblad.build_liouvillian(params, space, max_unknowns)
    rho = lindblad.steady_state(L)
    pd = observables.phase_distribution(rho, n_phi)
    pos, height = pd.peak()
    out = _summary_of(rho, L)
    out.update({"phase_peak_position": pos, "phase_peak_height": height, "phase_width": pd.width()})
    return out


def cmd_scan(cfg: RunConfig, out: Path, workers: int) -> dict:
    task = cfg.get_str("scan", "task", "steady", ("steady", "effective"))
    param = cfg.get_str("scan", "parameter", None, ("Delta", "F", "gamma2"))
    if param is None:
        raise ConfigError("scan.parameter", "is required")
    values = cfg.linspace("scan", "values", None)
    if values is None:
        raise ConfigError("scan.values_min", "scan needs values_min, values_max, n_values or values_values")
    n_phi = cfg.get("scan", "n_phi", 256, int)
    jobs = []
    for v in values:
        p = cfg.params.replace(**{param: float(v)})
        if task == "steady":
            lindblad.check_budget(cfg.space(0j) if cfg.frame == "displaced" else cfg.space(), cfg.max_unknowns)
        jobs.append((task, p, cfg.n_max, cfg.frame, cfg.center, cfg.max_unknowns, n_phi))
    results = _map(_scan_point, jobs, workers)
    if task == "steady":
        cols = [f"{param} [gamma1]", "Re<b>", "Im<b>", "<b^+b>", "phase_peak_position [rad]",
                "phase_peak_height [1/rad]", "phase_width [rad]", "truncation_top_population"]
        rows = [(v, r["mean_b"].real, r["mean_b"].imag, r["occupation"], r["phase_peak_position"],
                 r["phase_peak_height"], r["phase_width"], r["truncation_top_population"])
                for v, r in zip(values, results)]
    else:
        cols = [f"{param} [gamma1]", "regime", "Omega_eff [gamma1]", "Gamma [gamma1]",
                "Gamma_deph [gamma1]", "quality"]
        rows = [(v, r["regime"], r["Omega_eff"], r["Gamma"], r["Gamma_deph"], r["quality"])
                for v, r in zip(values, results)]
    write_csv(out / "scan.csv", cfg, cols, rows)
    payload = {"scan": {"task": task, "parameter": param, "points": results}}
    write_json(out / "scan.json", cfg, payload)
    return payload


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


COMMANDS = {
    "steady": cmd_steady,
    "evolve": cmd_evolve,
    "spectrum": cmd_spectrum,
    "wigner": cmd_wigner,
    "effective": cmd_effective,
    "classical-diagram": cmd_classical_diagram,
    "scan": cmd_scan,
}


def resolve_workers(flag: int | None, cfg: RunConfig) -> int:
    if flag is not None:
        return flag
    if cfg.workers is not None:
        return cfg.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(WORKERS_ENV, f"cannot parse {env!r} as an integer") from exc
        if value < 1:
            raise ConfigError(WORKERS_ENV, "must be >= 1")
        return value
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qvdp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qvdp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default: config, then ${WORKERS_ENV}, then 1)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
        workers = resolve_workers(args.workers, cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (SolverError, InstabilityError, DomainError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
