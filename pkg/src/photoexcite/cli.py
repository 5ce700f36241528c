"""Batch scenario runner: TOML configs in, deterministic CSV/JSON out.

Exit status: 0 success, 2 config/schema error, 3 physics invariant violated,
4 runtime failure.  With several scenarios the worst status wins.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analytic, io
from . import optimizer as opt
from .config import ConfigError, Scenario, load_config
from .core import (
    AtomParams,
    InvariantError,
    PhotonState,
    build_mode_grid,
    decaying_exponential,
    envelope_state,
    excited_atom_state,
    gaussian_envelope,
    gaussian_state,
    ideal_state,
    reflected_state,
    rising_exponential,
    temporal_profile,
    two_sided_exponential,
    vacuum_state,
)
from .propagator import PropagatorConfig, max_excitation, propagate

log = logging.getLogger("photoexcite")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_RUNTIME = 0, 2, 3, 4
OUT_DIR_ENV = "PHOTOEXCITE_OUT_DIR"
SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"


@dataclass
class ScenarioResult:
    name: str
    status: int = EXIT_OK
    files: list[Path] = field(default_factory=list)
    summary: str = ""
    error: str = ""


def bundled_scenarios() -> dict[str, Path]:
    return {p.stem: p for p in sorted(SCENARIO_DIR.glob("*.toml"))}


def resolve_config(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    name = p.stem if p.suffix == ".toml" else arg
    bundled = bundled_scenarios()
    if name in bundled and len(p.parts) == 1:
        return bundled[name]
    raise ConfigError(arg, [f"<file>: no such config file or bundled scenario (bundled: {', '.join(bundled)})"])


def build_atom(sc: Scenario) -> AtomParams:
    return AtomParams(sc.atom.gamma, sc.atom.t0, sc.atom.omega0)


def build_state(sc: Scenario, atom: AtomParams, grid) -> PhotonState:
    p = sc.pulse
    g = atom.gamma
    kind = p.kind
    if kind == "ideal":
        st = ideal_state(grid, atom)
    elif kind == "reflected":
        st = reflected_state(grid, atom)
    elif kind == "gaussian":
        st = gaussian_state(grid, atom, p.sigma * g)
    elif kind == "excited-atom":
        return excited_atom_state(grid)
    elif kind == "vacuum":
        return vacuum_state(grid)
    elif kind == "truncated-exponential":
        if p.duration == 0:
            return vacuum_state(grid)
        return envelope_state(grid, rising_exponential(atom, p.duration / g), atom, allow_loss=True)
    else:
        env = {
            "rising-exponential": lambda: rising_exponential(atom),
            "decaying-exponential": lambda: decaying_exponential(atom),
            "gaussian": lambda: gaussian_envelope(atom, (p.sigma or 0.0) * g),
            "two-sided-exponential": lambda: two_sided_exponential(atom, (p.rise or 0.0) * g, (p.fall or 0.0) * g),
        }[p.shape]()
        return envelope_state(grid, env, atom)
    delay = getattr(p, "delay", 0.0)
    return st.delayed(delay / g) if delay else st


def build_family(sc: Scenario, atom: AtomParams) -> opt.PulseFamily:
    o = sc.optimize
    b = [(x.min, x.max) for x in o.bounds]
    grid = (o.numeric_grid.bandwidth_factor, o.numeric_grid.n_modes) if o.numeric_grid else None
    if o.family == "gaussian-width":
        fam = opt.gaussian_width_family(atom, b[0])
    elif o.family == "truncated-exponential-duration":
        fam = opt.truncated_exponential_family(atom, b[0])
    elif o.family == "arrival-offset":
        fam = opt.arrival_offset_family(atom, b[0], o.interaction_start)
    else:
        g = atom.gamma
        fam = opt.custom_family(atom, b, lambda q: two_sided_exponential(atom, q[0] * g, q[1] * g),
                                param_names=("rise", "fall"))
    if grid is not None:
        fam = opt.PulseFamily(fam.kind, fam.atom, fam.bounds, fam.state, fam.window, fam.envelope,
                              grid, fam.param_names)
    return fam


def _meta(sc: Scenario, kind: str, extra: dict | None = None) -> dict:
    meta = {
        "artifact": f"photoexcite {__version__}",
        "scenario": sc.name,
        "output": kind,
        "config-sha256": sc.digest(__version__),
        "units": f"gamma={sc.atom.gamma!r} t0={sc.atom.t0!r}",
    }
    meta.update(extra or {})
    return meta


def run_optimization(sc: Scenario, atom: AtomParams) -> tuple[dict, str]:
    o = sc.optimize
    fam = build_family(sc, atom)
    dt = o.numeric_grid.dt if o.numeric_grid else None
    grid = fam.default_numeric_grid() if o.objective_mode == opt.NUMERIC else None
    sres = opt.scan(fam, o.n_points, o.objective_mode, grid=grid, dt=dt)
    best = sres
    rres = None
    if o.refine:
        rres = opt.refine(fam, sres.best_param, o.objective_mode, grid=grid, dt=dt)
        if rres.best_value > sres.best_value:
            best = rres
    payload = {
        "family": fam.kind,
        "param_names": list(fam.param_names),
        "objective_mode": o.objective_mode,
        "best_param": list(best.best_param),
        "best_value": best.best_value,
        "best_time": best.best_time,
        "scan": sres.to_dict(),
        "refine": rres.to_dict() if rres else None,
    }
    pstr = ", ".join(f"{x:.6g}" for x in best.best_param)
    return payload, f"best param ({pstr}) p={best.best_value:.6f} at t={best.best_time:.4f}"


def run_scenario(sc: Scenario, out_root: Path, *, strict: bool = False, only: set[str] | None = None) -> ScenarioResult:
    res = ScenarioResult(sc.name)
    outs = sorted(only) if only is not None else list(sc.outputs)
    out_dir = out_root / sc.name
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error" if strict else "ignore", RuntimeWarning)
            atom = build_atom(sc)
            if strict and atom.rwa_valid is False:
                raise InvariantError("gamma/omega0 < 1e-3 (rotating-wave regime)",
                                     f"gamma={atom.gamma:g}, omega0={atom.omega0:g}")
            notes = []
            state = grid = traj = None
            if sc.pulse is not None and {"trajectory", "spectrum", "temporal-profile"} & set(outs):
                grid = build_mode_grid(atom, sc.grid.bandwidth_factor, sc.grid.n_modes)
                state = build_state(sc, atom, grid)
                if state.warnings and strict:
                    raise InvariantError("no aliasing warnings in strict mode", "; ".join(state.warnings))
            if "temporal-profile" in outs:
                pr = sc.profile
                env = temporal_profile(state, np.linspace(pr.t_start, pr.t_end, pr.n))
                res.files.append(io.write_csv(out_dir / "temporal-profile.csv", io.PROFILE_COLUMNS,
                                              io.profile_rows(env), _meta(sc, "temporal-profile",
                                                                          {"state": state.label})))
            if "trajectory" in outs or ("spectrum" in outs and sc.window is not None):
                w = sc.window
                if w.dt is None:
                    cfg = PropagatorConfig.for_window(grid, w.t_start, w.t_end, sample_stride=w.sample_every)
                else:
                    cfg = PropagatorConfig(w.dt, w.t_start, w.t_end, w.sample_every)
                traj = propagate(state, atom, cfg)
                t_max, p_max = max_excitation(traj)
                notes.append(f"p_max={p_max:.6f} at t={t_max:.4f}, norm drift {traj.max_norm_drift:.2e}")
            extra = {"state": state.label, "grid": grid.describe()} if grid is not None else {}
            if "trajectory" in outs:
                extra_t = dict(extra, dt=repr(traj.meta["dt"]))
                res.files.append(io.write_csv(out_dir / "trajectory.csv", io.TRAJECTORY_COLUMNS,
                                              io.trajectory_rows(traj), _meta(sc, "trajectory", extra_t)))
            if "spectrum" in outs:
                amps = traj.final_modes if traj is not None else state.mode_amps
                when = f"t={sc.window.t_end!r}" if traj is not None else "prepared"
                res.files.append(io.write_csv(out_dir / "spectrum.csv", io.SPECTRUM_COLUMNS,
                                              io.spectrum_rows(grid, amps),
                                              _meta(sc, "spectrum", dict(extra, at=when))))
            if "variance-map" in outs:
                v = sc.variance
                rows = []
                for r in v.r:
                    for th in v.theta:
                        for t in np.linspace(v.t_start, v.t_end, v.n_t):
                            pt = analytic.FarFieldPoint(r, th, v.e_dot_etheta, float(t))
                            rows.append((t, r, th, analytic.far_field_variance(pt, atom)))
                res.files.append(io.write_csv(out_dir / "variance-map.csv", io.VARIANCE_COLUMNS, rows,
                                              _meta(sc, "variance-map", {"normalized": "true"})))
            if "optimization" in outs:
                payload, note = run_optimization(sc, atom)
                notes.append(note)
                res.files.append(io.write_json(out_dir / "optimization.json", payload,
                                               _meta(sc, "optimization")))
            res.summary = "; ".join(notes)
    except InvariantError as exc:
        res.status, res.error = EXIT_INVARIANT, str(exc)
    except RuntimeWarning as exc:
        res.status, res.error = EXIT_INVARIANT, f"invariant violated: no warnings in strict mode ({exc})"
    except (RuntimeError, OSError, ValueError, ArithmeticError) as exc:
        res.status, res.error = EXIT_RUNTIME, f"{type(exc).__name__}: {exc}"
    return res


def _execute(args, only: set[str] | None) -> int:
    if args.seedless:
        print("error: --seedless is reserved; this program uses no randomness", file=sys.stderr)
        return EXIT_CONFIG
    out_root = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "out")
    try:
        cfg = load_config(resolve_config(args.config))
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    scenarios = list(cfg.scenario)
    if only is not None:
        scenarios = [s for s in scenarios if s.optimize is not None]
        if not scenarios:
            print(f"config error: {args.config}: no scenario has an [optimize] table", file=sys.stderr)
            return EXIT_CONFIG

    def task(sc):
        return run_scenario(sc, out_root, strict=args.strict, only=only)

    threads = max(1, int(args.threads))
    if threads > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(task, scenarios))
    else:
        results = [task(sc) for sc in scenarios]
    status = EXIT_OK
    for r in results:
        if r.status == EXIT_OK:
            print(f"[ok] {r.name}: {len(r.files)} file(s)" + (f"; {r.summary}" if r.summary else ""))
            for f in r.files:
                print(f"     {f}")
        else:
            print(f"[exit {r.status}] {r.name}: {r.error}", file=sys.stderr)
        status = max(status, r.status)
    return status


def cmd_list(args) -> int:
    for name, path in bundled_scenarios().items():
        try:
            cfg = load_config(path)
            desc = "; ".join(s.description or s.name for s in cfg.scenario)
        except ConfigError as exc:
            desc = f"(invalid: {exc})"
        print(f"{name:<12} {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photoexcite", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"photoexcite {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run every scenario in a config"),
                        ("optimize", "run only the optimization of scenarios that declare one")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="TOML config path or bundled scenario name")
        p.add_argument("--out-dir", help=f"output root (default ${OUT_DIR_ENV} or ./out)")
        p.add_argument("--threads", type=int, default=1, help="scenarios run concurrently")
        p.add_argument("--seedless", action="store_true", help="reserved; rejected")
        p.add_argument("--strict", action="store_true", help="treat warnings as invariant violations")
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-scenarios":
        return cmd_list(args)
    return _execute(args, {"optimization"} if args.command == "optimize" else None)


if __name__ == "__main__":
    sys.exit(main())
