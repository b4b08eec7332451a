"""Command-line front end: subcommands over a key=value config file.

Every run writes its artifacts under a content-addressed subdirectory of the
output root (so identical configs reproduce identical trees), emits a JSON
report plus a text rendering, and exits 0 only when every claim in the
report passed. Exit codes: 1 config error, 2 solver non-convergence,
3 claim failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, dynamics, experiments, model, scalar
from .grid import SpectralGrid
from .groundstate import (SolverConfig, SolverError, StationKind, fiber_critical_points_scalars,
                          fiber_zeros, multiplier_identity_residual, project_masses,
                          solve_excited_state, solve_ground_state, solve_limit_system)
from .io import (ConfigError, SnapshotError, apply_overrides, load_config, load_snapshot,
                 read_history_csv, save_snapshot, write_history_csv)
from .model import ModelParams, ParameterError

KEY_HELP = """config keys (key = value per line, # comments):
  dim               space dimension N in {1,2,3}
  points            grid points per axis M (even, >= 8)
  box_half_length   half box length L; domain is [-L, L)^N
  p                 power nonlinearity exponent, 2+4/N <= p < 2N/(N-2)
  alpha             three-wave coupling strength (the paper's alpha > 0)
  a1, a2            mixed-mass radii: ||u1||^2+||u3||^2 = a1^2, ||u2||^2+||u3||^2 = a2^2
  dt                time step of the splitting integrator
  horizon           final time of an evolution or experiment
  seed              RNG seed for initializations and perturbations
  solver.step_size  descent step (preconditioned metric)
  solver.grad_tol   stationarity residual target
  solver.max_iters  iteration cap per solve
  experiment        experiment name for the generic runner
  output_dir        artifact root (default $THREEWAVE_OUTDIR or ./threewave-out)
  snapshot_every    steps between field snapshots during evolve (0 = none)
"""

SUBCOMMANDS = ("gn-constant", "groundstate", "excited", "limit-system", "fiber", "evolve",
               "dichotomy", "stability", "mass-collapse", "alpha-limits", "semitrivial",
               "report")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="threewave",
        description="numerical laboratory for the three-wave-interaction NLS system",
        epilog=KEY_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        if name == "report":
            sp.add_argument("report_path")
            sp.add_argument("--plots", action="store_true", help="render line plots of CSV artifacts")
        else:
            sp.add_argument("--config", required=True)
            sp.add_argument("overrides", nargs="*", metavar="key=value")
            if name == "evolve":
                sp.add_argument("--resume", help="snapshot to continue from")
    args = parser.parse_args(argv)

    try:
        if args.command == "report":
            return _cmd_report(args)
        cfg = apply_overrides(load_config(args.config), args.overrides)
        run_dir = _run_dir(cfg, args.command)
        report = _dispatch(args, cfg, run_dir)
        (run_dir / "report.json").write_text(report.to_json() + "\n")
        (run_dir / "report.txt").write_text(report.to_text() + "\n")
        print(report.to_text())
        print(f"artifacts in {run_dir}")
        return 0 if report.passed else 3
    except (ConfigError, ParameterError, experiments.ParameterRejection) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, scalar.ScalarSolveError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except (OSError, SnapshotError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


def _run_dir(cfg, command, extra: str = "") -> Path:
    root = Path(cfg.output_dir or os.environ.get("THREEWAVE_OUTDIR", "threewave-out"))
    token = json.dumps(cfg.echo(), sort_keys=True) + extra
    digest = hashlib.sha256(token.encode()).hexdigest()[:12]
    run_dir = root / f"{command}-{digest}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _scalar_grid(cfg) -> SpectralGrid:
    # scalar solitons have O(1) width: solve them on a box no wider than 40,
    # with enough points that their spectral tail clears the positivity band
    floor = {1: 1024, 2: 256, 3: 64}[cfg.dim]
    return SpectralGrid(cfg.dim, max(cfg.points, floor), min(cfg.box_half_length, 40.0))


def _gn_cache(cfg, run_dir):
    root = run_dir.parent
    return scalar.GNConstantCache(root / "gn_constants.txt")


def _constants(cfg, run_dir):
    cache = _gn_cache(cfg, run_dir)
    sg = _scalar_grid(cfg)
    gn_p = scalar.gn_constant(sg, cfg.p, cache)
    gn_3 = scalar.gn_constant(sg, 3.0, cache)
    return model.derive_constants(cfg.model_params(), gn_p, gn_3)


def _dispatch(args, cfg, run_dir):
    handlers = {
        "gn-constant": _cmd_gn_constant,
        "groundstate": _cmd_groundstate,
        "excited": _cmd_excited,
        "limit-system": _cmd_limit_system,
        "fiber": _cmd_fiber,
        "evolve": _cmd_evolve,
        "dichotomy": _cmd_dichotomy,
        "stability": _cmd_stability,
        "mass-collapse": _cmd_mass_collapse,
        "alpha-limits": _cmd_alpha_limits,
        "semitrivial": _cmd_semitrivial,
    }
    return handlers[args.command](args, cfg, run_dir)


# ---------------------------------------------------------------------------
# stationary-state commands
# ---------------------------------------------------------------------------


def _stationary_report(name, cfg, params, grid, result, constants=None):
    rep = experiments.ExperimentReport(name, cfg.echo())
    d = result.diagnostics
    rep.observe("scaling-identity-residual", abs(d.pohozaev), 1e-6 * (1.0 + d.kinetic), "<")
    rep.observe("multiplier-identity-residual",
                multiplier_identity_residual(params, grid, result), 1e-6, "<")
    rep.observe("mass-constraint-1", abs(d.mass1 - params.a1**2), 1e-10, "<")
    rep.observe("mass-constraint-2", abs(d.mass2 - params.a2**2), 1e-10, "<")
    if result.kind is StationKind.GROUND:
        rep.observe("level-negative", result.level, 0.0, "<")
        rep.observe("interaction-positive", d.interaction, 0.0, ">")
        rep.observe("multipliers-positive", min(result.lambda1, result.lambda2), 0.0, ">")
        if constants is not None and not math.isinf(constants.rho_star):
            rep.observe("kinetic-inside-well", d.kinetic, constants.rho_star**2, "<")
    elif result.kind is StationKind.EXCITED:
        rep.observe("level-positive", result.level, 0.0, ">")
        rep.observe("multipliers-positive", min(result.lambda1, result.lambda2), 0.0, ">")
    else:
        rep.observe("level-negative", result.level, 0.0, "<")
        rep.observe("limit-multiplier-identity",
                    abs(result.lambda1 * params.a1**2 + result.lambda2 * params.a2**2
                        - (3.0 - 0.5 * grid.dim) * d.interaction),
                    1e-6 * (1.0 + abs(d.interaction)), "<")
    rep.inputs["level"] = result.level
    rep.inputs["lambda1"] = result.lambda1
    rep.inputs["lambda2"] = result.lambda2
    rep.inputs["residual"] = result.residual
    rep.inputs["iterations"] = result.iterations
    return rep


def _cmd_gn_constant(args, cfg, run_dir):
    cache = _gn_cache(cfg, run_dir)
    sg = _scalar_grid(cfg)
    state = scalar.solve_scalar_ground_state(sg, cfg.p)
    value = scalar.gn_constant_from_state(state)
    cache.store(sg, cfg.p, value)
    rep = experiments.ExperimentReport("gn-constant", cfg.echo())
    rep.inputs["value"] = value
    rep.observe("optimizer-residual", state.residual, 1e-8, "<")
    rep.observe("constant-positive", value, 0.0, ">")
    print(f"C({cfg.dim}, {cfg.p:g}) = {value:.12g}")
    return rep


def _cmd_groundstate(args, cfg, run_dir):
    params, grid = cfg.model_params(), cfg.grid()
    consts = _constants(cfg, run_dir)
    result = solve_ground_state(params, grid, cfg.solver_config(), consts)
    rep = _stationary_report("groundstate", cfg, params, grid, result, consts)
    state = dynamics.EvolutionState(grid=grid, fields=result.fields)
    snap = run_dir / "groundstate.nls3"
    save_snapshot(snap, params, state)
    rep.artifacts.append(str(snap))
    return rep


def _cmd_excited(args, cfg, run_dir):
    params, grid = cfg.model_params(), cfg.grid()
    consts = _constants(cfg, run_dir)
    result = solve_excited_state(params, grid, cfg.solver_config(), consts)
    rep = _stationary_report("excited", cfg, params, grid, result)
    snap = run_dir / "excited.nls3"
    save_snapshot(snap, params, dynamics.EvolutionState(grid=grid, fields=result.fields))
    rep.artifacts.append(str(snap))
    return rep


def _cmd_limit_system(args, cfg, run_dir):
    params, grid = cfg.model_params(), cfg.grid()
    result = solve_limit_system(grid, cfg.a1, cfg.a2, cfg.solver_config())
    rep = _stationary_report("limit-system", cfg, params, grid, result)
    snap = run_dir / "limit_system.nls3"
    save_snapshot(snap, params, dynamics.EvolutionState(grid=grid, fields=result.fields))
    rep.artifacts.append(str(snap))
    return rep


def _cmd_fiber(args, cfg, run_dir):
    params, grid = cfg.model_params(), cfg.grid()
    rng = np.random.default_rng(cfg.seed)
    u = model.random_triple(grid, rng)
    if model.interaction(grid, u) < 0:
        u[2] = -u[2]
    u = project_masses(grid, u, cfg.a1, cfg.a2)
    scal = model.triple_scalars(params, grid, u)
    rep = experiments.ExperimentReport("fiber", cfg.echo())
    if params.is_mass_critical:
        from .groundstate import fiber_all_critical_points

        roots = fiber_all_critical_points(params, scal)
        for i, (s, curv) in enumerate(roots):
            print(f"critical point {i + 1}: s = {s:.12g} (curvature {curv:.6g})")
            rep.inputs[f"s_{i + 1}"] = s
        rep.observe("single-minimum-on-fiber", float(len(roots)), 1.0, "bool",
                    note="mass-critical fiber has one critical point")
        if roots:
            rep.observe("minimum-at-negative-level",
                        model.fiber_map(params, scal, roots[0][0]), 0.0, "<")
    else:
        s_lo, s_hi = fiber_critical_points_scalars(params, scal)
        zeros = fiber_zeros(params, scal)
        points = sorted([("s_u", s_lo), ("sigma_u", s_hi)] + [(n, z) for n, z in
                        zip(("c_u", "d_u"), zeros)], key=lambda kv: kv[1])
        for name, value in points:
            print(f"{name} = {value:.12g}")
            rep.inputs[name] = value
        rep.observe("fiber-point-ordering",
                    1.0 if [n for n, _ in points] == ["s_u", "c_u", "sigma_u", "d_u"] else 0.0,
                    1.0, "bool")
    return rep


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------


def _cmd_evolve(args, cfg, run_dir):
    params, grid = cfg.model_params(), cfg.grid()
    rep = experiments.ExperimentReport("evolve", cfg.echo())
    if getattr(args, "resume", None):
        snap_params, state = load_snapshot(args.resume)
        if snap_params != params or state.grid.config_key() != grid.config_key():
            raise ConfigError("snapshot header does not match the config")
        state.dt = cfg.dt
        state.step_index = int(round(state.time / cfg.dt))
        dynamics.diagnostics_now(params, state)
    else:
        consts = _constants(cfg, run_dir)
        ground = solve_ground_state(params, grid, cfg.solver_config(), consts)
        state = dynamics.EvolutionState(grid=grid, fields=ground.fields.copy(), dt=cfg.dt)
        dynamics.diagnostics_now(params, state)
    sample_every = 10
    next_snap = None
    if cfg.snapshot_every > 0:
        next_snap = ((state.step_index // cfg.snapshot_every) + 1) * cfg.snapshot_every

    t_end = cfg.horizon
    while state.time < t_end - 0.5 * cfg.dt:
        seg_end = t_end
        if next_snap is not None:
            seg_end = min(t_end, next_snap * cfg.dt)
        dynamics.evolve(params, grid, None, cfg.dt, seg_end, sample_every=sample_every,
                        state=state)
        if state.blown_up:
            break
        if next_snap is not None and state.step_index >= next_snap:
            snap = run_dir / f"state_{state.step_index:09d}.nls3"
            save_snapshot(snap, params, state)
            rep.artifacts.append(str(snap))
            next_snap += cfg.snapshot_every
    csv_path = run_dir / "history.csv"
    write_history_csv(csv_path, state.history)
    rep.artifacts.append(str(csv_path))
    rows = np.array(state.history, dtype=float)
    rep.observe("run-stayed-finite", 0.0 if state.blown_up else 1.0, 1.0, "bool")
    if not state.blown_up and len(rows) > 1:
        rep.observe("energy-drift", float(np.abs(rows[:, 1] - rows[0, 1]).max()),
                    1e-6 * (1.0 + abs(rows[0, 1])), "<")
        drift = max(float(np.abs(rows[:, 2] - rows[0, 2]).max()) / rows[0, 2],
                    float(np.abs(rows[:, 3] - rows[0, 3]).max()) / rows[0, 3])
        rep.observe("mass-drift", drift, 1e-10, "<")
    return rep


# ---------------------------------------------------------------------------
# experiment commands
# ---------------------------------------------------------------------------


def _cmd_stability(args, cfg, run_dir):
    params, grid = cfg.model_params(), cfg.grid()
    consts = _constants(cfg, run_dir)
    ground = solve_ground_state(params, grid, cfg.solver_config(), consts)
    return experiments.run_stability(params, grid, ground, perturbation_size=1e-2,
                                     horizon=cfg.horizon, dt=cfg.dt, seed=cfg.seed,
                                     inputs=cfg.echo())


def _cmd_dichotomy(args, cfg, run_dir):
    params, grid = cfg.model_params(), cfg.grid()
    consts = _constants(cfg, run_dir)
    excited = solve_excited_state(params, grid, cfg.solver_config(), consts)
    return experiments.run_dichotomy(params, grid, excited, s_list=(0.9, 1.1),
                                     horizon=cfg.horizon, dt=cfg.dt, inputs=cfg.echo(),
                                     artifact_dir=run_dir)


def _cmd_mass_collapse(args, cfg, run_dir):
    return experiments.run_mass_collapse(cfg.p, cfg.alpha, cfg.grid(), (0.4, 0.2, 0.1),
                                         _scalar_grid(cfg), cfg.solver_config(),
                                         inputs=cfg.echo())


def _cmd_alpha_limits(args, cfg, run_dir):
    return experiments.run_alpha_limits(cfg.p, cfg.a1, cfg.a2, cfg.grid(), (1.0, 0.5, 0.25),
                                        _scalar_grid(cfg), cfg.solver_config(),
                                        inputs=cfg.echo())


def _cmd_semitrivial(args, cfg, run_dir):
    return experiments.run_semitrivial_limit(cfg.p, cfg.alpha, cfg.a1, cfg.grid(),
                                             (0.3, 0.15, 0.075), _scalar_grid(cfg),
                                             cfg.solver_config(), inputs=cfg.echo())


# ---------------------------------------------------------------------------
# report rendering
# ---------------------------------------------------------------------------


def _cmd_report(args) -> int:
    path = Path(args.report_path)
    payload = json.loads(path.read_text())
    print(f"experiment: {payload['name']}")
    print(f"overall: {'PASS' if payload['passed'] else 'FAIL'}")
    for o in payload["observations"]:
        mark = "pass" if o["passed"] else "FAIL"
        note = f"  ({o['note']})" if o.get("note") else ""
        print(f"  [{mark}] {o['claim']}: {o['measured']:.6g} {o['op']} {o['threshold']:.6g}{note}")
    if args.plots:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        for artifact in payload.get("artifacts", []):
            if not artifact.endswith(".csv"):
                continue
            rows = read_history_csv(artifact)
            fig, axes = plt.subplots(2, 3, figsize=(13, 7))
            for ax, (col, label) in zip(axes.ravel(),
                                        [(1, "E"), (2, "Q1"), (3, "Q2"), (4, "P"),
                                         (5, "kinetic"), (6, "I")]):
                ax.plot(rows[:, 0], rows[:, col])
                ax.set_xlabel("t")
                ax.set_ylabel(label)
            fig.tight_layout()
            out = Path(artifact).with_suffix(".png")
            fig.savefig(out, dpi=110)
            plt.close(fig)
            print(f"plot written: {out}")
    return 0 if payload["passed"] else 3


if __name__ == "__main__":
    sys.exit(main())
