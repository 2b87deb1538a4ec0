"""Command-line front end.

    consensim run <scenario> [--out DIR] [--require-consensus] [--no-plots]
                             [--dt X] [--t-end X]
    consensim predict <scenario>
    consensim validate <scenario>

<scenario> is a JSON file path or a bundled name (fig2a, fig2b, fig3a,
fig3b). Exit codes: 0 success, 1 parse/validation failure, 2 integration
blow-up, 3 consensus required but not achieved, 4 prediction inapplicable.

``run`` writes trajectory.csv (17 significant digits, byte-identical across
runs of the same scenario), report.json, and unless --no-plots two SVG
plots. Plot failures never fail the run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (conservation_drift, conserved_series, default_tracking_weight,
                       detect_consensus, lyapunov_series, predict_consensus)
from .dynamics import (IntegratorSettings, Mode, Scenario, Trajectory, simulate,
                       validate_scenario)
from .errors import HypothesisViolated, NonFiniteState, ParseError, ValidationFailed
from .scenario_io import bundled_scenario_path, list_bundled, parse_scenario

MONOTONE_SLACK = 1e-9


def resolve_scenario_path(ref: str) -> Path:
    """A real file path wins; otherwise try the bundled scenario names."""
    path = Path(ref)
    if path.is_file():
        return path
    if ref in list_bundled():
        return bundled_scenario_path(ref)
    raise ParseError(f"no scenario file {ref!r} and no bundled scenario of that name "
                     f"(bundled: {', '.join(list_bundled())})")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_trajectory_csv(traj: Trajectory, scenario: Scenario, path) -> None:
    """One row per sample: time, agent positions, agent velocities, leader
    state when present, the energy value, and the conserved quantity when
    the scenario admits one."""
    n, dims = scenario.n_agents, scenario.n_dims

    def agent_cols(prefix: str) -> list[str]:
        if dims == 1:
            return [f"{prefix}_{i + 1}" for i in range(n)]
        return [f"{prefix}_{i + 1}_{l + 1}" for i in range(n) for l in range(dims)]

    def leader_cols(prefix: str) -> list[str]:
        if dims == 1:
            return [f"{prefix}_L"]
        return [f"{prefix}_L_{l + 1}" for l in range(dims)]

    header = ["t"] + agent_cols("p") + agent_cols("q")
    has_leader = scenario.mode is Mode.LEADER
    if has_leader:
        header += leader_cols("p") + leader_cols("q")

    energy = None
    try:
        energy = [v for _, v in lyapunov_series(traj, scenario)]
        header.append("V")
    except HypothesisViolated as exc:
        print(f"warning: energy column omitted: {exc}", file=sys.stderr)

    conserved = None
    try:
        conserved = [vec for _, vec in conserved_series(traj, scenario)]
        header += [f"alpha_{l + 1}" for l in range(dims)]
    except HypothesisViolated:
        pass

    lines = [",".join(header)]
    for idx, s in enumerate(traj.samples):
        row = [_fmt(s.t)]
        row += [_fmt(v) for v in s.p.ravel()]
        row += [_fmt(v) for v in s.q.ravel()]
        if has_leader:
            row += [_fmt(v) for v in s.leader.p]
            row += [_fmt(v) for v in s.leader.q]
        if energy is not None:
            row.append(_fmt(energy[idx]))
        if conserved is not None:
            row += [_fmt(v) for v in conserved[idx]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def build_report(traj: Trajectory, scenario: Scenario, scenario_path: str) -> dict:
    """Everything the run learned, JSON-shaped."""
    validation = validate_scenario(scenario)
    report_consensus = detect_consensus(traj, scenario.pos_tol, scenario.vel_tol, scenario)

    lyap: dict = {"available": False, "leader_weight": None, "reason": None}
    try:
        weight = default_tracking_weight(scenario) if scenario.mode is Mode.LEADER else None
        series = np.array([v for _, v in lyapunov_series(traj, scenario, weight)])
        steps = np.diff(series)
        slack = MONOTONE_SLACK * (1.0 + series[:-1])
        lyap = {
            "available": True,
            "leader_weight": weight,
            "initial": float(series[0]),
            "final": float(series[-1]),
            "nonincreasing": bool(np.all(steps <= slack)),
            "max_step_increase": float(steps.max()) if len(steps) else 0.0,
            "slack_factor": MONOTONE_SLACK,
            "reason": None,
        }
    except HypothesisViolated as exc:
        lyap["reason"] = str(exc)

    conservation: dict = {"applicable": False, "max_relative_drift": None, "reason": None}
    try:
        conservation = {"applicable": True,
                        "max_relative_drift": conservation_drift(traj, scenario),
                        "reason": None}
    except HypothesisViolated as exc:
        conservation["reason"] = str(exc)

    predicted = report_consensus.predicted_value
    prediction_error = None
    if predicted is not None:
        prediction_error = float(np.abs(report_consensus.observed_value - predicted).max())

    assumptions = validation.assumptions
    return {
        "scenario": {
            "path": str(scenario_path),
            "description": scenario.description,
            "fingerprint": traj.scenario_fingerprint,
            "mode": scenario.mode.value,
            "n_agents": scenario.n_agents,
            "n_dims": scenario.n_dims,
            "integrator": dataclasses.asdict(scenario.integrator),
        },
        "validation": {
            "errors": list(validation.errors),
            "warnings": list(validation.warnings),
            "assumptions": {
                "all_passed": assumptions.all_passed,
                "checks": [dataclasses.asdict(c) for c in assumptions.checks],
                "sector": [float(v) for v in assumptions.sector],
                "gain_bounds": [float(v) for v in assumptions.gain_bounds],
            },
        },
        "consensus": {
            "achieved": report_consensus.achieved,
            "t_consensus": report_consensus.t_consensus,
            "final_spread": report_consensus.final_spread,
            "final_speed": report_consensus.final_speed,
            "observed_value": _jsonable(report_consensus.observed_value),
            "predicted_value": _jsonable(predicted),
            "prediction_abs_error": prediction_error,
            "prediction_reason": report_consensus.prediction_reason,
            "pos_tol": report_consensus.pos_tol,
            "vel_tol": report_consensus.vel_tol,
        },
        "lyapunov": lyap,
        "conservation": conservation,
    }


def write_plots(traj: Trajectory, scenario: Scenario, out_dir: Path) -> list[Path]:
    """Position and velocity SVGs; any failure is reported, never raised."""
    written: list[Path] = []
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        times = traj.times()
        has_leader = scenario.mode is Mode.LEADER
        prediction = predict_consensus(scenario)
        for attr, leader_attr, stem, ylabel in (
                ("positions", "leader_positions", "positions", "position"),
                ("velocities", "leader_velocities", "velocities", "velocity")):
            fig, ax = plt.subplots(figsize=(7.0, 4.2))
            data = getattr(traj, attr)()
            for i in range(scenario.n_agents):
                for l in range(scenario.n_dims):
                    suffix = f"_{l + 1}" if scenario.n_dims > 1 else ""
                    ax.plot(times, data[:, i, l], lw=1.2, label=f"agent {i + 1}{suffix}")
            if has_leader:
                ldata = getattr(traj, leader_attr)()
                for l in range(scenario.n_dims):
                    ax.plot(times, ldata[:, l], "k--", lw=1.6, label="leader")
            if stem == "positions" and prediction.available:
                for v in np.atleast_1d(prediction.value):
                    ax.axhline(v, color="gray", ls=":", lw=1.0)
            ax.set_xlabel("t")
            ax.set_ylabel(ylabel)
            ax.legend(loc="best", fontsize=8, ncol=2)
            fig.tight_layout()
            target = out_dir / f"{stem}.svg"
            fig.savefig(target)
            plt.close(fig)
            written.append(target)
    except Exception as exc:  # plotting must never fail the run
        print(f"warning: plotting failed: {exc}", file=sys.stderr)
    return written


def cmd_run(args) -> int:
    path = resolve_scenario_path(args.scenario)
    scenario = parse_scenario(path)
    if args.dt is not None or args.t_end is not None:
        settings = scenario.integrator
        settings = IntegratorSettings(
            dt=args.dt if args.dt is not None else settings.dt,
            t_end=args.t_end if args.t_end is not None else settings.t_end,
            record_every=settings.record_every)
        scenario = dataclasses.replace(scenario, integrator=settings)

    trajectory = simulate(scenario)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(trajectory, scenario, out_dir / "trajectory.csv")
    report = build_report(trajectory, scenario, str(path))
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if not args.no_plots:
        write_plots(trajectory, scenario, out_dir)

    consensus = report["consensus"]
    if consensus["achieved"]:
        print(f"consensus achieved from t={consensus['t_consensus']:g} "
              f"(final spread {consensus['final_spread']:.3e}, "
              f"final speed {consensus['final_speed']:.3e})")
    else:
        print(f"consensus not achieved by t={scenario.integrator.t_end:g} "
              f"(final spread {consensus['final_spread']:.3e}, "
              f"final speed {consensus['final_speed']:.3e})")
    observed = " ".join(f"{v:.6f}" for v in np.atleast_1d(consensus["observed_value"]))
    print(f"observed value: {observed}")
    if consensus["predicted_value"] is not None:
        predicted = " ".join(f"{v:.6f}" for v in np.atleast_1d(consensus["predicted_value"]))
        print(f"predicted value: {predicted} (abs error {consensus['prediction_abs_error']:.3e})")
    print(f"outputs in {out_dir}")
    if args.require_consensus and not consensus["achieved"]:
        return 3
    return 0


def cmd_predict(args) -> int:
    scenario = parse_scenario(resolve_scenario_path(args.scenario))
    prediction = predict_consensus(scenario)
    if not prediction.available:
        print(f"no closed-form consensus value: {prediction.reason}", file=sys.stderr)
        return 4
    print(" ".join(f"{v:.6f}" for v in np.atleast_1d(prediction.value)))
    return 0


def cmd_validate(args) -> int:
    scenario = parse_scenario(resolve_scenario_path(args.scenario), validate=False)
    result = validate_scenario(scenario)
    for message in result.errors:
        print(f"error: {message}")
    for message in result.warnings:
        print(f"warning: {message}")
    report = result.assumptions
    print(f"sector: [{report.sector[0]:.6g}, {report.sector[1]:.6g}]")
    print(f"gain bounds: [{report.gain_bounds[0]:.6g}, {report.gain_bounds[1]:.6g}]")
    print("valid" if result.ok else "invalid")
    return 0 if result.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensim",
        description="Simulate and analyze second-order consensus scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate a scenario and write outputs")
    run.add_argument("scenario", help="scenario JSON path or bundled name")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--require-consensus", action="store_true",
                     help="exit 3 unless consensus is achieved")
    run.add_argument("--no-plots", action="store_true", help="skip SVG plots")
    run.add_argument("--dt", type=float, default=None, help="override integrator dt")
    run.add_argument("--t-end", type=float, default=None, help="override integration horizon")
    run.set_defaults(func=cmd_run)

    predict = sub.add_parser("predict", help="print the closed-form consensus value")
    predict.add_argument("scenario", help="scenario JSON path or bundled name")
    predict.set_defaults(func=cmd_predict)

    validate = sub.add_parser("validate", help="check a scenario without simulating")
    validate.add_argument("scenario", help="scenario JSON path or bundled name")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonFiniteState as exc:
        detail = f" (last good t={exc.last_good_time:g})" if exc.last_good_time is not None else ""
        print(f"integration failed: {exc}{detail}", file=sys.stderr)
        return 2
    except HypothesisViolated as exc:
        print(f"no closed-form consensus value: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
