"""Command-line front end.

Verbs:
  curves       optimal error rate vs inconclusive rate, per state count
  sweep        analytic / montecarlo / optical schedule sweeps (CSV)
  bloch        reconstructed separated states: radius, azimuths, visibilities
  fitdemo      synthetic patterns plus their fringe fits (CSV + JSON)
  calibration  gray-level table echo with the resolved separation angles
  oracle       brute-force optimality check (JSON report, PASS/FAIL line)

Outputs are written atomically (write-then-rename).  Exit codes: 0 on
success, 2 on configuration/validation errors, 3 on runtime failures
(including a FAIL verdict from the oracle gate).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .experiment import (
    RunConfig,
    point_model,
    run,
    sweep,
    sweep_rows_to_csv,
)
from .imperfections import CalibrationTable, theta_from_gray
from .optics import (
    fit_pattern,
    fit_record_json,
    intensity_pattern,
    pattern_to_csv,
    phase_correction,
    reconstruct_density,
)
from .oracle import GridSpec, brute_force_pe
from .states import bloch
from .strategy import pe_min, q_mc

OUTPUT_DIR_ENV_VAR = "FRIOSIM_OUT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _out_dir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    env = os.environ.get(OUTPUT_DIR_ENV_VAR)
    return Path(env) if env else Path(".")


def _set_by_path(doc: dict, dotted: str, value: str) -> None:
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = json.loads(value) if _looks_like_json(value) else value


def _looks_like_json(value: str) -> bool:
    try:
        json.loads(value)
        return True
    except json.JSONDecodeError:
        return False


def _config_from_args(args, mode_override: str | None = None) -> RunConfig:
    with open(args.config) as fh:
        doc = json.load(fh)
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _set_by_path(doc, key, value)
    if args.seed is not None:
        doc["seed"] = args.seed
    mode = mode_override if mode_override is not None else getattr(args, "mode", None)
    if mode:
        doc["mode"] = mode
    return RunConfig.from_json_dict(doc)


def _cmd_curves(args) -> int:
    ns = [int(v) for v in args.n_list.split(",")]
    theta = math.radians(args.theta_deg)
    qmc = q_mc(theta)
    lines = ["N,Q,P_e_min"]
    for n in ns:
        for q in np.linspace(0.0, qmc, args.q_points):
            lines.append(f"{n},{q:.12g},{pe_min(n, float(q), qmc):.12g}")
    _atomic_write(_out_dir(args) / "curves.csv", "\n".join(lines) + "\n")
    print(f"wrote {_out_dir(args) / 'curves.csv'} ({len(lines) - 1} rows)")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    modes = tuple(args.mode.split(",")) if args.mode else None
    config = _config_from_args(args, mode_override=modes[0] if modes else None)
    rows = sweep(config, modes=modes or (config.mode,))
    _atomic_write(_out_dir(args) / "sweep.csv", sweep_rows_to_csv(rows))
    print(f"wrote {_out_dir(args) / 'sweep.csv'} ({len(rows)} rows)")
    return EXIT_OK


def _bloch_entries(config: RunConfig):
    if config.mode == "montecarlo":
        raise ValueError("bloch needs patterns; use mode=analytic (noiseless) or optical")
    entries = []
    for t in range(len(config.separation_schedule)):
        theta_out, _, _ = config.resolve_point(t)
        point = _single_point(config, t)
        if config.mode == "analytic":
            model = point_model(config, t)
            pats = [
                intensity_pattern(model.success_states[j], config.optics, 1.0, state_index=j)
                for j in range(config.n_states)
            ]
        else:
            pats = [p for p in run(point) if p.branch == "success"]
            pats.sort(key=lambda p: p.state_index)
        fits = [fit_pattern(p, config.optics) for p in pats]
        phi_corr, corrected = phase_correction(fits, config.n_states)
        states = []
        for j, (fit, phase) in enumerate(zip(fits, corrected)):
            rho = reconstruct_density(theta_out, fit, phi_corr)
            b = bloch(rho)
            states.append(
                {
                    "state": j,
                    "visibility": fit.visibility,
                    "azimuth_rad": phase % (2.0 * math.pi),
                    "bloch": [b.x, b.y, b.z],
                }
            )
        entries.append(
            {
                "theta_out_deg": math.degrees(theta_out),
                "parallel_radius": math.sin(2.0 * theta_out),
                "phi_corr": phi_corr,
                "states": states,
            }
        )
    return entries


def _single_point(config: RunConfig, t: int) -> RunConfig:
    from dataclasses import replace

    return replace(config, separation_schedule=(config.separation_schedule[t],))


def _cmd_bloch(args) -> int:
    config = _config_from_args(args)
    doc = {
        "n_states": config.n_states,
        "theta_deg": config.theta_deg,
        "mode": config.mode,
        "entries": _bloch_entries(config),
    }
    _atomic_write(_out_dir(args) / "bloch.json", _json_text(doc))
    print(f"wrote {_out_dir(args) / 'bloch.json'}")
    return EXIT_OK


def _cmd_fitdemo(args) -> int:
    config = _config_from_args(args)
    out = _out_dir(args)
    point = _single_point(config, 0)
    theta_out, _, _ = config.resolve_point(0)
    if config.mode == "analytic":
        model = point_model(config, 0)
        pats = []
        for j in range(config.n_states):
            pats.append(
                intensity_pattern(
                    model.success_states[j], config.optics, float(model.p_success[j]),
                    state_index=j, branch="success",
                )
            )
            pats.append(
                intensity_pattern(
                    model.failure_states[j], config.optics, float(1 - model.p_success[j]),
                    state_index=j, branch="failure",
                )
            )
    elif config.mode == "optical":
        pats = run(point)
    else:
        raise ValueError("fitdemo needs patterns; use mode=analytic or optical")

    for p in pats:
        name = f"pattern_state{p.state_index}_{p.branch}.csv"
        tmp = out / name
        out.mkdir(parents=True, exist_ok=True)
        pattern_to_csv(p, tmp)
    succ = sorted((p for p in pats if p.branch == "success"), key=lambda p: p.state_index)
    fits = [fit_pattern(p, config.optics) for p in succ]
    phi_corr, corrected = phase_correction(fits, config.n_states)
    records = []
    for j, (fit, phase) in enumerate(zip(fits, corrected)):
        rho = reconstruct_density(theta_out, fit, phi_corr)
        rec = fit_record_json(fit, rho, phase_rad=phase)
        rec["state"] = j
        records.append(rec)
    _atomic_write(out / "fits.json", _json_text({"phi_corr": phi_corr, "fits": records}))
    print(f"wrote {len(pats)} pattern files and {out / 'fits.json'}")
    return EXIT_OK


def _cmd_calibration(args) -> int:
    table = CalibrationTable.from_csv(args.table) if args.table else CalibrationTable.default()
    theta = math.radians(args.theta_deg)
    lines = ["gl,p_v,phase_rad,epsilon,theta_out_deg"]
    for gl, pv, ph, eps in zip(table.gl, table.p_v, table.phase, table.epsilon):
        tdeg = math.degrees(theta_from_gray(float(gl), theta, table))
        lines.append(
            f"{gl:.12g},{pv:.12g},{ph:.12g},{eps:.12g},{tdeg:.12g}"
        )
    _atomic_write(_out_dir(args) / "calibration.csv", "\n".join(lines) + "\n")
    print(f"wrote {_out_dir(args) / 'calibration.csv'}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    theta = math.radians(args.theta_deg)
    qmc = q_mc(theta)
    qs = [qmc if v.strip().lower() == "qmc" else float(v) for v in args.q_targets.split(",")]
    spec = GridSpec(points=args.grid_points, refinements=args.refinements)
    reports = []
    all_ok = True
    for q in qs:
        rep = brute_force_pe(args.n, theta, q, resolution=spec, backend=args.backend)
        ok = -1e-6 <= rep.gap <= args.gap_threshold
        all_ok &= ok
        reports.append(rep.to_json_dict() | {"pass": ok})
        print(
            f"n={args.n} q={q:.4f} pe_formula={rep.pe_formula:.6f} "
            f"pe_bruteforce={rep.pe_bruteforce:.6f} gap={rep.gap:+.2e} "
            f"{'PASS' if ok else 'FAIL'}"
        )
    _atomic_write(
        _out_dir(args) / "oracle.json",
        _json_text({"gap_threshold": args.gap_threshold, "reports": reports}),
    )
    print(f"wrote {_out_dir(args) / 'oracle.json'}")
    if not all_ok:
        print("oracle gate: FAIL", file=sys.stderr)
        return EXIT_RUNTIME
    print("oracle gate: PASS")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, config_required: bool = False) -> None:
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_DIR_ENV_VAR} or .)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry by dotted path (repeatable)")
    if config_required:
        p.add_argument("--config", required=True, help="RunConfig JSON document")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="friosim",
        description="Fixed-inconclusive-rate discrimination of symmetric qubit states",
    )
    parser.add_argument("--version", action="version", version=f"friosim {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("curves", help="optimal error rate vs inconclusive rate")
    p.add_argument("--n-list", default="2,3,5,7")
    p.add_argument("--theta-deg", type=float, default=19.5)
    p.add_argument("--q-points", type=int, default=201)
    _add_common(p)
    p.set_defaults(func=_cmd_curves)

    p = sub.add_parser("sweep", help="schedule sweep to CSV")
    _add_common(p, config_required=True)
    p.add_argument("--mode", help="comma-separated subset of analytic,montecarlo,optical")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("bloch", help="reconstructed separated states to JSON")
    _add_common(p, config_required=True)
    p.add_argument("--mode", help="analytic (noiseless) or optical")
    p.set_defaults(func=_cmd_bloch)

    p = sub.add_parser("fitdemo", help="patterns + fringe fits for the first schedule entry")
    _add_common(p, config_required=True)
    p.add_argument("--mode", help="analytic (noiseless) or optical")
    p.set_defaults(func=_cmd_fitdemo)

    p = sub.add_parser("calibration", help="echo a calibration table with resolved angles")
    p.add_argument("--table", help="calibration CSV (default: packaged table)")
    p.add_argument("--theta-deg", type=float, default=19.5)
    _add_common(p)
    p.set_defaults(func=_cmd_calibration)

    p = sub.add_parser("oracle", help="brute-force optimality regression")
    p.add_argument("--n", type=int, default=2, choices=(2, 3))
    p.add_argument("--theta-deg", type=float, default=19.5)
    p.add_argument("--q-targets", default="0,0.2,0.4,0.6,qmc",
                   help="comma-separated rates; 'qmc' expands to the critical rate")
    p.add_argument("--grid-points", type=int, default=201)
    p.add_argument("--refinements", type=int, default=1)
    p.add_argument("--gap-threshold", type=float, default=2e-3)
    p.add_argument("--backend", choices=("numba", "numpy"))
    _add_common(p)
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
