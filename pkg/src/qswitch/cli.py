"""Command-line front end.

Subcommands: simulate, metrics, converge, zeno.  Exit codes: 0 success,
2 invalid input, 3 integrator failure, 4 the run never switched.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace

from .bench import (Scenario, convergence_study, metrics_from_csv,
                    run_scenario, zeno_sweep)
from .dynamics import IntegrationConfig, IntegrationError
from .models import (DriveAmplitudes, NoSwitchError, SwitchParameters,
                     PRESET_NAMES, preset)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INTEGRATOR = 3
EXIT_NO_SWITCH = 4

_PARAM_KEYS = {f.name for f in fields(SwitchParameters)}
_DRIVE_KEYS = {f.name for f in fields(DriveAmplitudes)}
_CONFIG_KEYS = {f.name for f in fields(IntegrationConfig)}
_INT_KEYS = {"n_power", "n_set", "n_reset", "record_stride"}
_BOOL_KEYS = {"truncation_check"}


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` file; keys mirror the parameter dataclasses.

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    values: dict[str, object] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key in _DRIVE_KEYS:
                values[key] = complex(raw)
            elif key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _BOOL_KEYS:
                if raw.lower() not in ("true", "false", "0", "1"):
                    raise ValueError(f"{path}:{lineno}: bad boolean {raw!r}")
                values[key] = raw.lower() in ("true", "1")
            elif key == "method":
                values[key] = raw
            elif key in _PARAM_KEYS | _CONFIG_KEYS:
                values[key] = float(raw)
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def _apply_overrides(params: SwitchParameters, drives: DriveAmplitudes,
                     config: IntegrationConfig, overrides: dict):
    p_kw = {k: v for k, v in overrides.items() if k in _PARAM_KEYS}
    d_kw = {k: v for k, v in overrides.items() if k in _DRIVE_KEYS}
    c_kw = {k: v for k, v in overrides.items() if k in _CONFIG_KEYS}
    if p_kw:
        params = replace(params, **p_kw)
    if d_kw:
        drives = replace(drives, **d_kw)
    if c_kw:
        config = replace(config, **c_kw)
    return params, drives, config


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qswitch",
        description="Cavity-QED set-reset flip-flop switch simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate one scenario to CSV")
    sim.add_argument("--model", choices=("primary", "intermediate", "limit"),
                     default="primary")
    sim.add_argument("--scenario", choices=("HOLD", "SET", "RESET", "RACE"),
                     required=True, help="operating mode")
    sim.add_argument("--init", default="g", help="initial atomic level (g/h/s)")
    sim.add_argument("--preset", default="paper-fig2", choices=PRESET_NAMES)
    sim.add_argument("--config", help="flat key = value parameter file")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--t-final", type=float, help="override integration horizon")
    sim.add_argument("--dt", type=float, help="override integrator step")

    met = sub.add_parser("metrics", help="switch metrics from a trajectory CSV")
    met.add_argument("--in", dest="infile", required=True)
    met.add_argument("--wavelength-nm", type=float, default=1000.0)

    conv = sub.add_parser("converge", help="strong-coupling convergence study")
    conv.add_argument("--study", choices=("k", "gamma"), required=True)
    conv.add_argument("--scales", required=True,
                      help="comma-separated increasing scale values")
    conv.add_argument("--preset", default="paper-fig2", choices=PRESET_NAMES)
    conv.add_argument("--t-final", type=float, default=50.0)
    conv.add_argument("--out", required=True)

    zen = sub.add_parser("zeno", help="RESET switching time vs POWER amplitude")
    zen.add_argument("--betas", required=True,
                     help="comma-separated increasing POWER amplitudes")
    zen.add_argument("--alpha-r", type=float, default=None,
                     help="RESET amplitude (default: preset value)")
    zen.add_argument("--preset", default="paper-fig2", choices=PRESET_NAMES)
    zen.add_argument("--t-final", type=float, default=600.0)
    zen.add_argument("--out", required=True)
    return ap


def _cmd_simulate(args) -> int:
    params, drives = preset(args.preset)
    dt = 2e-3 if args.model == "primary" else 1e-2
    config = IntegrationConfig(dt=dt, record_stride=max(1, int(round(0.5 / dt))))
    if args.config:
        overrides = parse_config_file(args.config)
        params, drives, config = _apply_overrides(params, drives, config, overrides)
    if args.t_final is not None:
        config = replace(config, t_final=args.t_final)
    if args.dt is not None:
        config = replace(config, dt=args.dt,
                         record_stride=max(1, int(round(0.5 / args.dt))))
    scenario = Scenario.from_preset(args.preset, args.model, args.scenario,
                                    init=args.init, config=config,
                                    params=params, drives=drives)
    traj = run_scenario(scenario, out_path=args.out)
    d = traj.diagnostics
    print(f"wrote {args.out}: {len(traj.times)} samples, "
          f"trace drift {d.max_trace_drift:.2e}, "
          f"min eigenvalue {d.min_eigenvalue:.2e}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    m = metrics_from_csv(args.infile, wavelength_nm=args.wavelength_nm)
    for name in ("contrast_ratio", "power_gain", "switch_time_90",
                 "photon_cost", "energy_joules"):
        v = getattr(m, name)
        print(f"{name} = {'n/a' if v is None else f'{v:.6g}'}")
    if m.energy_joules is not None:
        print(f"energy_attojoules = {m.energy_joules * 1e18:.6g}")
    return EXIT_OK


def _cmd_converge(args) -> int:
    params, drives = preset(args.preset)
    scales = [float(x) for x in args.scales.split(",")]
    rows = convergence_study(params, drives, scales, args.study,
                             t_final=args.t_final, out_path=args.out)
    for scale, dist in rows:
        print(f"scale {scale:g}: distance {dist:.6e}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_zeno(args) -> int:
    params, drives = preset(args.preset)
    alpha_r = drives.alpha_r if args.alpha_r is None else args.alpha_r
    betas = [float(x) for x in args.betas.split(",")]
    rows = zeno_sweep(betas, alpha_r, params=params, t_final=args.t_final,
                      out_path=args.out)
    for b, t90 in rows:
        print(f"beta {b:g}: t90 {'no-switch' if t90 is None else f'{t90:.6g}'}")
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {"simulate": _cmd_simulate, "metrics": _cmd_metrics,
             "converge": _cmd_converge, "zeno": _cmd_zeno}


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NoSwitchError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NO_SWITCH
    except IntegrationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INTEGRATOR
    except (ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
