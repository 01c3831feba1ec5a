"""Command-line entry points.

Exit codes: 0 success, 2 configuration problems, 3 numerical failures
(divergence, missing barrier, corrupt checkpoints), 4 clock readings
outside the invertible calibration branch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .clock import ClockParams, free_expectation_curve
from .errors import (CalibrationRangeError, CheckpointError,
                     ConfigurationError, NumericalError)
from .grid import AtomParams, build_grid
from .groundstate import solve_ground_state
from .runner import RunConfig, run_single, run_sweep, run_time_of_flight

log = logging.getLogger("tunnelclock")


def _load_config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "e0", None) is not None:
        overrides["field.e0"] = args.e0
    if getattr(args, "gamma", None) is not None:
        overrides["field.gamma"] = args.gamma
    if getattr(args, "z", None) is not None:
        overrides["atom.z"] = args.z
    if args.config:
        return RunConfig.from_file(args.config, overrides)
    return RunConfig.from_mapping(overrides)


def _add_common(p, with_field=True):
    p.add_argument("--config", help="flat 'section.key = value' config file")
    p.add_argument("--out", required=True, help="output directory")
    if with_field:
        p.add_argument("--e0", help="peak field strength override")
        p.add_argument("--gamma", help="Keldysh parameter override")
        p.add_argument("--z", help="nuclear charge override")


def _cmd_ground(args) -> int:
    cfg = _load_config(args)
    grid = build_grid(cfg["grid.nx"], cfg["grid.ny"],
                      cfg["grid.x_min"], cfg["grid.x_max"],
                      cfg["grid.y_min"], cfg["grid.y_max"])
    atom = AtomParams(z=cfg["atom.z"])
    result = solve_ground_state(
        grid, atom, dtau=cfg["ground.dtau"], tol=cfg["ground.tol"],
        max_iter=cfg["ground.max_iter"], krylov_dim=cfg["ground.krylov_dim"],
        krylov_tol=cfg["prop.krylov_tol"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.to_csv(out / "ground_log.csv")
    # radial profile along the +x row closest to the axis, for decay checks
    j = int(abs(grid.y).argmin())
    i0 = int(abs(grid.x).argmin())
    with open(out / "ground_profile.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("x,density\n")
        dens = (result.field.values[:, j].real ** 2
                + result.field.values[:, j].imag ** 2)
        for i in range(i0, grid.nx):
            fh.write("%.17g,%.17g\n" % (grid.x[i], dens[i]))
    print(f"ground state energy {result.energy:.10g} "
          f"({result.iterations} iterations, residual {result.residual:.3g})")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    result = run_single(cfg, args.out)
    rep = result.report
    print(f"T = {rep.transmitted:.6g}  R = {rep.reflected:.6g}")
    print(f"tau_d' = {rep.tau_d_prime:.6g}  tau_d = {rep.tau_d:.6g}  "
          f"tau_t = {rep.tau_t:.6g}  tau_r = {rep.tau_r:.6g}  "
          f"tau_k = {rep.tau_k:.6g}")
    for msg in rep.warnings:
        print(f"warning: {msg}")
    print(f"results in {result.out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    result = run_sweep(cfg, args.out)
    for name, exponent in result.exponents.items():
        print(f"{name} ~ E0^{exponent:.4g}")
    print(f"results in {result.out_dir}")
    return 0


def _cmd_calibration(args) -> int:
    clock = ClockParams(n_levels=args.n_levels, dt_clock=args.dt_clock)
    curve = free_expectation_curve(clock, args.samples_per_dt)
    curve.to_csv(args.out)
    print(f"calibration table ({curve.t.size} samples, invertible up to "
          f"t = {curve.monotone_hi:.6g}) written to {args.out}")
    return 0


def _cmd_tof(args) -> int:
    cfg = _load_config(args)
    if args.k0 is not None:
        cfg = cfg.replaced(tof__k0=args.k0)
    if args.length is not None:
        cfg = cfg.replaced(tof__length=args.length)
    result = run_time_of_flight(cfg, args.out)
    err = abs(result.measured - result.expected) / result.expected
    print(f"measured {result.measured:.6g}, expected {result.expected:.6g} "
          f"({100.0 * err:.2f}% off)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tunnelclock",
        description="Quantum-clock timing of tunnel ionization in 2D",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", help="solve and log the field-free ground state")
    _add_common(p, with_field=False)
    p.add_argument("--z", help="nuclear charge override")
    p.set_defaults(fn=_cmd_ground)

    p = sub.add_parser("run", help="one timing measurement at fixed field")
    _add_common(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("sweep", help="field-strength sweep with power-law fits")
    _add_common(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("calibration-curve", help="tabulate the clock response f(t)")
    p.add_argument("--n-levels", type=int, default=3)
    p.add_argument("--dt-clock", type=float, default=200.0)
    p.add_argument("--samples-per-dt", type=int, default=10000)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(fn=_cmd_calibration)

    p = sub.add_parser("tof-validate",
                       help="free-packet time-of-flight check of the readout")
    _add_common(p, with_field=False)
    p.add_argument("--k0", type=float, help="packet momentum")
    p.add_argument("--length", type=float, help="clocked region length")
    p.set_defaults(fn=_cmd_tof)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s", datefmt="%H:%M:%S")
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except CalibrationRangeError as exc:
        log.error("calibration range error: %s", exc)
        return 4
    except (NumericalError, CheckpointError) as exc:
        log.error("numerical failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
