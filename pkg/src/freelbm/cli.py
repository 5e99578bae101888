"""Command line interface: run, calibrate, analyze, sweep."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import io, plotting
from .analysis import DropletMetrics, droplet_shape
from .cases import calibrate_extension_rate, calibrate_sigma_xi, with_ca
from .errors import ConfigError, NumericalError
from .runner import run_config
from .units import choose_rate, solve_lattice_params

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("freelbm")


def _print_row(m):
    print(f"step {m.step:>9d}  tbar {m.tbar:10.4f}  D {m.D:.5f}  theta {m.theta_deg:6.2f}  "
          f"fragments {m.fragments}", flush=True)


def cmd_run(args) -> int:
    cfg = io.load_config(args.config)
    if args.steps is not None:
        cfg = dataclasses.replace(cfg, steps=args.steps)
    out = args.output or cfg.output_dir
    res = run_config(cfg, out, workers=args.workers, figures=not args.no_figures,
                     progress=None if args.quiet else _print_row)
    print(f"stopped: {res.stop_reason}; metrics in {res.files['metrics']}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = io.load_config(args.config)
    if cfg.kind == "fourroller2d":
        W = round(cfg.domain_ratio[0] * cfg.a)
        length = W / 2.0
    else:
        length = round(cfg.domain_ratio[1] * cfg.a) / 2.0
    rate = cfg.rate or choose_rate(cfg.groups, cfg.a, length, cfg.u_max, cfg.tau_max)
    lat = solve_lattice_params(cfg.groups, cfg.a, rate, cfg.tau_g, a_factor=cfg.a_factor,
                               tau_max=cfg.tau_max)
    cal = calibrate_sigma_xi(lat.params, planar_steps=args.steps, droplet_steps=args.steps,
                             workers=args.workers or cfg.workers)
    rows = {"sigma_default": lat.sigma, "sigma_meas": cal.sigma, "xi_default": lat.xi,
            "xi_meas": cal.xi, "tanh_fit_rms": cal.rms, "laplace_delta_p": cal.delta_p,
            "laplace_radius": cal.radius, "spurious_u_max": cal.spurious_u}
    if cfg.kind == "fourroller2d":
        ext = calibrate_extension_rate(cfg, workers=args.workers)
        rows.update(eps_meas=ext.eps, eps_y_meas=ext.eps_y, roller_omega=ext.omega,
                    extension_gain=ext.gain)
    text = "".join(f"{k} = {io.fmt(v)}\n" for k, v in rows.items())
    print(text, end="")
    out = io.ensure_dir(args.output or cfg.output_dir)
    with open(out / "calibration.txt", "w", newline="\n") as fh:
        fh.write(text)
    return EXIT_OK


def cmd_analyze(args) -> int:
    rows = []
    for path in args.vtk:
        data = io.read_vtk(path)
        fluid = data.get("fluid")
        frags, c, L, B, D, theta = droplet_shape(data["phi"], data["periodic"], fluid, args.mode)
        m = DropletMetrics(step=data["step"], tbar=data.get("tbar", float("nan")), D=D,
                           theta_deg=theta, fragments=frags.count, L=L, B=B)
        phi = data["phi"] if fluid is None else data["phi"][fluid]
        m.mass_c1 = float((0.5 * (1.0 + phi)).sum())
        m.sum_phi = float(phi.sum())
        rho = data["rho"] if fluid is None else data["rho"][fluid]
        m.sum_rho = float(rho.sum())
        rows.append(m)
        print(f"{path}: " + ", ".join(f"{k}={io.fmt(getattr(m, k))}"
                                      for k in ("step", "D", "theta_deg", "fragments", "mass_c1")))
    if args.csv:
        io.write_metrics_csv(args.csv, rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = io.load_config(args.config)
    base = Path(args.output or cfg.output_dir)
    cas = [float(v) for v in args.ca.replace(",", " ").split()]
    if not cas:
        raise ConfigError("--ca needs at least one value")
    finals = []
    combined = io.ensure_dir(base) / "sweep.csv"
    with open(combined, "w", newline="\n") as fh:
        fh.write("ca," + io.CSV_HEADER + ",stop_reason\n")
        for ca in cas:
            sub = with_ca(cfg, ca)
            res = run_config(sub, base / f"ca_{ca:g}", workers=args.workers,
                             figures=not args.no_figures,
                             progress=None if args.quiet else _print_row)
            for m in res.metrics:
                fh.write(f"{io.fmt(ca)},{io.metrics_row(m)},{res.stop_reason}\n")
            fh.flush()
            finals.append((ca, res.last))
    if not args.no_figures:
        plotting.plot_sweep([c for c, _ in finals], [m.D for _, m in finals],
                            base / "sweep_D.png", [m.theta_deg for _, m in finals])
    for ca, m in finals:
        print(f"Ca {ca:g}: D {m.D:.5f} theta {m.theta_deg:.2f} fragments {m.fragments}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freelbm", description="Free-energy lattice Boltzmann "
                                "solver for binary droplets in shear and extensional flow.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one case from a config file")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (default: output_dir from config)")
    r.add_argument("--steps", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--no-figures", action="store_true")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("calibrate", help="measure sigma, xi (and the extension rate)")
    c.add_argument("config")
    c.add_argument("-o", "--output")
    c.add_argument("--steps", type=int, default=20000)
    c.add_argument("--workers", type=int)
    c.set_defaults(func=cmd_calibrate)

    a = sub.add_parser("analyze", help="recompute droplet metrics from VTK dumps")
    a.add_argument("vtk", nargs="+")
    a.add_argument("--mode", choices=("inclined", "axis"), default="inclined")
    a.add_argument("--csv", help="write the metrics to this CSV file")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="serial capillary-number sweep")
    s.add_argument("config")
    s.add_argument("--ca", required=True, help="comma separated capillary numbers")
    s.add_argument("-o", "--output")
    s.add_argument("--workers", type=int)
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
