"""Command line entry point: ``nlchb run|sweep-nu|probe|selftest|info``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import echo_resolved, parse_config
from .coupled import SimConfig, run
from .errors import ConfigError, IoFailure, NLCBError
from .experiments import ProbeConfig, SweepConfig, run_dependence_probe, run_nu_sweep
from .grid import ScalarField
from .kernel import KernelSpec
from .selftest import run_selftest
from .snapshot import read_header, read_snapshot, write_snapshot

log = logging.getLogger("nlchb")

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4, 5


def _out_dir(args, default):
    out = Path(args.out or default)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"{out}: {exc}") from exc
    return out


def _with_seed(cfg, seed):
    if seed is None:
        return cfg
    if isinstance(cfg, SimConfig):
        return replace(cfg, seed=seed)
    return replace(cfg, base=replace(cfg.base, seed=seed))


def _plots(args):
    if args.no_plots:
        return None
    from . import plotting
    return plotting


def cmd_run(args):
    cfg = _with_seed(parse_config(args.config), args.seed)
    base = cfg if isinstance(cfg, SimConfig) else cfg.base
    out = _out_dir(args, "nlchb-run")
    echo_resolved(base, out)
    traj = run(base, out)
    write_snapshot(out / "phi_final.nlcb", traj.final.phi)
    last = traj.records[-1]
    print("key,value")
    for key in ("t", "E", "mass", "phi_linf", "u_linf"):
        print(f"{key},{getattr(last, key)!r}")
    print(f"steps,{len(traj.records) - 1}")
    plotting = _plots(args)
    if plotting:
        plotting.plot_energy(traj.records, out / "energy.png")
        plotting.plot_field(traj.final.phi, out / "phi_final.png", f"t = {last.t:g}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _with_seed(parse_config(args.config), args.seed)
    if not isinstance(cfg, SweepConfig):
        raise ConfigError("sweep-nu needs [experiment] type = sweep")
    out = _out_dir(args, "nlchb-sweep")
    cfg = replace(cfg, out_dir=str(out))
    echo_resolved(cfg, out)
    report = run_nu_sweep(cfg, threads=args.threads)
    print("nu,err,phi_err,u_err,sup_phi_linf,sup_u_linf")
    for row in zip(report.nu_values, report.errors, report.phi_errors, report.u_errors,
                   report.sup_phi_linf, report.sup_u_linf):
        print(",".join(f"{v:.6e}" for v in row))
    print(f"# slope,{report.slope:.6f}")
    print(f"# C,{report.constant:.6e}")
    print(f"# passed,{report.passed}")
    plotting = _plots(args)
    if plotting:
        plotting.plot_sweep(report, out / "sweep.png")
    return EXIT_OK if report.passed else EXIT_ACCEPTANCE


def cmd_probe(args):
    cfg = _with_seed(parse_config(args.config), args.seed)
    if not isinstance(cfg, ProbeConfig):
        raise ConfigError("probe needs [experiment] type = probe")
    out = _out_dir(args, "nlchb-probe")
    cfg = replace(cfg, out_dir=str(out))
    echo_resolved(cfg, out)
    report = run_dependence_probe(cfg, threads=args.threads)
    print("delta,numerator,denominator,rho")
    for d, n, q, r in zip(report.deltas, report.numerators, report.denominators, report.ratios):
        print(f"{d:.6e},{n:.6e},{q:.6e},{'exact' if r is None else format(r, '.6e')}")
    print(f"# variation,{report.variation:.6f}")
    print(f"# passed,{report.passed}")
    plotting = _plots(args)
    if plotting:
        plotting.plot_probe(report, out / "probe.png")
    return EXIT_OK if report.passed else EXIT_ACCEPTANCE


def cmd_selftest(args):
    kernel = KernelSpec.from_csv(args.kernel_csv) if args.kernel_csv else None
    report = run_selftest(args.level, kernel=kernel, seed=args.seed or 0)
    print("check,passed,measured,tolerance")
    for c in report.checks:
        print(f"{c.name},{c.passed},{c.measured:.3e},{c.tolerance:.1e}")
    if args.out:
        out = _out_dir(args, args.out)
        (out / "selftest.json").write_text(report.to_json())
    log.info("selftest %s in %.1f s", "passed" if report.passed else "FAILED", report.seconds)
    return EXIT_OK if report.passed else EXIT_ACCEPTANCE


def cmd_info(args):
    hdr = read_header(args.snapshot)
    field = read_snapshot(args.snapshot)
    print("key,value")
    for k, v in hdr.items():
        print(f"{k},{v}")
    if isinstance(field, ScalarField):
        v = field.values
        print(f"mean,{float(np.mean(v))!r}")
        print(f"min,{float(np.min(v))!r}")
        print(f"max,{float(np.max(v))!r}")
    else:
        print(f"max_abs,{field.max_abs()!r}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="nlchb", description="Nonlocal Cahn-Hilliard-Brinkman / Hele-Shaw simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps and probes")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--no-plots", action="store_true", help="skip figure output")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common], help="integrate one configuration")
    s.add_argument("config")
    s.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep-nu", parents=[common], help="vanishing-viscosity sweep")
    s.add_argument("config")
    s.set_defaults(func=cmd_sweep)
    s = sub.add_parser("probe", parents=[common], help="continuous-dependence probe")
    s.add_argument("config")
    s.set_defaults(func=cmd_probe)
    s = sub.add_parser("selftest", parents=[common], help="oracle battery")
    s.add_argument("--level", choices=("quick", "full"), default="quick")
    s.add_argument("--kernel-csv", help="tabulated kernel (r, J) to test instead of the default")
    s.set_defaults(func=cmd_selftest)
    s = sub.add_parser("info", parents=[common], help="describe a snapshot file")
    s.add_argument("snapshot")
    s.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except NLCBError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
