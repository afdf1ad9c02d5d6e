"""Strict INI configuration for runs, sweeps and probes.

Sections and keys (all optional unless stated)::

    [grid]       nx, ny, lx, ly
    [kernel]     kind = gaussian | mollified_newtonian | tabulated
                 eps, strength, delta, support_radius, csv
    [potential]  kind = quartic | polynomial, coefficients (ascending, comma separated),
                 s_max, c0_override
    [flow]       mode = CHB | CHHS, nu, nu_minus, nu_plus, eta, eta0,
                 h_x, h_y (constant body force), korteweg_form = rotational | raw, rtol
    [stepper]    dt, scheme, newton_tol, newton_max_iter, linear_tol, stabilization,
                 t_end, snapshot_cadence, seed
    [experiment] type = run | sweep | probe
                 initial = random | constant | stripes | annulus | snapshot,
                 initial_mean, initial_amplitude, initial_smoothing, initial_wavenumber,
                 initial_radius, initial_width, initial_path,
                 nu_values (sweep), deltas, shape, shape_seed, shape_smoothing (probe)

Unknown sections or keys raise ``ParseError`` naming the line and key.
"""

from __future__ import annotations

import configparser
import io
import re
from pathlib import Path

from .ch import SCHEMES, CHStepperConfig
from .coupled import InitialCondition, SimConfig, Simulation
from .errors import (ConfigError, HypothesisViolated, IoFailure, NegativeA, ParseError,
                     PermeabilityTooSmall)
from .experiments import ProbeConfig, SweepConfig
from .flow import FlowParams, ViscosityProfile
from .grid import GridSpec, VectorField
from .kernel import KernelSpec
from .potential import QUARTIC, PotentialSpec

KEYS = {
    "grid": {"nx": int, "ny": int, "lx": float, "ly": float},
    "kernel": {"kind": str, "eps": float, "strength": float, "delta": float,
               "support_radius": float, "csv": str},
    "potential": {"kind": str, "coefficients": str, "s_max": float, "c0_override": float},
    "flow": {"mode": str, "nu": float, "nu_minus": float, "nu_plus": float, "eta": float,
             "eta0": float, "h_x": float, "h_y": float, "korteweg_form": str, "rtol": float},
    "stepper": {"dt": float, "scheme": str, "newton_tol": float, "newton_max_iter": int,
                "linear_tol": float, "stabilization": float, "t_end": float,
                "snapshot_cadence": int, "seed": int},
    "experiment": {"type": str, "initial": str, "initial_mean": float, "initial_amplitude": float,
                   "initial_smoothing": int, "initial_wavenumber": int, "initial_radius": float,
                   "initial_width": float, "initial_path": str, "nu_values": str, "deltas": str,
                   "shape": str, "shape_seed": int, "shape_smoothing": int},
}


def _line_of(text, section, key=None):
    """1-based line of ``[section]`` or of ``key`` inside it (0 when not found)."""
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None:
            k = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            if k == key:
                return n
    return 0


def _floats(text, line, key):
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ParseError(line, key, f"expected a comma separated list of numbers, got {text!r}") from None
    if not vals:
        raise ParseError(line, key, "empty list")
    return vals


def read_sections(text: str) -> dict:
    """Parse and type-check the raw INI text into ``{section: {key: value}}``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ParseError(exc.lineno, exc.option, "duplicate key") from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(exc.lineno, exc.section, "duplicate section") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError(exc.lineno, "", "key outside of any section") from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else 0
        raise ParseError(line, "", "malformed line") from None
    out = {}
    for section in cp.sections():
        if section not in KEYS:
            raise ParseError(_line_of(text, section), section, "unknown section")
        out[section] = {}
        for key, raw in cp.items(section):
            line = _line_of(text, section, key)
            if key not in KEYS[section]:
                raise ParseError(line, key, f"unknown key in [{section}]")
            typ = KEYS[section][key]
            try:
                out[section][key] = typ(raw.strip())
            except ValueError:
                raise ParseError(line, key, f"cannot read {raw!r} as {typ.__name__}") from None
        out[section]["__lines__"] = {k: _line_of(text, section, k) for k in out[section]}
    return out


def build(sections: dict):
    """Turn typed sections into a ``SimConfig``, ``SweepConfig`` or ``ProbeConfig``."""

    def sec(name):
        return sections.get(name, {"__lines__": {}})

    def bad(name, key, msg):
        return ParseError(sec(name)["__lines__"].get(key, 0), key, msg)

    g = sec("grid")
    try:
        grid = GridSpec(g.get("nx", 64), g.get("ny", 64), g.get("lx", 1.0), g.get("ly", 1.0))
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from None

    k = sec("kernel")
    kind = k.get("kind", "gaussian")
    try:
        if kind == "gaussian":
            kernel = KernelSpec.gaussian(k.get("eps", 0.05), k.get("strength", 4.0), k.get("support_radius"))
        elif kind == "mollified_newtonian":
            kernel = KernelSpec.mollified_newtonian(k.get("delta", 0.01), k.get("support_radius", 0.25),
                                                    k.get("strength", 1.0))
        elif kind == "tabulated":
            if "csv" not in k:
                raise bad("kernel", "csv", "tabulated kernel needs csv = <path>")
            kernel = KernelSpec.from_csv(k["csv"])
        else:
            raise bad("kernel", "kind", f"unknown kernel kind {kind!r}")
    except ValueError as exc:
        raise ConfigError(f"[kernel]: {exc}") from None

    p = sec("potential")
    pkind = p.get("kind", "quartic")
    if pkind == "quartic":
        coeffs = QUARTIC
    elif pkind == "polynomial":
        if "coefficients" not in p:
            raise bad("potential", "coefficients", "polynomial potential needs coefficients")
        coeffs = _floats(p["coefficients"], p["__lines__"]["coefficients"], "coefficients")
    else:
        raise bad("potential", "kind", f"unknown potential kind {pkind!r}")
    try:
        potential = PotentialSpec(tuple(coeffs), s_max=p.get("s_max", 3.0),
                                  c0_override=p.get("c0_override"), name=pkind)
    except ValueError as exc:
        raise ConfigError(f"[potential]: {exc}") from None

    f = sec("flow")
    mode = f.get("mode", "CHB").upper()
    if mode not in ("CHB", "CHHS"):
        raise bad("flow", "mode", f"unknown mode {f.get('mode')!r}")
    if "nu" in f and ("nu_minus" in f or "nu_plus" in f):
        raise bad("flow", "nu", "give either nu or nu_minus/nu_plus")
    if "nu_minus" in f or "nu_plus" in f:
        visc = ViscosityProfile(f.get("nu_minus", f.get("nu_plus")), f.get("nu_plus", f.get("nu_minus")))
    else:
        visc = ViscosityProfile.constant(f.get("nu", 0.1))
    h = None
    if "h_x" in f or "h_y" in f:
        hx_, hy_ = f.get("h_x", 0.0), f.get("h_y", 0.0)
        h = VectorField.from_functions(grid, lambda x, y: hx_ + 0 * x, lambda x, y: hy_ + 0 * y)
    eta = f.get("eta", 1.0)
    if mode == "CHHS" and not eta > 0:
        raise PermeabilityTooSmall(f"Darcy mode needs eta >= eta0 > 0, got eta = {eta}")
    flow = FlowParams(visc, eta, h)

    s = sec("stepper")
    scheme = s.get("scheme", "convex_splitting_nonlinear")
    if scheme not in SCHEMES:
        raise bad("stepper", "scheme", f"unknown scheme {scheme!r}")
    try:
        stepper = CHStepperConfig(dt=s.get("dt", 1e-3), scheme=scheme, newton_tol=s.get("newton_tol", 1e-11),
                                  newton_max_iter=s.get("newton_max_iter", 30),
                                  linear_tol=s.get("linear_tol", 1e-11), stabilization=s.get("stabilization"))
    except ValueError as exc:
        raise ConfigError(f"[stepper]: {exc}") from None

    e = sec("experiment")
    initial = InitialCondition(kind=e.get("initial", "random"), mean=e.get("initial_mean", 0.0),
                               amplitude=e.get("initial_amplitude", 0.05),
                               smoothing=e.get("initial_smoothing", 0),
                               wavenumber=e.get("initial_wavenumber", 2), radius=e.get("initial_radius", 0.3),
                               width=e.get("initial_width", 0.04), path=e.get("initial_path"))
    base = SimConfig(grid=grid, kernel=kernel, potential=potential, flow=flow, mode=mode, stepper=stepper,
                     t_end=s.get("t_end", 0.5), snapshot_cadence=s.get("snapshot_cadence", 0),
                     seed=s.get("seed", 0), initial=initial, korteweg_form=f.get("korteweg_form", "rotational"),
                     flow_rtol=f.get("rtol", 1e-11), eta0=f.get("eta0", 0.0))
    _ = base.n_steps  # raises when t_end is not a multiple of dt

    etype = e.get("type", "run")
    if etype == "run":
        return base
    if etype == "sweep":
        nus = _floats(e["nu_values"], e["__lines__"]["nu_values"], "nu_values") if "nu_values" in e \
            else (1e-1, 1e-2, 1e-3, 1e-4)
        return SweepConfig(base, nus)
    if etype == "probe":
        deltas = _floats(e["deltas"], e["__lines__"]["deltas"], "deltas") if "deltas" in e \
            else (1e-1, 1e-2, 1e-3, 1e-4)
        return ProbeConfig(base, deltas, shape=e.get("shape", "mean_zero"), shape_seed=e.get("shape_seed", 1),
                           shape_smoothing=e.get("shape_smoothing", 8))
    raise bad("experiment", "type", f"unknown experiment type {etype!r}")


def validate(cfg):
    """Run every hypothesis check eagerly; returns the ``HypothesisReport``."""
    base = cfg if isinstance(cfg, SimConfig) else cfg.base
    if not isinstance(cfg, SimConfig):
        cfg.validate()
    try:
        sim = Simulation(base)
    except NegativeA as exc:
        raise HypothesisViolated("H1", str(exc)) from exc
    return sim.hypotheses


def parse_config(path, *, check=True):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    cfg = parse_text(text)
    if check:
        validate(cfg)
    return cfg


def parse_text(text: str):
    return build(read_sections(text))


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def resolved_text(cfg) -> str:
    """INI text that re-parses to an equivalent configuration."""
    base = cfg if isinstance(cfg, SimConfig) else cfg.base
    g, k, p, f, s, ic = base.grid, base.kernel, base.potential, base.flow, base.stepper, base.initial
    out = configparser.ConfigParser(interpolation=None)
    out["grid"] = {"nx": g.nx, "ny": g.ny, "lx": _fmt(g.lx), "ly": _fmt(g.ly)}
    kd = {"kind": k.kind}
    if k.kind == "gaussian":
        kd.update(eps=_fmt(k.eps), strength=_fmt(k.strength))
    elif k.kind == "mollified_newtonian":
        kd.update(delta=_fmt(k.delta), strength=_fmt(k.strength))
    else:
        kd["csv"] = "<tabulated samples>"
    if k.support_radius is not None:
        kd["support_radius"] = _fmt(k.support_radius)
    out["kernel"] = kd
    pd = {"kind": "polynomial" if p.name != "quartic" else "quartic",
          "coefficients": ", ".join(_fmt(c) for c in p.coefficients), "s_max": _fmt(p.s_max)}
    if p.c0_override is not None:
        pd["c0_override"] = _fmt(p.c0_override)
    out["potential"] = pd
    fd = {"mode": base.mode}
    if f.viscosity.is_constant:
        fd["nu"] = _fmt(f.viscosity.nu_minus)
    else:
        fd.update(nu_minus=_fmt(f.viscosity.nu_minus), nu_plus=_fmt(f.viscosity.nu_plus))
    fd.update(eta=_fmt(f.eta) if f.eta_is_constant else "<cellwise>", eta0=_fmt(base.eta0),
              korteweg_form=base.korteweg_form, rtol=_fmt(base.flow_rtol))
    if f.h is not None:
        fd.update(h_x=_fmt(float(f.h.x[1, 0])), h_y=_fmt(float(f.h.y[0, 1])))
    out["flow"] = fd
    sd = {"dt": _fmt(s.dt), "scheme": s.scheme, "newton_tol": _fmt(s.newton_tol),
          "newton_max_iter": s.newton_max_iter, "linear_tol": _fmt(s.linear_tol),
          "t_end": _fmt(base.t_end), "snapshot_cadence": base.snapshot_cadence, "seed": base.seed}
    if s.stabilization is not None:
        sd["stabilization"] = _fmt(s.stabilization)
    out["stepper"] = sd
    ed = {"type": "run", "initial": ic.kind, "initial_mean": _fmt(ic.mean),
          "initial_amplitude": _fmt(ic.amplitude), "initial_smoothing": ic.smoothing,
          "initial_wavenumber": ic.wavenumber, "initial_radius": _fmt(ic.radius),
          "initial_width": _fmt(ic.width)}
    if ic.path:
        ed["initial_path"] = ic.path
    if isinstance(cfg, SweepConfig):
        ed.update(type="sweep", nu_values=", ".join(_fmt(v) for v in cfg.nu_values))
    elif isinstance(cfg, ProbeConfig):
        ed.update(type="probe", deltas=", ".join(_fmt(v) for v in cfg.deltas), shape=cfg.shape,
                  shape_seed=cfg.shape_seed, shape_smoothing=cfg.shape_smoothing)
    out["experiment"] = {key: str(v) for key, v in ed.items()}
    buf = io.StringIO()
    out.write(buf)
    return buf.getvalue()


def echo_resolved(cfg, out_dir) -> Path:
    path = Path(out_dir) / "resolved_config.ini"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(resolved_text(cfg))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    return path
