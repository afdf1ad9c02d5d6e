"""Vanishing-viscosity sweep and continuous-dependence probe."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .coupled import SimConfig, build_initial, run, smooth
from .errors import ConfigError, IoFailure, SlopeUndefined
from .flow import FlowParams, ViscosityProfile, h1_seminorm_sq
from .grid import ScalarField, l2_inner, sharp_norm

SLOPE_THRESHOLD = 0.8
PROBE_VARIATION_LIMIT = 10.0


@dataclass(frozen=True, eq=False)
class SweepConfig:
    base: SimConfig
    nu_values: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    out_dir: str | None = None

    def __post_init__(self):
        if not self.nu_values or any(not v > 0 for v in self.nu_values):
            raise ConfigError("nu_values must be positive")

    def validate(self):
        nu = np.asarray(self.nu_values, dtype=float)
        if len(nu) < 4:
            raise ConfigError("a viscosity sweep needs at least 4 values")
        if np.any(np.diff(nu) >= 0):
            raise ConfigError("nu_values must be strictly decreasing")
        if math.log10(nu[0] / nu[-1]) < 3 - 1e-9:
            raise ConfigError("nu_values must span at least 3 decades")
        if not self.base.flow.eta_is_constant or not self.base.flow.viscosity.is_constant:
            raise ConfigError("the viscosity sweep needs constant nu and eta")
        if self.base.flow.h is not None:
            raise ConfigError("the viscosity sweep runs without body force")


@dataclass(frozen=True, eq=False)
class ProbeConfig:
    base: SimConfig
    deltas: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    shape: str = "mean_zero"
    shape_seed: int = 1
    shape_smoothing: int = 8
    out_dir: str | None = None

    def __post_init__(self):
        if self.shape not in ("mean_zero", "mean_shift"):
            raise ConfigError(f"unknown perturbation shape {self.shape!r}")
        if any(d < 0 for d in self.deltas):
            raise ConfigError("perturbation amplitudes must be >= 0")

    def validate(self):
        d = np.asarray(self.deltas, dtype=float)
        if np.any(d <= 0) or np.any(np.diff(d) >= 0):
            raise ConfigError("deltas must be positive and strictly decreasing")
        if self.base.mode == "CHB" and not self.base.flow.viscosity.is_constant:
            raise ConfigError("the CHB dependence estimate holds for constant viscosity only")


# -- sweep ----------------------------------------------------------------------------

@dataclass
class SweepReport:
    nu_values: list
    errors: list
    phi_errors: list
    u_errors: list
    sup_phi_linf: list
    sup_u_linf: list
    slope: float
    intercept: float
    s_max: float
    reference_sup_u_linf: float
    threshold: float = SLOPE_THRESHOLD

    @property
    def monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.errors, self.errors[1:]))

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(v) for v in self.sup_u_linf) and max(self.sup_phi_linf) <= self.s_max

    @property
    def passed(self) -> bool:
        return self.monotone and self.slope >= self.threshold and self.bounded

    @property
    def constant(self) -> float:
        """Fitted ``C`` in ``err ≈ C ν^slope``."""
        return 10.0**self.intercept

    def lines(self):
        for nu, e in zip(self.nu_values, self.errors):
            yield f"nu = {nu:.3e}  err = {e:.6e}"
        yield f"slope = {self.slope:.4f} (threshold {self.threshold}), C = {self.constant:.4e}"
        yield f"monotone = {self.monotone}, bounded = {self.bounded}"

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("# schema: nlchb-sweep/1\n")
            fh.write(f"# slope: {self.slope!r}\n# intercept_log10: {self.intercept!r}\n")
            fh.write(f"# threshold: {self.threshold!r}\n")
            fh.write("nu,err,phi_err,u_err,sup_phi_linf,sup_u_linf\n")
            for row in zip(self.nu_values, self.errors, self.phi_errors, self.u_errors,
                           self.sup_phi_linf, self.sup_u_linf):
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def fit_slope(x, y):
    """Least-squares ``log10 y = slope log10 x + intercept``."""
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise SlopeUndefined("log-log slope needs strictly positive errors")
    if len(set(np.asarray(x, dtype=float).tolist())) < 2:
        raise SlopeUndefined("log-log slope needs at least two distinct abscissae")
    slope, intercept = np.polyfit(np.log10(np.asarray(x, dtype=float)), np.log10(y), 1)
    return float(slope), float(intercept)


def _with_nu(base: SimConfig, nu: float) -> SimConfig:
    flow = FlowParams(ViscosityProfile.constant(nu), base.flow.eta, base.flow.h)
    return replace(base, mode="CHB", flow=flow)


def _trajectory_distance(traj, ref, dt, v_norm=False):
    """``sup_n ‖φ - φ_ref‖²_#`` and ``Σ dt ‖u - u_ref‖²`` (``V``-norm when ``v_norm``)."""
    grid = traj.final.phi.grid
    sup_phi = max(sharp_norm(ScalarField(grid, a - b)) ** 2 for a, b in zip(traj.phis, ref.phis))
    sq = h1_seminorm_sq if v_norm else (lambda w: l2_inner(w, w))
    su = dt * sum(sq(a - b) for a, b in zip(traj.velocities, ref.velocities))
    return sup_phi, su


def _sweep_member(args):
    cfg, ref, phi0 = args
    traj = run(cfg, phi0=phi0, keep_fields=True)
    sp, su = _trajectory_distance(traj, ref, cfg.stepper.dt)
    return (sp, su, max(r.phi_linf for r in traj.records), max(r.u_linf for r in traj.records))


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def run_nu_sweep(cfg: SweepConfig, threads: int = 1, strict: bool = True) -> SweepReport:
    """CHHS reference once, CHB per ν from the same ``φ₀``; fit ``err ~ C ν^slope``."""
    if strict:
        cfg.validate()
    base = cfg.base
    phi0 = build_initial(base.grid, base.initial, base.seed)
    ref = run(replace(base, mode="CHHS"), phi0=phi0, keep_fields=True)
    results = _map(_sweep_member, [(_with_nu(base, nu), ref, phi0) for nu in cfg.nu_values], threads)
    sp, su, pl, ul = (list(col) for col in zip(*results))
    errors = [a + b for a, b in zip(sp, su)]
    try:
        slope, intercept = fit_slope(cfg.nu_values, errors)
    except SlopeUndefined:
        if strict:
            raise
        slope = intercept = math.nan
    report = SweepReport(list(cfg.nu_values), errors, sp, su, pl, ul, slope, intercept,
                         base.potential.s_max, max(r.u_linf for r in ref.records))
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            report.write_csv(out / "sweep.csv")
        except OSError as exc:
            raise IoFailure(f"{out}: {exc}") from exc
    return report


# -- probe ----------------------------------------------------------------------------

@dataclass
class ProbeReport:
    mode: str
    shape: str
    deltas: list
    numerators: list
    denominators: list
    ratios: list = field(default_factory=list)
    limit: float = PROBE_VARIATION_LIMIT

    @property
    def finite_ratios(self):
        return [r for r in self.ratios if r is not None]

    @property
    def variation(self) -> float:
        r = self.finite_ratios
        if not r:
            return 1.0
        return max(r) / min(r) if min(r) > 0 else math.inf

    @property
    def no_growth(self) -> bool:
        """No ratio exceeds ``limit`` times the ratio at the largest δ."""
        r = self.finite_ratios
        return bool(r) and max(r) < self.limit * r[0]

    @property
    def passed(self) -> bool:
        # a mean shift enters the denominator linearly, so ρ ~ δ and only growth matters
        if self.shape == "mean_shift":
            return self.no_growth
        return self.variation < self.limit

    def lines(self):
        for d, r in zip(self.deltas, self.ratios):
            yield f"delta = {d:.3e}  rho = {'exact match' if r is None else format(r, '.6e')}"
        yield f"variation max/min = {self.variation:.4f} (limit {self.limit}), no growth = {self.no_growth}"

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("# schema: nlchb-probe/1\n")
            fh.write(f"# mode: {self.mode}\n# shape: {self.shape}\n")
            fh.write("delta,numerator,denominator,rho\n")
            for d, n, q, r in zip(self.deltas, self.numerators, self.denominators, self.ratios):
                rho = "exact" if r is None else format(r, ".17g")
                fh.write(f"{d:.17g},{n:.17g},{q:.17g},{rho}\n")


def perturbation_shape(cfg: ProbeConfig) -> np.ndarray:
    """Unit perturbation: smooth mean-zero noise scaled to max 1, or the constant 1."""
    grid = cfg.base.grid
    if cfg.shape == "mean_shift":
        return np.ones(grid.shape)
    rng = np.random.default_rng(cfg.shape_seed)
    v = smooth(rng.uniform(-1.0, 1.0, grid.shape), cfg.shape_smoothing)
    v -= v.mean()
    return v / np.max(np.abs(v))


def _probe_member(args):
    cfg, ref, phi0, v_norm = args
    traj = run(cfg, phi0=phi0, keep_fields=True)
    return _trajectory_distance(traj, ref, cfg.stepper.dt, v_norm)


def run_dependence_probe(cfg: ProbeConfig, threads: int = 1, strict: bool = True) -> ProbeReport:
    """Ratio of trajectory distance to initial-data distance for each δ."""
    if strict:
        cfg.validate()
    base = cfg.base
    grid = base.grid
    phi0 = build_initial(grid, base.initial, base.seed)
    shape = perturbation_shape(cfg)
    ref = run(base, phi0=phi0, keep_fields=True)
    v_norm = base.mode == "CHB"
    items = [(base, ref, ScalarField(grid, phi0.values + d * shape), v_norm) for d in cfg.deltas]
    results = _map(_probe_member, items, threads)
    nums, dens, ratios = [], [], []
    for d, (sp, su) in zip(cfg.deltas, results):
        pert = ScalarField(grid, d * shape)
        den = sharp_norm(pert) ** 2 + abs(float(np.mean(pert.values)))
        num = sp + su
        nums.append(num)
        dens.append(den)
        ratios.append(None if den == 0 and num == 0 else (num / den if den > 0 else math.inf))
    report = ProbeReport(base.mode, cfg.shape, list(cfg.deltas), nums, dens, ratios)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            report.write_csv(out / "probe.csv")
        except OSError as exc:
            raise IoFailure(f"{out}: {exc}") from exc
    return report
