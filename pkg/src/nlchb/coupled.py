"""Flow-then-transport coupling of the CH equation with Brinkman or Darcy flow."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ch import CahnHilliardStepper, CHState, CHStepperConfig, chemical_potential
from .diagnostics import DiagnosticsWriter, EnergyRecord, energy, grad_sq
from .errors import ConfigError, NLCBError, NumericalFailure
from .flow import FlowParams, FlowSolution, FlowSolver, ViscosityProfile, korteweg_force
from .grid import GridSpec, ScalarField, VectorField, sharp_norm
from .kernel import ConvolutionEngine, KernelSpec
from .potential import PotentialSpec, validate_hypotheses
from .snapshot import read_snapshot, write_snapshot

log = logging.getLogger(__name__)

MODES = ("CHB", "CHHS")
INITIAL_KINDS = ("random", "constant", "stripes", "annulus", "snapshot")


@dataclass(frozen=True)
class InitialCondition:
    """Built-in initial data generators.

    ``random``: ``mean + amplitude * U(-1, 1)`` from the run seed.
    ``stripes``: ``mean + amplitude * cos(2π k x / lx)``.
    ``annulus``: a ring of the + phase with tanh edges of width ``width``,
    radii ``radius ± 0.15``, scaled by ``amplitude`` and shifted by ``mean``.
    ``snapshot``: a scalar ``.nlcb`` file at ``path``.
    Each is followed by ``smoothing`` passes of the mass-preserving [1 2 1]/4 filter.
    """

    kind: str = "random"
    mean: float = 0.0
    amplitude: float = 0.05
    smoothing: int = 0
    wavenumber: int = 2
    radius: float = 0.3
    width: float = 0.04
    path: str | None = None

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(f"unknown initial condition {self.kind!r}; choose from {INITIAL_KINDS}")
        if self.kind == "snapshot" and not self.path:
            raise ConfigError("snapshot initial condition needs a path")
        if self.smoothing < 0:
            raise ConfigError("smoothing passes must be >= 0")


def smooth(values, passes):
    """``passes`` applications of the reflecting binomial filter; preserves the sum."""
    v = np.asarray(values, dtype=float)
    for _ in range(passes):
        for axis in (0, 1):
            p = np.concatenate([np.take(v, [0], axis), v, np.take(v, [-1], axis)], axis=axis)
            n = v.shape[axis]
            v = 0.25 * (np.take(p, range(0, n), axis) + 2 * v + np.take(p, range(2, n + 2), axis))
    return v


def build_initial(grid: GridSpec, ic: InitialCondition, seed: int = 0) -> ScalarField:
    X, Y = grid.cell_centers()
    if ic.kind == "random":
        rng = np.random.default_rng(seed)
        v = ic.mean + ic.amplitude * rng.uniform(-1.0, 1.0, grid.shape)
    elif ic.kind == "constant":
        v = np.full(grid.shape, ic.mean)
    elif ic.kind == "stripes":
        v = ic.mean + ic.amplitude * np.cos(2 * np.pi * ic.wavenumber * X / grid.lx)
    elif ic.kind == "annulus":
        r = np.hypot(X - grid.lx / 2, Y - grid.ly / 2)
        v = ic.mean + ic.amplitude * np.tanh((0.15 - np.abs(r - ic.radius)) / ic.width)
    else:
        f = read_snapshot(ic.path)
        if not isinstance(f, ScalarField):
            raise ConfigError(f"{ic.path}: initial snapshot must hold a scalar field")
        if f.grid.shape != grid.shape:
            raise ConfigError(f"{ic.path}: snapshot grid {f.grid.shape} != configured {grid.shape}")
        v = f.values.copy()
    return ScalarField(grid, smooth(v, ic.smoothing))


@dataclass(frozen=True, eq=False)
class SimConfig:
    grid: GridSpec = field(default_factory=lambda: GridSpec(64, 64))
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec.gaussian(0.05))
    potential: PotentialSpec = field(default_factory=PotentialSpec.quartic)
    flow: FlowParams = field(default_factory=lambda: FlowParams(ViscosityProfile.constant(0.1), 1.0))
    mode: str = "CHB"
    stepper: CHStepperConfig = field(default_factory=CHStepperConfig)
    t_end: float = 0.5
    snapshot_cadence: int = 0
    seed: int = 0
    initial: InitialCondition = field(default_factory=InitialCondition)
    korteweg_form: str = "rotational"
    flow_rtol: float = 1e-11
    eta0: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose CHB or CHHS")
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")
        if self.snapshot_cadence < 0:
            raise ConfigError("snapshot cadence must be >= 0")
        if self.korteweg_form not in ("raw", "rotational"):
            raise ConfigError(f"unknown Korteweg form {self.korteweg_form!r}")

    @property
    def n_steps(self) -> int:
        n = round(self.t_end / self.stepper.dt)
        if abs(n * self.stepper.dt - self.t_end) > 1e-9 * max(self.t_end, 1.0):
            raise ConfigError(f"t_end = {self.t_end} is not a multiple of dt = {self.stepper.dt}")
        return n


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    phis: list | None = None
    velocities: list | None = None
    final: CHState | None = None

    @property
    def times(self):
        return [r.t for r in self.records]


class Simulation:
    """Everything needed to advance one configuration; owns no trajectory state."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.engine = ConvolutionEngine(cfg.grid, cfg.kernel)
        self.a = ScalarField(cfg.grid, self.engine.a_array)
        self.hypotheses = validate_hypotheses(cfg.potential, self.a)
        cfg.flow.validate(darcy=(cfg.mode == "CHHS"), eta0=cfg.eta0)
        self.stepper = CahnHilliardStepper(self.engine, cfg.potential, cfg.stepper)
        self.flow = FlowSolver(cfg.grid, cfg.flow, cfg.mode, rtol=cfg.flow_rtol)

    def chemical_potential(self, phi: ScalarField) -> ScalarField:
        return chemical_potential(phi, self.a, self.engine, self.cfg.potential)

    def initial_state(self, phi0: ScalarField | None = None) -> CHState:
        phi = phi0 if phi0 is not None else build_initial(self.grid, self.cfg.initial, self.cfg.seed)
        return CHState(phi, 0.0, self.chemical_potential(phi))

    def initial_record(self, state: CHState) -> EnergyRecord:
        phi = state.phi
        return EnergyRecord(
            t=state.t, E=energy(phi, self.engine, self.cfg.potential), grad_mu_sq=grad_sq(state.mu),
            mass=float(np.mean(phi.values)), phi_linf=phi.max_abs(), sharp_self=sharp_norm(phi))

    def flow_solve(self, state: CHState) -> FlowSolution:
        mu = state.mu if state.mu is not None else self.chemical_potential(state.phi)
        force = korteweg_force(state.phi, mu, self.engine, self.cfg.potential, self.cfg.korteweg_form)
        return self.flow.solve(force, state.phi)

    def coupled_step(self, state: CHState):
        """Flow from ``φⁿ``, then one CH step transported by that velocity.

        The record belongs to ``tⁿ⁺¹``; its flow columns describe ``uⁿ``, the
        velocity used over the step, so that the row closes the energy budget.
        """
        if state.mu is None:
            state = CHState(state.phi, state.t, self.chemical_potential(state.phi))
        sol = self.flow_solve(state)
        u = sol.u
        nxt = self.stepper.step(state, u)
        nxt = CHState(nxt.phi, nxt.t, self.chemical_potential(nxt.phi))
        dt = nxt.t - state.t
        visc = self.flow.viscous_dissipation(u, state.phi)
        perm = self.flow.permeability_dissipation(u)
        forcing = self.flow.forcing_work(u)
        E1 = energy(nxt.phi, self.engine, self.cfg.potential)
        E0 = energy(state.phi, self.engine, self.cfg.potential)
        gm = grad_sq(nxt.mu)
        resid = abs((E1 - E0) / dt + gm + visc + perm - forcing)
        rec = EnergyRecord(
            t=nxt.t, E=E1, grad_mu_sq=gm, visc_diss=visc, perm_diss=perm, forcing=forcing,
            mass=float(np.mean(nxt.phi.values)), phi_linf=nxt.phi.max_abs(), u_linf=u.max_abs(),
            sharp_self=sharp_norm(nxt.phi), solver_iters=int(sol.iterations + self.stepper.last_iterations),
            residual=resid)
        return nxt, sol, rec


def coupled_step(state: CHState, cfg: SimConfig):
    return Simulation(cfg).coupled_step(state)


def _dump_abort(out: Path | None, state: CHState, step: int, exc: Exception):
    if out is None:
        return None
    path = out / f"abort_step{step:06d}.nlcb"
    try:
        write_snapshot(path, state.phi)
        (out / "abort.txt").write_text(f"step {step}, t = {state.t!r}\n{type(exc).__name__}: {exc}\n")
    except OSError:
        log.exception("could not write abort dump")
        return None
    return path


def run(cfg: SimConfig, out_dir=None, *, phi0: ScalarField | None = None, keep_fields: bool = False,
        sim: Simulation | None = None, mass_tol: float = 1e-11) -> Trajectory:
    """Integrate to ``t_end``.

    Aborts on any invariant violation (range, mass drift, non-finite record),
    writing the last good state to ``abort_step*.nlcb`` when ``out_dir`` is set.
    ``keep_fields`` retains ``φⁿ`` for every n and the velocity of every step.
    """
    sim = sim or Simulation(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    n_steps = cfg.n_steps
    dt = cfg.stepper.dt
    state = sim.initial_state(phi0)
    traj = Trajectory(phis=[state.phi.values.copy()] if keep_fields else None,
                      velocities=[] if keep_fields else None)
    traj.records.append(sim.initial_record(state))
    m0 = traj.records[0].mass
    writer = DiagnosticsWriter(out / "diagnostics.csv") if out is not None else None
    try:
        if writer:
            writer.write(traj.records[0])
        if out is not None and cfg.snapshot_cadence:
            _snap(out, state, 0, traj)
        for k in range(1, n_steps + 1):
            try:
                nxt, sol, rec = sim.coupled_step(state)
                nxt = CHState(nxt.phi, k * dt, nxt.mu)   # avoid accumulating round-off in t
                rec = EnergyRecord(**{**rec.__dict__, "t": k * dt})
                if not rec.is_finite():
                    raise NumericalFailure(f"non-finite diagnostics at step {k}")
                if abs(rec.mass - m0) > mass_tol * (1 + abs(m0)):
                    raise NumericalFailure(f"mass drift {rec.mass - m0:.3e} at step {k}")
                if rec.t <= traj.records[-1].t:
                    raise NumericalFailure("non-monotone time")
            except NLCBError as exc:
                _dump_abort(out, state, k - 1, exc)
                raise
            state = nxt
            traj.records.append(rec)
            if keep_fields:
                traj.phis.append(state.phi.values.copy())
                traj.velocities.append(sol.u)
            if writer:
                writer.write(rec)
            if out is not None and cfg.snapshot_cadence and k % cfg.snapshot_cadence == 0:
                _snap(out, state, k, traj)
    finally:
        if writer:
            writer.close()
    traj.final = state
    return traj


def _snap(out, state, step, traj):
    path = out / f"phi_{step:06d}.nlcb"
    write_snapshot(path, state.phi)
    traj.snapshots.append(str(path))


def velocity_difference_sq(u1: VectorField, u2: VectorField) -> float:
    d = u1 - u2
    return float(np.sum(d.x**2) + np.sum(d.y**2)) * u1.grid.cell_volume


def energy_is_nonincreasing(records, tol=1e-10) -> bool:
    E = [r.E for r in records]
    return all(b <= a + tol for a, b in zip(E, E[1:])) and all(math.isfinite(e) for e in E)
