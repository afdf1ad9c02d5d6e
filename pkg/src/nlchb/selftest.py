"""Oracle battery: every module checked against an independent reference."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .ch import CahnHilliardStepper, CHState, CHStepperConfig, chemical_potential
from .diagnostics import energy, energy_double_sum
from .errors import NLCBError
from .flow import FlowParams, FlowSolver, ViscosityProfile, divergence_norm, korteweg_force
from .grid import (GridSpec, ScalarField, VectorField, divergence, gradient, l2_inner, l2_norm,
                   neumann_laplacian, poisson_solver, solenoidal_from_stream)
from .kernel import ConvolutionEngine, KernelSpec, check_admissible, direct_convolve, direct_convolve_grad
from .potential import PotentialSpec, validate_hypotheses

LEVELS = ("quick", "full")


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


@dataclass
class SelftestReport:
    level: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, measured, tolerance, detail="", *, lower_is_better=True):
        ok = bool(measured <= tolerance) if lower_is_better else bool(measured >= tolerance)
        self.checks.append(Check(name, ok, float(measured), float(tolerance), detail))

    def to_json(self) -> str:
        return json.dumps({"level": self.level, "passed": self.passed, "seconds": self.seconds,
                           "checks": [asdict(c) for c in self.checks]}, indent=2)

    def lines(self):
        for c in self.checks:
            yield (f"{'PASS' if c.passed else 'FAIL'}  {c.name}: measured {c.measured:.3e}, "
                   f"tolerance {c.tolerance:.1e}{'  ' + c.detail if c.detail else ''}")


def bump_kernel() -> KernelSpec:
    """A tabulated profile with a bump at r = 0.05; not non-increasing."""
    r = np.linspace(0.0, 0.2, 41)
    v = np.exp(-(r / 0.05) ** 2) + 0.6 * np.exp(-((r - 0.05) / 0.01) ** 2)
    return KernelSpec.tabulated(r, v)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def random_solenoidal(grid, rng):
    psi = np.zeros((grid.nx + 1, grid.ny + 1))
    psi[1:-1, 1:-1] = rng.standard_normal((grid.nx - 1, grid.ny - 1))
    return solenoidal_from_stream(grid, psi)


def _assembled_adjointness():
    g = GridSpec(8, 8, 1.0, 1.3)
    n = g.nx * g.ny
    G = np.column_stack([np.concatenate([v.x.ravel(), v.y.ravel()]) for v in
                         (gradient(ScalarField(g, e.reshape(g.shape))) for e in np.eye(n))])
    nf = G.shape[0]
    D = np.column_stack([divergence(VectorField(g, e[:(g.nx + 1) * g.ny].reshape(g.nx + 1, g.ny),
                                                e[(g.nx + 1) * g.ny:].reshape(g.nx, g.ny + 1))).values.ravel()
                         for e in np.eye(nf)])
    xi = np.zeros((g.nx + 1, g.ny), dtype=bool)
    xi[[0, -1]] = True
    yi = np.zeros((g.nx, g.ny + 1), dtype=bool)
    yi[:, [0, -1]] = True
    normal = np.concatenate([xi.ravel(), yi.ravel()])
    # interior faces: G = -D^T under equal cell/face weights
    return float(np.max(np.abs(G[~normal] + D.T[~normal])))


def run_selftest(level: str = "quick", kernel: KernelSpec | None = None, seed: int = 0) -> SelftestReport:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    t0 = time.perf_counter()
    rep = SelftestReport(level)
    rng = np.random.default_rng(seed)
    kernel = kernel or KernelSpec.gaussian(0.05)
    pot = PotentialSpec.quartic()

    adm = check_admissible(kernel)
    rep.add("kernel admissibility", 0.0 if adm.passed else 1.0, 0.0,
            "; ".join(adm.lines()) if not adm.passed else f"{kernel.kind}")

    rep.add("gradient/divergence adjointness (8x8 assembled)", _assembled_adjointness(), 1e-12)

    g = GridSpec(16, 16)
    f = ScalarField(g, rng.standard_normal(g.shape))
    rep.add("laplacian = div grad", _rel(neumann_laplacian(f).values, divergence(gradient(f)).values), 1e-12)
    X, _ = g.cell_centers()
    c = ScalarField(g, np.cos(np.pi * X))
    lam = 2 / g.hx**2 * (1 - np.cos(np.pi * g.hx))
    rep.add("discrete Neumann eigenvalue", _rel(neumann_laplacian(c).values, -lam * c.values), 1e-12)
    rhs = f - float(np.mean(f.values))
    sol = poisson_solver(g).solve(rhs)
    rep.add("Neumann Poisson residual", l2_norm(-neumann_laplacian(sol) - rhs) / l2_norm(rhs), 1e-12)

    for n in (16, 32) if level == "full" else (16,):
        gn = GridSpec(n, n)
        eng = ConvolutionEngine(gn, kernel)
        phi = rng.uniform(-1, 1, gn.shape)
        ref = direct_convolve(gn, kernel, phi, gn.cell_centers())
        rep.add(f"convolve vs direct sum ({n}^2)", _rel(eng.convolve_array(phi), ref), 1e-10)
        ra = direct_convolve(gn, kernel, np.ones(gn.shape), gn.cell_centers())
        rep.add(f"compute_a vs direct sum ({n}^2)", _rel(eng.a_array, ra), 1e-10)
        gx, gy = eng.convolve_grad_arrays(phi)
        dx, dy = direct_convolve_grad(gn, kernel, phi)
        rep.add(f"convolve_grad vs direct sum ({n}^2)", max(_rel(gx, dx), _rel(gy, dy)), 1e-10)
        pf = ScalarField(gn, phi)
        e1, e2 = energy(pf, eng, pot), energy_double_sum(pf, kernel, pot)
        rep.add(f"energy vs double sum ({n}^2)", abs(e1 - e2) / abs(e2), 1e-10)

    eng = ConvolutionEngine(g, kernel)
    a = ScalarField(g, eng.a_array)
    try:
        hyp = validate_hypotheses(pot, a)
        rep.add("(H2) c0 > 0", -hyp.c0, 0.0, f"c0 = {hyp.c0:.4g}")
        h2_ok = True
    except NLCBError as exc:
        rep.add("(H2) c0 > 0", 1.0, 0.0, str(exc))
        h2_ok = False

    phi = ScalarField(g, rng.uniform(-1, 1, g.shape))
    mu = chemical_potential(phi, a, eng, pot)
    mu_ref = a.values * phi.values + pot.dF(phi.values) - direct_convolve(g, kernel, phi.values, g.cell_centers())
    rep.add("chemical potential vs direct sum", _rel(mu.values, mu_ref), 1e-10)
    kraw = korteweg_force(phi, mu, eng, pot, "raw")
    krot = korteweg_force(phi, None, eng, pot, "rotational")
    scale = l2_norm(kraw)
    worst = 0.0
    for _ in range(50):
        v = random_solenoidal(g, rng)
        v = v / l2_norm(v)
        worst = max(worst, abs(l2_inner(kraw - krot, v)))
    rep.add("Korteweg raw vs rotational (50 solenoidal fields)", worst, 1e-8, f"|K| = {scale:.3g}")

    q = ScalarField(g, rng.standard_normal(g.shape))
    grad_force = gradient(q)
    for mode in ("CHB", "CHHS"):
        fs = FlowSolver(g, FlowParams(ViscosityProfile.constant(0.1), 2.0), mode)
        s = fs.solve(grad_force)
        rep.add(f"gradient force annihilated ({mode})", s.u.max_abs() / grad_force.max_abs(), 1e-9)
        s = fs.solve(krot)
        rep.add(f"divergence free ({mode})", divergence_norm(s.u) / (l2_norm(s.u) + 1), 1e-8)
        rep.add(f"energy identity ({mode})", fs.energy_identity_defect(s, krot), 1e-8)

    if h2_ok:
        stepper = CahnHilliardStepper(eng, pot, CHStepperConfig(dt=1e-3))
        st = CHState(ScalarField(g, rng.uniform(-0.5, 0.5, g.shape)))
        m0 = float(np.mean(st.phi.values))
        E = [energy(st.phi, eng, pot)]
        for _ in range(20):
            st = stepper.step(st)
            E.append(energy(st.phi, eng, pot))
        rep.add("mass conservation (20 CH steps)", abs(float(np.mean(st.phi.values)) - m0), 1e-12)
        rep.add("energy non-increasing (20 CH steps)", max(np.diff(E)), 1e-10)
    else:
        rep.add("CH stepping", 1.0, 0.0, "skipped: the convex split needs (H2)")

    if level == "full":
        _order_studies(rep)
    rep.seconds = time.perf_counter() - t0
    return rep


def manufactured_brinkman_error(n, nu=0.7, eta=2.0, lx=1.0, ly=1.0):
    """Discrete L² velocity error for ``u* = curl(sin²(πx/lx) sin²(πy/ly))``, ``p* = cos(πx/lx)``."""
    pi = np.pi
    kx, ky = pi / lx, pi / ly

    def ux(x, y):
        return ky * np.sin(kx * x) ** 2 * np.sin(2 * ky * y)

    def uy(x, y):
        return -kx * np.sin(2 * kx * x) * np.sin(ky * y) ** 2

    def lap_ux(x, y):
        return ky * (2 * kx**2 * np.cos(2 * kx * x) - 2 * ky**2 * (1 - np.cos(2 * kx * x))) * np.sin(2 * ky * y)

    def lap_uy(x, y):
        return -kx * (2 * ky**2 * np.cos(2 * ky * y) - 2 * kx**2 * (1 - np.cos(2 * ky * y))) * np.sin(2 * kx * x)

    g = GridSpec(n, n, lx, ly)
    force = VectorField.from_functions(
        g, lambda x, y: -nu * lap_ux(x, y) + eta * ux(x, y) - kx * np.sin(kx * x),
        lambda x, y: -nu * lap_uy(x, y) + eta * uy(x, y))
    exact = VectorField.from_functions(g, ux, uy)
    sol = FlowSolver(g, FlowParams(ViscosityProfile.constant(nu), eta)).solve_brinkman(force)
    return l2_norm(sol.u - exact)


def _order_studies(rep):
    errs = [manufactured_brinkman_error(n) for n in (32, 64, 128)]
    order = min(np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2]))
    rep.add("manufactured Brinkman order (32-64-128)", order, 1.9, f"errors {errs}", lower_is_better=False)
    orders = []
    prev = None
    for n in (64, 128):
        g = GridSpec(n, n)
        X, _ = g.cell_centers()
        f = ScalarField(g, np.cos(np.pi * X))
        err = l2_norm(divergence(gradient(f)) + np.pi**2 * f)
        if prev is not None:
            orders.append(np.log2(prev / err))
        prev = err
    rep.add("div(grad) consistency order (64-128)", orders[0], 1.9, lower_is_better=False)
