"""Brinkman and Darcy solvers on the MAC grid, and the Korteweg force.

Brinkman: ``-∇·(ν∇u) + ηu + ∇p = f``, ``∇·u = 0``, ``u = 0`` on the wall.
Darcy:    ``ηu + ∇p = f``, ``∇·u = 0``, ``u·n = 0`` on the wall.

The pressure is found from the Schur complement ``-∇·A⁻¹∇`` by CG with a
Cahouet-Chabard preconditioner ``νI + η(-Δ)⁻¹``. With constant ν and η the
velocity block ``A = -νΔ + η`` is diagonal in a mixed sine basis (DST-I
across the Dirichlet nodes, DST-II across the reflected ghost cells) and is
inverted exactly; otherwise it is inverted by an inner PCG preconditioned
with that constant-coefficient inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import HypothesisViolated, PermeabilityTooSmall
from .grid import (GridSpec, ScalarField, VectorField, divergence_arrays, face_average_arrays,
                   gradient_arrays, l2_inner, l2_norm, poisson_solver)
from .linalg import pcg


@dataclass(frozen=True)
class ViscosityProfile:
    """``ν(s)`` interpolating linearly from ``nu_minus`` at s=-1 to ``nu_plus`` at s=1, clipped.

    Lipschitz with ``min ≤ ν ≤ max``; constant when both ends agree.
    """

    nu_minus: float
    nu_plus: float

    @classmethod
    def constant(cls, nu):
        return cls(float(nu), float(nu))

    @property
    def is_constant(self) -> bool:
        return self.nu_minus == self.nu_plus

    @property
    def bounds(self):
        return min(self.nu_minus, self.nu_plus), max(self.nu_minus, self.nu_plus)

    def __call__(self, s):
        w = np.clip((np.asarray(s, dtype=float) + 1.0) / 2.0, 0.0, 1.0)
        return self.nu_minus + (self.nu_plus - self.nu_minus) * w


@dataclass(frozen=True, eq=False)
class FlowParams:
    viscosity: ViscosityProfile
    eta: float | ScalarField = 1.0
    h: VectorField | None = None

    @property
    def eta_is_constant(self) -> bool:
        return not isinstance(self.eta, ScalarField)

    def eta_min(self) -> float:
        return float(self.eta) if self.eta_is_constant else float(np.min(self.eta.values))

    def validate(self, darcy: bool, eta0: float = 0.0):
        nu0, _ = self.viscosity.bounds
        if not darcy and not nu0 > 0:
            raise HypothesisViolated("H6", f"viscosity lower bound {nu0} must be positive")
        emin = self.eta_min()
        if emin < 0:
            raise HypothesisViolated("H5", f"permeability coefficient has negative value {emin}")
        if darcy and not (emin > 0 and emin >= eta0):
            raise PermeabilityTooSmall(f"min eta = {emin} must be positive (and >= eta0 = {eta0})")


@dataclass(frozen=True)
class FlowSolution:
    u: VectorField
    p: ScalarField
    iterations: int = 0
    residual: float = 0.0


def velocity_linf_report(u: VectorField) -> float:
    return u.max_abs()


# -- Korteweg force ---------------------------------------------------------------

def _face_product(phi):
    """``φ_L φ_R`` on interior faces."""
    nx, ny = phi.shape
    px = np.zeros((nx + 1, ny))
    py = np.zeros((nx, ny + 1))
    px[1:-1] = phi[1:] * phi[:-1]
    py[:, 1:-1] = phi[:, 1:] * phi[:, :-1]
    return px, py


def korteweg_force(phi: ScalarField, mu: ScalarField | None, engine, potential,
                   form: str = "rotational") -> VectorField:
    """Capillary force at the faces, boundary-normal faces zero.

    ``raw``: face-averaged ``μ`` times the face gradient of ``φ``.
    ``rotational``: ``φ ∇(J*φ) - ½ φ² ∇a`` in the discrete form that differs
    from ``raw`` by exactly the discrete gradient of ``½aφ² + F(φ) - φ J*φ``;
    the last bracket is the chain-rule defect of the face average of ``F'``.
    """
    grid = phi.grid
    hx, hy = grid.hx, grid.hy
    v = phi.values
    dpx, dpy = gradient_arrays(v, hx, hy)
    if form == "raw":
        if mu is None:
            raise ValueError("raw Korteweg form needs the chemical potential")
        mx, my = face_average_arrays(mu.values)
        return VectorField(grid, mx * dpx, my * dpy)
    if form != "rotational":
        raise ValueError(f"unknown Korteweg form {form!r}")
    ax, ay = face_average_arrays(v)
    djx, djy = gradient_arrays(engine.convolve_array(v), hx, hy)
    dax, day = gradient_arrays(engine.a_array, hx, hy)
    qx, qy = _face_product(v)
    fx, fy = face_average_arrays(potential.dF(v))
    dFx, dFy = gradient_arrays(potential.F(v), hx, hy)
    kx = ax * djx - 0.5 * qx * dax + (fx * dpx - dFx)
    ky = ay * djy - 0.5 * qy * day + (fy * dpy - dFy)
    return VectorField(grid, kx, ky)


# -- solvers ------------------------------------------------------------------------

def _harmonic_nodes_x(nu):
    """Harmonic mean of ν at the nodes carrying y-fluxes of the x-velocity.

    Shape ``(nx-1, ny+1)``: interior node columns, all node rows incl. walls.
    """
    inv = 1.0 / nu
    nx, ny = nu.shape
    s = np.zeros((nx - 1, ny + 1))
    c = np.zeros((nx - 1, ny + 1))
    pair = inv[1:, :] + inv[:-1, :]          # (nx-1, ny): cells left/right of each face column
    s[:, :-1] += pair
    s[:, 1:] += pair
    c[:, :-1] += 2
    c[:, 1:] += 2
    return c / s


def _harmonic_nodes_y(nu):
    return _harmonic_nodes_x(nu.T).T


def viscous_apply(ux, uy, nu_cells, hx, hy):
    """``-∇·(ν∇u)`` on interior MAC faces with no-slip ghost reflection.

    ``ux`` is ``(nx-1, ny)``, ``uy`` is ``(nx, ny-1)``; ``nu_cells`` is cell-centred
    and harmonically averaged onto the nodes carrying the cross fluxes.
    """
    nx, ny = nu_cells.shape
    X = np.zeros((nx + 1, ny))
    X[1:-1] = ux
    fx = nu_cells * (X[1:] - X[:-1]) / hx
    ox = -(fx[1:] - fx[:-1]) / hx
    dy = np.empty((nx - 1, ny + 1))
    dy[:, 1:-1] = ux[:, 1:] - ux[:, :-1]
    dy[:, 0] = 2 * ux[:, 0]
    dy[:, -1] = -2 * ux[:, -1]
    fy = _harmonic_nodes_x(nu_cells) * dy / hy
    ox -= (fy[:, 1:] - fy[:, :-1]) / hy

    Y = np.zeros((nx, ny + 1))
    Y[:, 1:-1] = uy
    gy = nu_cells * (Y[:, 1:] - Y[:, :-1]) / hy
    oy = -(gy[:, 1:] - gy[:, :-1]) / hy
    dx = np.empty((nx + 1, ny - 1))
    dx[1:-1] = uy[1:] - uy[:-1]
    dx[0] = 2 * uy[0]
    dx[-1] = -2 * uy[-1]
    gx = _harmonic_nodes_y(nu_cells) * dx / hx
    oy -= (gx[1:] - gx[:-1]) / hx
    return ox, oy


class FlowSolver:
    """Solve Brinkman (``mode='CHB'``) or Darcy (``mode='CHHS'``) on one grid."""

    def __init__(self, grid: GridSpec, params: FlowParams, mode: str = "CHB",
                 rtol: float = 1e-11, maxiter: int = 2000):
        if mode not in ("CHB", "CHHS"):
            raise ValueError(f"unknown flow mode {mode!r}")
        self.grid = grid
        self.params = params
        self.mode = mode
        self.rtol = rtol
        self.maxiter = maxiter
        params.validate(darcy=(mode == "CHHS"))
        self.poisson = poisson_solver(grid)
        nx, ny = grid.shape
        hx, hy = grid.hx, grid.hy
        if params.eta_is_constant:
            self.eta_x = np.full((nx - 1, ny), float(params.eta))
            self.eta_y = np.full((nx, ny - 1), float(params.eta))
            self.eta_bar = float(params.eta)
        else:
            ex, ey = face_average_arrays(params.eta.values)
            self.eta_x, self.eta_y = ex[1:-1], ey[:, 1:-1]
            self.eta_bar = float(np.mean(params.eta.values))
        # sine-basis eigenvalues of -Δ for the two velocity components
        dir_x = 4 / hx**2 * np.sin(np.pi * np.arange(1, nx) / (2 * nx)) ** 2
        ghost_y = 4 / hy**2 * np.sin(np.pi * np.arange(1, ny + 1) / (2 * ny)) ** 2
        ghost_x = 4 / hx**2 * np.sin(np.pi * np.arange(1, nx + 1) / (2 * nx)) ** 2
        dir_y = 4 / hy**2 * np.sin(np.pi * np.arange(1, ny) / (2 * ny)) ** 2
        self._lam_ux = dir_x[:, None] + ghost_y[None, :]
        self._lam_uy = ghost_x[:, None] + dir_y[None, :]

    # -- velocity block ----------------------------------------------------------

    def _nu_cells(self, phi):
        visc = self.params.viscosity
        if visc.is_constant:
            return None
        return visc(phi)

    def _const_inverse(self, fx, fy, nu, eta):
        """``(-νΔ + η)^{-1}`` on interior face arrays via the mixed sine transforms."""
        hx_ = scipy.fft.dst(scipy.fft.dst(fx, type=1, axis=0, norm="ortho"), type=2, axis=1, norm="ortho")
        hx_ /= nu * self._lam_ux + eta
        ux = scipy.fft.idst(scipy.fft.idst(hx_, type=2, axis=1, norm="ortho"), type=1, axis=0, norm="ortho")
        hy_ = scipy.fft.dst(scipy.fft.dst(fy, type=2, axis=0, norm="ortho"), type=1, axis=1, norm="ortho")
        hy_ /= nu * self._lam_uy + eta
        uy = scipy.fft.idst(scipy.fft.idst(hy_, type=1, axis=1, norm="ortho"), type=2, axis=0, norm="ortho")
        return ux, uy

    def viscous_apply(self, ux, uy, nu_cells=None):
        """``-∇·(ν∇u)`` on interior face arrays; ``nu_cells=None`` means the constant ν."""
        if nu_cells is None:
            nu_cells = np.full(self.grid.shape, self.params.viscosity.nu_minus)
        return viscous_apply(ux, uy, nu_cells, self.grid.hx, self.grid.hy)

    def _velocity_inverse(self, fx, fy, nu_cells):
        if nu_cells is None and self.params.eta_is_constant:
            return self._const_inverse(fx, fy, self.params.viscosity.nu_minus, self.eta_bar), 0
        nu_bar = float(np.mean(nu_cells)) if nu_cells is not None else self.params.viscosity.nu_minus
        nxi = fx.size

        def split(v):
            return v[:nxi].reshape(fx.shape), v[nxi:].reshape(fy.shape)

        def apply_a(v):
            a, b = split(v)
            ox, oy = self.viscous_apply(a, b, nu_cells)
            return np.concatenate([(ox + self.eta_x * a).ravel(), (oy + self.eta_y * b).ravel()])

        def apply_m(v):
            a, b = split(v)
            ox, oy = self._const_inverse(a, b, nu_bar, self.eta_bar)
            return np.concatenate([ox.ravel(), oy.ravel()])

        rhs = np.concatenate([fx.ravel(), fy.ravel()])
        sol, its, _ = pcg(apply_a, rhs, apply_m, rtol=min(self.rtol, 1e-13) * 1e-1,
                          maxiter=self.maxiter, what="Brinkman velocity block")
        return split(sol), its

    # -- public solves -----------------------------------------------------------

    def solve(self, force: VectorField, phi: ScalarField | None = None) -> FlowSolution:
        total = force if self.params.h is None else force + self.params.h
        if self.mode == "CHHS":
            return self.solve_darcy(total)
        return self.solve_brinkman(total, phi)

    def solve_brinkman(self, force: VectorField, phi: ScalarField | None = None) -> FlowSolution:
        nx, ny = self.grid.shape
        hx, hy = self.grid.hx, self.grid.hy
        nu_cells = None if phi is None else self._nu_cells(phi.values)
        if nu_cells is None and not self.params.viscosity.is_constant:
            raise ValueError("variable viscosity needs the phase field")
        fx, fy = force.x[1:-1], force.y[:, 1:-1]
        inner = [0]

        def ainv(gx, gy):
            (ux, uy), its = self._velocity_inverse(gx, gy, nu_cells)
            inner[0] += its
            return ux, uy

        def div_int(ux, uy):
            X = np.zeros((nx + 1, ny))
            Y = np.zeros((nx, ny + 1))
            X[1:-1] = ux
            Y[:, 1:-1] = uy
            return divergence_arrays(X, Y, hx, hy)

        def grad_int(p):
            gx, gy = gradient_arrays(p, hx, hy)
            return gx[1:-1], gy[:, 1:-1]

        def schur(pv):
            ux, uy = ainv(*grad_int(pv.reshape(nx, ny)))
            return -div_int(ux, uy).ravel()

        nu_bar = float(np.mean(nu_cells)) if nu_cells is not None else self.params.viscosity.nu_minus
        lam = self.poisson.eigenvalues
        mult = np.zeros_like(lam)
        mult[lam > 0] = nu_bar + self.eta_bar / lam[lam > 0]

        def precond(r):
            return self.poisson.apply_multiplier(r.reshape(nx, ny), mult).ravel()

        def project(v):
            return v - v.mean()

        u0x, u0y = ainv(fx, fy)
        # S p = -div A^{-1} f with S = -div A^{-1} grad (SPD on mean-zero p)
        rhs = -div_int(u0x, u0y).ravel()
        p, its, res = pcg(schur, rhs, precond, rtol=self.rtol, maxiter=self.maxiter,
                          project=project, what="Brinkman pressure (Schur) solve")
        p = p.reshape(nx, ny)
        gpx, gpy = grad_int(p)
        ux, uy = ainv(fx - gpx, fy - gpy)
        U = np.zeros((nx + 1, ny))
        V = np.zeros((nx, ny + 1))
        U[1:-1] = ux
        V[:, 1:-1] = uy
        return FlowSolution(VectorField(self.grid, U, V), ScalarField(self.grid, p - p.mean()),
                            its + inner[0], res)

    def solve_darcy(self, force: VectorField) -> FlowSolution:
        nx, ny = self.grid.shape
        hx, hy = self.grid.hx, self.grid.hy
        emin = self.params.eta_min()
        if not emin > 0:
            raise PermeabilityTooSmall(f"min eta = {emin}")
        f = force.with_zero_normal()
        if self.params.eta_is_constant:
            eta = float(self.params.eta)
            p = -self.poisson.solve_array(divergence_arrays(f.x, f.y, hx, hy))
            p -= p.mean()
            gx, gy = gradient_arrays(p, hx, hy)
            u = VectorField(self.grid, (f.x - gx) / eta, (f.y - gy) / eta)
            return FlowSolution(u, ScalarField(self.grid, p), 0, 0.0)
        kx = np.zeros((nx + 1, ny))
        ky = np.zeros((nx, ny + 1))
        kx[1:-1] = 1.0 / self.eta_x
        ky[:, 1:-1] = 1.0 / self.eta_y
        kbar = float(np.mean(1.0 / self.params.eta.values))

        def apply_a(pv):
            gx, gy = gradient_arrays(pv.reshape(nx, ny), hx, hy)
            return -divergence_arrays(kx * gx, ky * gy, hx, hy).ravel()

        def precond(r):
            return self.poisson.solve_array(r.reshape(nx, ny)).ravel() / kbar

        def project(v):
            return v - v.mean()

        rhs = -divergence_arrays(kx * f.x, ky * f.y, hx, hy).ravel()
        p, its, res = pcg(apply_a, rhs, precond, rtol=self.rtol, maxiter=self.maxiter,
                          project=project, what="Darcy pressure solve")
        p = p.reshape(nx, ny)
        p -= p.mean()
        gx, gy = gradient_arrays(p, hx, hy)
        u = VectorField(self.grid, kx * (f.x - gx), ky * (f.y - gy))
        return FlowSolution(u, ScalarField(self.grid, p), its, res)

    # -- dissipation terms -------------------------------------------------------

    def viscous_dissipation(self, u: VectorField, phi: ScalarField | None = None) -> float:
        """``‖√ν ∇u‖² = ⟨-∇·(ν∇u), u⟩`` with the discrete operator of the solver."""
        if self.mode == "CHHS":
            return 0.0
        nu_cells = None if phi is None else self._nu_cells(phi.values)
        ux, uy = u.x[1:-1], u.y[:, 1:-1]
        ox, oy = self.viscous_apply(ux, uy, nu_cells)
        return float(np.sum(ox * ux) + np.sum(oy * uy)) * self.grid.cell_volume

    def permeability_dissipation(self, u: VectorField) -> float:
        ux, uy = u.x[1:-1], u.y[:, 1:-1]
        return float(np.sum(self.eta_x * ux**2) + np.sum(self.eta_y * uy**2)) * self.grid.cell_volume

    def forcing_work(self, u: VectorField) -> float:
        return 0.0 if self.params.h is None else l2_inner(self.params.h, u)

    def energy_identity_defect(self, sol: FlowSolution, force: VectorField, phi=None) -> float:
        """Relative defect of ``⟨ν∇u,∇u⟩ + ⟨ηu,u⟩ = ⟨f + h, u⟩``."""
        total = force if self.params.h is None else force + self.params.h
        lhs = self.viscous_dissipation(sol.u, phi) + self.permeability_dissipation(sol.u)
        rhs = l2_inner(total.with_zero_normal(), sol.u)
        return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


def divergence_norm(u: VectorField) -> float:
    return l2_norm(ScalarField(u.grid, divergence_arrays(u.x, u.y, u.grid.hx, u.grid.hy)))


def solve_brinkman(phi, force, params, **kw) -> FlowSolution:
    return FlowSolver(force.grid, params, "CHB", **kw).solve_brinkman(force, phi)


def solve_darcy(phi, force, params, **kw) -> FlowSolution:
    return FlowSolver(force.grid, params, "CHHS", **kw).solve_darcy(force)



def h1_seminorm_sq(u: VectorField) -> float:
    """``‖∇u‖²`` with the no-slip viscous stencil (the norm of V by Poincaré)."""
    g = u.grid
    ux, uy = u.x[1:-1], u.y[:, 1:-1]
    ox, oy = viscous_apply(ux, uy, np.ones(g.shape), g.hx, g.hy)
    return float(np.sum(ox * ux) + np.sum(oy * uy)) * g.cell_volume
