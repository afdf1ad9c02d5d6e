"""Uniform rectangular grid, cell/face fields and the discrete operators.

Layout
------
Scalars live at cell centres, ``values[i, j]`` with ``x = (i + 1/2) hx`` and
``y = (j + 1/2) hy``. Vectors are MAC staggered: ``x`` has shape
``(nx + 1, ny)`` on the vertical faces ``x = i hx`` and ``y`` has shape
``(nx, ny + 1)`` on the horizontal faces ``y = j hy``.

The gradient sets boundary-normal faces to zero (homogeneous Neumann ghost
reflection), and the divergence is its exact negative adjoint under the
weighted inner products below, so discrete integration by parts holds to
round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import GridMismatch, NonZeroMean, NumericalFailure


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4x4 cells, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def cell_centers(self):
        """Return ``(X, Y)`` arrays of cell-centre coordinates, ``ij`` indexing."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def xface_centers(self):
        x = np.arange(self.nx + 1) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def yface_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridMismatch(f"scalar values of shape {v.shape} on a {self.grid.shape} grid")
        if not np.all(np.isfinite(v)):
            raise NumericalFailure("non-finite values in a scalar field")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid, fn):
        X, Y = grid.cell_centers()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape).astype(float))

    def _other(self, other):
        if isinstance(other, ScalarField):
            _check_same(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        gx = np.asarray(self.x, dtype=float)
        gy = np.asarray(self.y, dtype=float)
        nx, ny = self.grid.shape
        if gx.shape != (nx + 1, ny) or gy.shape != (nx, ny + 1):
            raise GridMismatch(f"face arrays {gx.shape}, {gy.shape} do not fit a {nx}x{ny} MAC grid")
        if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))):
            raise NumericalFailure("non-finite values in a vector field")
        object.__setattr__(self, "x", gx)
        object.__setattr__(self, "y", gy)

    @classmethod
    def zeros(cls, grid):
        nx, ny = grid.shape
        return cls(grid, np.zeros((nx + 1, ny)), np.zeros((nx, ny + 1)))

    @classmethod
    def from_functions(cls, grid, fx, fy, zero_normal=True):
        """Sample ``(fx, fy)`` at face centres; optionally zero the boundary-normal faces."""
        Xx, Yx = grid.xface_centers()
        Xy, Yy = grid.yface_centers()
        v = cls(grid, np.broadcast_to(fx(Xx, Yx), Xx.shape).astype(float),
                np.broadcast_to(fy(Xy, Yy), Xy.shape).astype(float))
        return v.with_zero_normal() if zero_normal else v

    def with_zero_normal(self):
        x = self.x.copy()
        y = self.y.copy()
        x[0, :] = x[-1, :] = 0.0
        y[:, 0] = y[:, -1] = 0.0
        return VectorField(self.grid, x, y)

    def _other(self, other):
        if isinstance(other, VectorField):
            _check_same(self.grid, other.grid)
            return other.x, other.y
        return other, other

    def __add__(self, other):
        ox, oy = self._other(other)
        return VectorField(self.grid, self.x + ox, self.y + oy)

    __radd__ = __add__

    def __sub__(self, other):
        ox, oy = self._other(other)
        return VectorField(self.grid, self.x - ox, self.y - oy)

    def __mul__(self, c):
        ox, oy = self._other(c)
        return VectorField(self.grid, self.x * ox, self.y * oy)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return VectorField(self.grid, self.x / c, self.y / c)

    def __neg__(self):
        return VectorField(self.grid, -self.x, -self.y)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.x)), np.max(np.abs(self.y))))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)))


def _check_same(g1, g2):
    if g1 != g2:
        raise GridMismatch(f"fields live on different grids: {g1} vs {g2}")


# -- operators -----------------------------------------------------------------

def gradient_arrays(f, hx, hy):
    nx, ny = f.shape
    gx = np.zeros((nx + 1, ny))
    gy = np.zeros((nx, ny + 1))
    gx[1:-1, :] = (f[1:, :] - f[:-1, :]) / hx
    gy[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / hy
    return gx, gy


def divergence_arrays(vx, vy, hx, hy):
    return (vx[1:, :] - vx[:-1, :]) / hx + (vy[:, 1:] - vy[:, :-1]) / hy


def laplacian_array(f, hx, hy):
    gx, gy = gradient_arrays(f, hx, hy)
    return divergence_arrays(gx, gy, hx, hy)


def face_average_arrays(f):
    """Arithmetic average of a cell array onto interior faces (boundary faces zero)."""
    nx, ny = f.shape
    ax = np.zeros((nx + 1, ny))
    ay = np.zeros((nx, ny + 1))
    ax[1:-1, :] = 0.5 * (f[1:, :] + f[:-1, :])
    ay[:, 1:-1] = 0.5 * (f[:, 1:] + f[:, :-1])
    return ax, ay


def gradient(f: ScalarField) -> VectorField:
    gx, gy = gradient_arrays(f.values, f.grid.hx, f.grid.hy)
    return VectorField(f.grid, gx, gy)


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, divergence_arrays(v.x, v.y, v.grid.hx, v.grid.hy))


def neumann_laplacian(f: ScalarField) -> ScalarField:
    """Five-point Laplacian with reflecting ghost cells, i.e. ``div(grad f)``.

    Returns ``Δf``; the positive operator ``-Δ`` is its negative.
    """
    return divergence(gradient(f))


def face_average(f: ScalarField) -> VectorField:
    ax, ay = face_average_arrays(f.values)
    return VectorField(f.grid, ax, ay)


# -- inner products and norms ----------------------------------------------------

def l2_inner(f, g) -> float:
    if isinstance(f, VectorField):
        _check_same(f.grid, g.grid)
        return float((np.sum(f.x * g.x) + np.sum(f.y * g.y)) * f.grid.cell_volume)
    _check_same(f.grid, g.grid)
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


def l2_norm(f) -> float:
    return float(np.sqrt(max(l2_inner(f, f), 0.0)))


def mean(f: ScalarField) -> float:
    return float(np.sum(f.values) * f.grid.cell_volume / f.grid.area)


class NeumannPoissonSolver:
    """Fast solver for the Neumann Laplacian by even-reflection cosine transform.

    The five-point Neumann stencil is exactly diagonal in the DCT-II basis with
    eigenvalues ``4/hx² sin²(πk/2nx) + 4/hy² sin²(πl/2ny)`` of ``-Δ``.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        kx = np.arange(grid.nx)
        ky = np.arange(grid.ny)
        lam_x = 4.0 / grid.hx**2 * np.sin(np.pi * kx / (2 * grid.nx)) ** 2
        lam_y = 4.0 / grid.hy**2 * np.sin(np.pi * ky / (2 * grid.ny)) ** 2
        self.eigenvalues = lam_x[:, None] + lam_y[None, :]

    def apply_multiplier(self, f, multiplier):
        """Return ``m(-Δ) f`` for an array ``f`` and an array of spectral multipliers."""
        fh = scipy.fft.dctn(f, type=2, norm="ortho")
        fh *= multiplier
        return scipy.fft.idctn(fh, type=2, norm="ortho")

    @cached_property
    def _inverse_multiplier(self):
        m = np.zeros_like(self.eigenvalues)
        m[self.eigenvalues > 0] = 1.0 / self.eigenvalues[self.eigenvalues > 0]
        return m

    def solve_array(self, f):
        """``(-Δ)^{-1} f`` restricted to mean-zero fields; the constant mode is dropped."""
        return self.apply_multiplier(f, self._inverse_multiplier)

    def shifted_solve_array(self, f, alpha, beta):
        """``(alpha I + beta (-Δ))^{-1} f``; requires ``alpha > 0``."""
        return self.apply_multiplier(f, 1.0 / (alpha + beta * self.eigenvalues))

    def solve(self, f: ScalarField) -> ScalarField:
        _check_same(self.grid, f.grid)
        m = mean(f)
        scale = l2_norm(f)
        if abs(m) > 1e-10 * scale:
            raise NonZeroMean(f"right-hand side has mean {m:.3e} (norm {scale:.3e})")
        g = self.solve_array(f.values)
        return ScalarField(f.grid, g - g.mean())


_SOLVERS: dict[GridSpec, NeumannPoissonSolver] = {}


def poisson_solver(grid: GridSpec) -> NeumannPoissonSolver:
    solver = _SOLVERS.get(grid)
    if solver is None:
        solver = _SOLVERS[grid] = NeumannPoissonSolver(grid)
    return solver


def inv_neumann_laplacian(f: ScalarField) -> ScalarField:
    return poisson_solver(f.grid).solve(f)


def sharp_norm(f: ScalarField) -> float:
    """``(‖f - f̄‖²_{-1} + f̄²)^{1/2}`` with the discrete inverse Neumann Laplacian."""
    m = mean(f)
    g = f.values - m
    w = poisson_solver(f.grid).solve_array(g)
    h1 = float(np.sum(g * w) * f.grid.cell_volume)
    return float(np.sqrt(max(h1, 0.0) + m * m))


def solenoidal_from_stream(grid: GridSpec, psi) -> VectorField:
    """Face velocity ``(∂ψ/∂y, -∂ψ/∂x)`` from node values ``psi`` of shape ``(nx+1, ny+1)``.

    Discretely divergence free; normal faces vanish when ``psi`` is zero on the
    boundary nodes.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (grid.nx + 1, grid.ny + 1):
        raise GridMismatch(f"stream function shape {psi.shape} != {(grid.nx + 1, grid.ny + 1)}")
    ux = (psi[:, 1:] - psi[:, :-1]) / grid.hy
    uy = -(psi[1:, :] - psi[:-1, :]) / grid.hx
    return VectorField(grid, ux, uy)
