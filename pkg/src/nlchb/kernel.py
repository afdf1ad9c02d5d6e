"""Interaction kernels and their convolutions over the bounded domain.

All quadratures are midpoint rules collocated with the grid, so
``convolve(1) == compute_a()`` holds exactly. Convolutions are linear
(zero extension outside the domain), evaluated with zero-padded FFTs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft
from scipy.interpolate import PchipInterpolator

from .errors import GridMismatch, IoFailure, NegativeA
from .grid import GridSpec, ScalarField, VectorField


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Radial kernel ``J(x) = profile(|x|)``.

    ``kind`` is one of ``gaussian``, ``mollified_newtonian`` or ``tabulated``.
    ``support_radius`` is a hard cutoff (``None`` for none).
    """

    kind: str
    eps: float = 0.05
    strength: float = 4.0
    delta: float = 0.01
    support_radius: float | None = None
    samples: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "mollified_newtonian", "tabulated"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and self.eps <= 0:
            raise ValueError("gaussian width must be positive")
        if self.kind == "mollified_newtonian":
            if self.delta <= 0:
                raise ValueError("core radius must be positive")
            if self.support_radius is None or self.support_radius <= self.delta:
                raise ValueError("mollified_newtonian needs support_radius > delta")
        if self.kind == "tabulated":
            if self.samples is None:
                raise ValueError("tabulated kernel needs samples")
            r, _ = self.samples
            _check_radii(np.asarray(r))

    @classmethod
    def gaussian(cls, eps, strength=4.0, support_radius=None):
        return cls("gaussian", eps=eps, strength=strength, support_radius=support_radius)

    @classmethod
    def mollified_newtonian(cls, delta, support_radius, strength=1.0):
        return cls("mollified_newtonian", delta=delta, strength=strength,
                   support_radius=support_radius)

    @classmethod
    def tabulated(cls, r, values):
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        return cls("tabulated", samples=(r, values), support_radius=float(r[-1]))

    @classmethod
    def from_csv(cls, path):
        """Load a tabulated profile from CSV columns ``r, J(r)`` (header optional)."""
        try:
            with open(path) as fh:
                lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        except OSError as exc:
            raise IoFailure(f"{path}: {exc}") from exc
        rows = []
        for k, ln in enumerate(lines):
            parts = [p.strip() for p in ln.split(",")]
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                if k == 0:
                    continue  # header row
                raise IoFailure(f"{path}: malformed kernel row {ln!r}") from None
        if len(rows) < 2:
            raise IoFailure(f"{path}: need at least two samples")
        arr = np.array(rows)
        try:
            return cls.tabulated(arr[:, 0], arr[:, 1])
        except ValueError as exc:
            raise IoFailure(f"{path}: {exc}") from exc

    # -- radial profile --------------------------------------------------------

    @cached_property
    def _interp(self):
        r, v = self.samples
        return PchipInterpolator(r, v, extrapolate=False)

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            out = self.strength / (np.pi * self.eps**2) * np.exp(-(r / self.eps) ** 2)
        elif self.kind == "mollified_newtonian":
            R2 = self.support_radius**2 + self.delta**2
            out = self.strength / (4 * np.pi) * np.log(R2 / (r**2 + self.delta**2))
        else:
            out = np.nan_to_num(self._interp(r), nan=0.0)
        if self.support_radius is not None:
            out = np.where(r <= self.support_radius, out, 0.0)
        return out

    def dprofile(self, r):
        """Radial derivative of the profile."""
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            out = -2 * r / self.eps**2 * self.profile(r)
        elif self.kind == "mollified_newtonian":
            out = -self.strength / (2 * np.pi) * r / (r**2 + self.delta**2)
        else:
            out = np.nan_to_num(self._interp.derivative()(r), nan=0.0)
        if self.support_radius is not None:
            out = np.where(r <= self.support_radius, out, 0.0)
        return out

    def __call__(self, x, y):
        return self.profile(np.hypot(x, y))

    def grad(self, x, y):
        r = np.hypot(x, y)
        dp = self.dprofile(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(r > 0, dp / r, 0.0)
        return s * x, s * y

    @property
    def length_scale(self) -> float:
        if self.kind == "gaussian":
            return self.eps
        if self.kind == "mollified_newtonian":
            return self.delta
        r, _ = self.samples
        return float(r[1] - r[0])


def _check_radii(r):
    if r.ndim != 1 or r.size < 2:
        raise ValueError("kernel radii must be a 1-D table with at least two entries")
    if r[0] != 0.0:
        raise ValueError("kernel radii must start at 0")
    if np.any(np.diff(r) <= 0):
        raise ValueError("kernel radii must be strictly increasing")


class ConvolutionEngine:
    """Cached FFT machinery for ``J*φ`` and ``∇J*φ`` on one grid.

    Kernel tables hold ``J`` at every cell-centre difference and ``∂J`` at every
    face-to-centre difference, pre-multiplied by the cell volume.
    """

    def __init__(self, grid: GridSpec, kernel: KernelSpec):
        self.grid = grid
        self.kernel = kernel
        nx, ny = grid.shape
        hx, hy = grid.hx, grid.hy
        vol = grid.cell_volume
        ci = np.arange(-(nx - 1), nx) * hx
        cj = np.arange(-(ny - 1), ny) * hy
        fi = (np.arange(-(nx - 1), nx + 1) - 0.5) * hx
        fj = (np.arange(-(ny - 1), ny + 1) - 0.5) * hy

        CX, CY = np.meshgrid(ci, cj, indexing="ij")
        self.table = kernel(CX, CY) * vol
        FX, FYc = np.meshgrid(fi, cj, indexing="ij")
        self.table_dx = kernel.grad(FX, FYc)[0] * vol
        FXc, FY = np.meshgrid(ci, fj, indexing="ij")
        self.table_dy = kernel.grad(FXc, FY)[1] * vol

        # padding to 2n per axis: wrap-around lands outside the extracted window
        self._shape = (scipy.fft.next_fast_len(2 * nx, real=True),
                       scipy.fft.next_fast_len(2 * ny, real=True))
        self._hat = scipy.fft.rfft2(self.table, self._shape)
        self._hat_dx = scipy.fft.rfft2(self.table_dx, self._shape)
        self._hat_dy = scipy.fft.rfft2(self.table_dy, self._shape)

    def _apply(self, phi, hat, out_shape):
        nx, ny = self.grid.shape
        full = scipy.fft.irfft2(scipy.fft.rfft2(phi, self._shape) * hat, self._shape)
        return full[nx - 1:nx - 1 + out_shape[0], ny - 1:ny - 1 + out_shape[1]]

    def convolve_array(self, phi):
        return self._apply(phi, self._hat, self.grid.shape)

    def convolve_grad_arrays(self, phi):
        nx, ny = self.grid.shape
        return (self._apply(phi, self._hat_dx, (nx + 1, ny)),
                self._apply(phi, self._hat_dy, (nx, ny + 1)))

    def _check(self, f):
        if f.grid != self.grid:
            raise GridMismatch(f"field grid {f.grid} does not match engine grid {self.grid}")

    def convolve(self, phi: ScalarField) -> ScalarField:
        self._check(phi)
        return ScalarField(self.grid, self.convolve_array(phi.values))

    def convolve_grad(self, phi: ScalarField) -> VectorField:
        self._check(phi)
        gx, gy = self.convolve_grad_arrays(phi.values)
        return VectorField(self.grid, gx, gy)

    @cached_property
    def a_array(self):
        a = self.convolve_array(np.ones(self.grid.shape))
        scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
        if np.min(a) < -1e-12 * scale:
            raise NegativeA(f"a(x) has minimum {np.min(a):.3e}; kernel/quadrature combination invalid")
        return a

    def compute_a(self) -> ScalarField:
        return ScalarField(self.grid, self.a_array)

    @property
    def a_star(self) -> float:
        return float(np.max(np.abs(self.a_array)))

    @cached_property
    def j_w11(self) -> float:
        """``‖J‖_{L¹} + ‖∇J‖_{L¹}`` by midpoint quadrature on the cell-difference table."""
        nx, ny = self.grid.shape
        ci = np.arange(-(nx - 1), nx) * self.grid.hx
        cj = np.arange(-(ny - 1), ny) * self.grid.hy
        CX, CY = np.meshgrid(ci, cj, indexing="ij")
        gx, gy = self.kernel.grad(CX, CY)
        return float(np.sum(np.abs(self.table))
                     + np.sum(np.hypot(gx, gy)) * self.grid.cell_volume)

    @cached_property
    def j_l1(self) -> float:
        return float(np.sum(np.abs(self.table)))


def compute_a(engine: ConvolutionEngine) -> ScalarField:
    return engine.compute_a()


def convolve(engine: ConvolutionEngine, phi: ScalarField) -> ScalarField:
    return engine.convolve(phi)


def convolve_grad(engine: ConvolutionEngine, phi: ScalarField) -> VectorField:
    return engine.convolve_grad(phi)


# -- brute-force reference ---------------------------------------------------------

def direct_convolve(grid: GridSpec, kernel: KernelSpec, phi, targets):
    """O(N·M) sum ``Σ_j J(t - y_j) φ_j hx hy`` at arbitrary target points.

    ``targets`` is ``(X, Y)``; used only to check the FFT path.
    """
    X, Y = grid.cell_centers()
    src_x = X.ravel()
    src_y = Y.ravel()
    w = np.asarray(phi).ravel() * grid.cell_volume
    TX, TY = targets
    out = np.empty(TX.size)
    for k, (tx, ty) in enumerate(zip(TX.ravel(), TY.ravel())):
        out[k] = np.dot(kernel(tx - src_x, ty - src_y), w)
    return out.reshape(TX.shape)


def direct_convolve_grad(grid: GridSpec, kernel: KernelSpec, phi):
    X, Y = grid.cell_centers()
    src_x = X.ravel()
    src_y = Y.ravel()
    w = np.asarray(phi).ravel() * grid.cell_volume
    out = []
    for comp, (TX, TY) in enumerate((grid.xface_centers(), grid.yface_centers())):
        vals = np.empty(TX.size)
        for k, (tx, ty) in enumerate(zip(TX.ravel(), TY.ravel())):
            vals[k] = np.dot(kernel.grad(tx - src_x, ty - src_y)[comp], w)
        out.append(vals.reshape(TX.shape))
    return out


# -- admissibility ---------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    radially_symmetric: bool
    nonincreasing: bool
    first_violation_radius: float | None
    d3_exponent: float | None
    d3_constant: float | None
    second_derivative_monotone: bool
    first_derivative_over_r_monotone: bool
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.radially_symmetric and self.nonincreasing

    def lines(self):
        yield f"radially symmetric: {'pass' if self.radially_symmetric else 'fail'}"
        if self.nonincreasing:
            yield "profile non-increasing: pass"
        else:
            yield f"profile non-increasing: fail (first violation at r={self.first_violation_radius:.6g})"
        if self.d3_exponent is not None:
            yield f"|D^3 J| decay exponent: {self.d3_exponent:.4f} (constant {self.d3_constant:.4g})"
        yield f"J'' monotone near 0: {self.second_derivative_monotone}"
        yield f"J'/r monotone near 0: {self.first_derivative_over_r_monotone}"
        yield from self.notes


def _radial_derivatives(kernel, r):
    """Central differences of the profile with a relative step; returns f', f'', f'''."""
    h = 1e-3 * r
    f = kernel.profile
    fp2, fp1, f0, fm1, fm2 = (f(r + 2 * h), f(r + h), f(r), f(r - h), f(r - 2 * h))
    d1 = (fp1 - fm1) / (2 * h)
    d2 = (fp1 - 2 * f0 + fm1) / h**2
    d3 = (fp2 - 2 * fp1 + 2 * fm1 - fm2) / (2 * h**3)
    return d1, d2, d3


def check_admissible(kernel: KernelSpec, n_samples=400, r_min=None, r_max=None):
    """Sample the radial profile and report the admissibility conditions.

    Advisory only; nothing here blocks a simulation.
    """
    scale = kernel.length_scale
    if r_max is None:
        r_max = kernel.support_radius if kernel.support_radius is not None else 8 * scale
    if r_min is None:
        r_min = 1e-3 * scale if kernel.kind != "tabulated" else float(kernel.samples[0][1]) * 1e-3
    notes = []
    if kernel.kind == "tabulated":
        r_tab, v_tab = kernel.samples
        radii = np.asarray(r_tab, dtype=float)
        vals = np.asarray(v_tab, dtype=float)
        notes.append("W^{1,1} membership only checked on the sampled range")
    else:
        radii = np.geomspace(r_min, r_max, n_samples)
        vals = kernel.profile(radii)
    tol = 1e-12 * max(float(np.max(np.abs(vals))), 1e-300)
    rises = np.nonzero(np.diff(vals) > tol)[0]
    nonincreasing = rises.size == 0
    first_violation = float(radii[rises[0] + 1]) if rises.size else None

    rs = np.geomspace(max(r_min, 1e-6), r_max * 0.99, n_samples)
    d1, d2, d3 = _radial_derivatives(kernel, rs)
    # Frobenius norm of the third-derivative tensor of a radial function along an axis
    d3_norm = np.sqrt(d3**2 + 3 * ((d2 - d1 / rs) / rs) ** 2)
    exponent = constant = None
    if kernel.kind == "mollified_newtonian":
        lo, hi = 10 * kernel.delta, kernel.support_radius / 4
        if hi > 2 * lo:
            sel = (rs >= lo) & (rs <= hi) & (d3_norm > 0)
            exponent = float(np.polyfit(np.log(rs[sel]), np.log(d3_norm[sel]), 1)[0])
        else:
            notes.append("support too small relative to core for a decay fit")
    else:
        sel = (rs > 2 * r_min) & (rs < 0.5 * r_max) & (d3_norm > 1e-300)
        if np.count_nonzero(sel) > 4:
            exponent = float(np.polyfit(np.log(rs[sel]), np.log(d3_norm[sel]), 1)[0])
    if exponent is not None:
        constant = float(np.max(d3_norm * rs**3))

    near = rs < min(0.1 * r_max, 2 * scale)
    def monotone(v):
        dv = np.diff(v[near])
        return bool(np.all(dv >= -1e-9 * np.max(np.abs(v[near]))) or np.all(dv <= 1e-9 * np.max(np.abs(v[near]))))

    return AdmissibilityReport(
        radially_symmetric=True,
        nonincreasing=nonincreasing,
        first_violation_radius=first_violation,
        d3_exponent=exponent,
        d3_constant=constant,
        second_derivative_monotone=monotone(d2) if np.any(near) else True,
        first_derivative_over_r_monotone=monotone(d1 / rs) if np.any(near) else True,
        notes=notes,
    )
