"""Free energy, dissipation records and the diagnostics CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import IoFailure
from .grid import ScalarField, gradient, l2_inner, sharp_norm

SCHEMA = "nlchb-diagnostics/1"


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    E: float
    grad_mu_sq: float
    visc_diss: float = 0.0
    perm_diss: float = 0.0
    forcing: float = 0.0
    mass: float = 0.0
    phi_linf: float = 0.0
    u_linf: float = 0.0
    sharp_self: float = 0.0
    solver_iters: int = 0
    residual: float = 0.0

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in astuple(self))


COLUMNS = tuple(f.name for f in fields(EnergyRecord))


def nonlocal_energy_part(phi, engine) -> float:
    """``½(⟨aφ,φ⟩ - ⟨J*φ,φ⟩)``, the double-integral interaction term."""
    v = phi.values if isinstance(phi, ScalarField) else phi
    jphi = engine.convolve_array(v)
    return 0.5 * float(np.sum((engine.a_array * v - jphi) * v)) * engine.grid.cell_volume


def energy(phi: ScalarField, engine, spec) -> float:
    """Nonlocal free energy ``¼∬J(x-y)(φ(x)-φ(y))² + ∫F(φ)`` via one convolution."""
    v = phi.values
    return nonlocal_energy_part(v, engine) + float(np.sum(spec.F(v))) * engine.grid.cell_volume


def energy_double_sum(phi: ScalarField, kernel, spec) -> float:
    """Literal O(N²) evaluation of the energy; a reference for ``energy``."""
    grid = phi.grid
    X, Y = grid.cell_centers()
    x, y, v = X.ravel(), Y.ravel(), phi.values.ravel()
    vol = grid.cell_volume
    total = 0.0
    for k in range(v.size):
        total += float(np.sum(kernel(x[k] - x, y[k] - y) * (v[k] - v) ** 2))
    return 0.25 * total * vol * vol + float(np.sum(spec.F(v))) * vol


def sharp_distance(phi1: ScalarField, phi2: ScalarField) -> float:
    return sharp_norm(phi1 - phi2)


def grad_sq(f: ScalarField) -> float:
    """``‖∇f‖²`` with the face gradient."""
    g = gradient(f)
    return l2_inner(g, g)


# -- CSV ----------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, int):
        return str(v)
    return format(v, ".17g")


def write_header(sink) -> None:
    sink.write(f"# schema: {SCHEMA}\n")
    sink.write(",".join(COLUMNS) + "\n")


def write_record(record: EnergyRecord, sink) -> None:
    try:
        sink.write(",".join(_fmt(v) for v in astuple(record)) + "\n")
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot append diagnostics row: {exc}") from exc


class DiagnosticsWriter:
    """Own one CSV sink; writes the schema header on open."""

    def __init__(self, path):
        self.path = path
        try:
            self._fh = open(path, "w", newline="")
        except OSError as exc:
            raise IoFailure(f"{path}: {exc}") from exc
        write_header(self._fh)

    def write(self, record: EnergyRecord) -> None:
        write_record(record, self._fh)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_series(path) -> list[EnergyRecord]:
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    records = []
    header_seen = False
    types = [f.type for f in fields(EnergyRecord)]
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        if raw.startswith("#"):
            if "schema:" in raw and raw.split("schema:", 1)[1].strip() != SCHEMA:
                raise IoFailure(f"{path}: line {lineno}: unsupported schema {raw!r}")
            continue
        row = next(csv.reader([raw]))
        if not header_seen:
            if tuple(row) != COLUMNS:
                raise IoFailure(f"{path}: line {lineno}: unexpected header {row}")
            header_seen = True
            continue
        if len(row) != len(COLUMNS):
            raise IoFailure(f"{path}: line {lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
        try:
            vals = [int(v) if t in ("int", int) else float(v) for v, t in zip(row, types)]
        except ValueError as exc:
            raise IoFailure(f"{path}: line {lineno}: {exc}") from None
        records.append(EnergyRecord(*vals))
    return records
