import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlchb.diagnostics import (COLUMNS, DiagnosticsWriter, EnergyRecord, energy, energy_double_sum,
                               nonlocal_energy_part, read_series, sharp_distance, write_header, write_record)
from nlchb.errors import GridMismatch, IoFailure
from nlchb.grid import GridSpec, ScalarField


def test_energy_constants(engine16, quartic):
    g = engine16.grid
    assert energy(ScalarField.constant(g, 0.0), engine16, quartic) == pytest.approx(0.25, rel=1e-14)
    assert energy(ScalarField.constant(g, 1.0), engine16, quartic) == pytest.approx(0.0, abs=1e-14)
    assert energy(ScalarField.constant(g, -1.0), engine16, quartic) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("n", [16, 24])
def test_energy_matches_double_sum(n, gauss, quartic, rng):
    from nlchb.kernel import ConvolutionEngine
    g = GridSpec(n, n)
    eng = ConvolutionEngine(g, gauss)
    phi = ScalarField(g, rng.uniform(-1, 1, g.shape))
    e1, e2 = energy(phi, eng, quartic), energy_double_sum(phi, gauss, quartic)
    assert abs(e1 - e2) <= 1e-10 * abs(e2)


def test_nonlocal_part_nonnegative(engine16, rng):
    for _ in range(10):
        phi = rng.standard_normal((16, 16))
        assert nonlocal_energy_part(phi, engine16) >= -1e-10


def test_sharp_distance(grid16, rng):
    a = ScalarField(grid16, rng.standard_normal(grid16.shape))
    b = ScalarField(grid16, rng.standard_normal(grid16.shape))
    assert sharp_distance(a, a) == 0.0
    assert sharp_distance(a, a + 0.7) == pytest.approx(0.7, rel=1e-12)
    assert sharp_distance(a, b) == pytest.approx(sharp_distance(b, a), rel=1e-14)
    with pytest.raises(GridMismatch):
        sharp_distance(a, ScalarField.zeros(GridSpec(8, 8)))


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=11, max_size=11), st.integers(0, 10**9))
def test_csv_round_trip(tmp_path_factory, vals, iters):
    path = tmp_path_factory.mktemp("csv") / "d.csv"
    rec = EnergyRecord(*vals[:10], solver_iters=iters, residual=vals[10])
    with DiagnosticsWriter(path) as w:
        w.write(rec)
        w.write(rec)
    out = read_series(path)
    assert out == [rec, rec]


def test_read_empty(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    assert read_series(p) == []


def test_malformed_row_names_line(tmp_path):
    p = tmp_path / "m.csv"
    with open(p, "w") as fh:
        write_header(fh)
        write_record(EnergyRecord(0.0, 1.0, 2.0), fh)
        fh.write("1,2,3\n")
    with pytest.raises(IoFailure, match="line 4"):
        read_series(p)


def test_bad_number_and_schema(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("# schema: nlchb-diagnostics/1\n" + ",".join(COLUMNS) + "\n" + ",".join(["x"] * 12) + "\n")
    with pytest.raises(IoFailure, match="line 3"):
        read_series(p)
    p.write_text("# schema: other/9\n")
    with pytest.raises(IoFailure):
        read_series(p)
    with pytest.raises(IoFailure):
        read_series(tmp_path / "missing.csv")


def test_record_finiteness():
    assert EnergyRecord(0.0, 1.0, 0.0).is_finite()
    assert not EnergyRecord(0.0, np.inf, 0.0).is_finite()
