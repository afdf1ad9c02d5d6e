import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlchb.errors import GridMismatch, NonZeroMean, NumericalFailure
from nlchb.grid import (GridSpec, ScalarField, VectorField, divergence, gradient, inv_neumann_laplacian,
                        l2_inner, l2_norm, mean, neumann_laplacian, poisson_solver, sharp_norm,
                        solenoidal_from_stream)
from nlchb.selftest import _assembled_adjointness


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(3, 8)
    with pytest.raises(ValueError):
        GridSpec(8, 8, lx=0.0)
    g = GridSpec(8, 4, 2.0, 1.0)
    assert g.hx == 0.25 and g.hy == 0.25
    assert g.cell_volume == pytest.approx(0.0625)
    assert g.area == 2.0


def test_gradient_of_constant_is_zero(grid16):
    v = gradient(ScalarField.constant(grid16, 5.0))
    assert v.max_abs() == 0.0


def test_gradient_of_linear_is_exact(grid16):
    f = ScalarField.from_function(grid16, lambda x, y: x)
    v = gradient(f)
    np.testing.assert_allclose(v.x[1:-1], 1.0, rtol=1e-13)
    assert np.all(v.x[[0, -1]] == 0) and np.all(v.y == 0)


def test_adjointness_assembled_8x8():
    # explicit matrices of gradient and divergence: G = -D^T on interior faces
    assert _assembled_adjointness() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 12), st.integers(4, 12), st.integers(0, 2**31))
def test_adjointness_random(nx, ny, seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(nx, ny, 1.0, 0.7)
    f = ScalarField(g, rng.standard_normal(g.shape))
    v = VectorField(g, rng.standard_normal((nx + 1, ny)), rng.standard_normal((nx, ny + 1))).with_zero_normal()
    lhs, rhs = l2_inner(gradient(f), v), -l2_inner(f, divergence(v))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_divergence_sums_to_zero(grid16, rng):
    v = VectorField(grid16, rng.standard_normal((17, 16)), rng.standard_normal((16, 17))).with_zero_normal()
    assert abs(np.sum(divergence(v).values)) * grid16.cell_volume < 1e-12


def test_divergence_of_constant_field(grid16):
    v = VectorField(grid16, np.ones((17, 16)), np.zeros((16, 17))).with_zero_normal()
    d = divergence(v).values
    assert np.all(d[1:-1] == 0)
    assert np.all(d[0] != 0) and np.all(d[-1] != 0)


def test_laplacian_is_div_grad(grid16, rng):
    f = ScalarField(grid16, rng.standard_normal(grid16.shape))
    np.testing.assert_allclose(neumann_laplacian(f).values, divergence(gradient(f)).values, atol=1e-12 * 256)
    assert neumann_laplacian(ScalarField.constant(grid16, 3.0)).max_abs() == 0


def test_discrete_neumann_eigenvalue():
    g = GridSpec(32, 16, 2.0, 1.0)
    f = ScalarField.from_function(g, lambda x, y: np.cos(np.pi * x / g.lx))
    lam = 2 / g.hx**2 * (1 - np.cos(np.pi * g.hx / g.lx))
    np.testing.assert_allclose(neumann_laplacian(f).values, -lam * f.values, atol=1e-11)


def test_div_grad_second_order():
    errs = []
    for n in (64, 128):
        g = GridSpec(n, n)
        f = ScalarField.from_function(g, lambda x, y: np.cos(np.pi * x))
        errs.append(l2_norm(divergence(gradient(f)) + np.pi**2 * f))
    assert np.log2(errs[0] / errs[1]) >= 1.9


def test_poisson_solver_residual_and_mean(rng):
    g = GridSpec(24, 20, 1.0, 0.8)
    f = ScalarField(g, rng.standard_normal(g.shape))
    f = f - mean(f)
    u = inv_neumann_laplacian(f)
    assert abs(mean(u)) < 1e-14
    assert l2_norm(-neumann_laplacian(u) - f) / l2_norm(f) <= 1e-12


def test_poisson_solver_rejects_nonzero_mean(grid16):
    with pytest.raises(NonZeroMean):
        poisson_solver(grid16).solve(ScalarField.constant(grid16, 1.0))


def test_sharp_norm_against_dense_pseudoinverse(rng):
    g = GridSpec(6, 5)
    n = g.nx * g.ny
    L = np.column_stack([neumann_laplacian(ScalarField(g, e.reshape(g.shape))).values.ravel() for e in np.eye(n)])
    f = rng.standard_normal(n)
    fbar = f.mean()
    z = f - fbar
    # sharp norm uses the weighted inner product <a, b> = sum a b hx hy
    ref = np.sqrt(float(z @ np.linalg.pinv(-L) @ z) * g.cell_volume + fbar**2)
    assert sharp_norm(ScalarField(g, f.reshape(g.shape))) == pytest.approx(ref, rel=1e-10)


def test_sharp_norm_constant(grid16):
    assert sharp_norm(ScalarField.constant(grid16, -0.3)) == pytest.approx(0.3, rel=1e-14)


def test_field_grid_mismatch():
    a = ScalarField.zeros(GridSpec(8, 8))
    b = ScalarField.zeros(GridSpec(8, 9))
    with pytest.raises(GridMismatch):
        a + b
    with pytest.raises(GridMismatch):
        ScalarField(GridSpec(8, 8), np.zeros((8, 9)))


def test_nonfinite_rejected(grid16):
    with pytest.raises(NumericalFailure):
        ScalarField(grid16, np.full(grid16.shape, np.nan))
    with pytest.raises(NumericalFailure):
        VectorField(grid16, np.full((17, 16), np.inf), np.zeros((16, 17)))


def test_stream_function_is_solenoidal(grid16, rng):
    psi = np.zeros((17, 17))
    psi[1:-1, 1:-1] = rng.standard_normal((15, 15))
    v = solenoidal_from_stream(grid16, psi)
    assert divergence(v).max_abs() < 1e-11
    assert np.all(v.x[[0, -1]] == 0) and np.all(v.y[:, [0, -1]] == 0)
