import numpy as np
import pytest

from nlchb.errors import HypothesisViolated, PermeabilityTooSmall
from nlchb.flow import (FlowParams, FlowSolver, ViscosityProfile, divergence_norm, h1_seminorm_sq,
                        korteweg_force)
from nlchb.grid import ScalarField, gradient, l2_norm
from nlchb.selftest import manufactured_brinkman_error, random_solenoidal


def _params(nu=0.1, eta=2.0):
    return FlowParams(ViscosityProfile.constant(nu), eta)


def test_darcy_solenoidal_force(grid16, rng):
    f = random_solenoidal(grid16, rng)
    sol = FlowSolver(grid16, _params(eta=2.0), "CHHS").solve(f)
    assert l2_norm(sol.u - f * 0.5) < 1e-10 * l2_norm(f)


@pytest.mark.parametrize("mode", ["CHB", "CHHS"])
def test_gradient_force_gives_zero_velocity(grid16, rng, mode):
    q = ScalarField(grid16, rng.standard_normal(grid16.shape))
    sol = FlowSolver(grid16, _params(), mode).solve(gradient(q))
    assert sol.u.max_abs() < 1e-9 * gradient(q).max_abs()


@pytest.mark.parametrize("mode", ["CHB", "CHHS"])
def test_constant_phi_no_flow(engine16, quartic, mode):
    phi = ScalarField.constant(engine16.grid, 0.4)
    k = korteweg_force(phi, None, engine16, quartic)
    sol = FlowSolver(engine16.grid, _params(), mode).solve(k)
    assert sol.u.max_abs() < 1e-10


def test_korteweg_forms_differ_by_gradient(engine16, quartic, rng):
    from nlchb.ch import chemical_potential
    g = engine16.grid
    phi = ScalarField(g, rng.uniform(-1, 1, g.shape))
    mu = chemical_potential(phi, ScalarField(g, engine16.a_array), engine16, quartic)
    d = korteweg_force(phi, mu, engine16, quartic, "raw") - korteweg_force(phi, None, engine16, quartic)
    v = phi.values
    pot = ScalarField(g, 0.5 * engine16.a_array * v**2 + quartic.F(v) - v * engine16.convolve_array(v))
    assert l2_norm(d - gradient(pot)) < 1e-12 * l2_norm(d)
    with pytest.raises(ValueError):
        korteweg_force(phi, None, engine16, quartic, "raw")


@pytest.mark.parametrize("mode", ["CHB", "CHHS"])
def test_divergence_and_energy_identity(engine16, quartic, rng, mode):
    g = engine16.grid
    phi = ScalarField(g, rng.uniform(-1, 1, g.shape))
    k = korteweg_force(phi, None, engine16, quartic)
    fs = FlowSolver(g, _params(), mode)
    sol = fs.solve(k)
    assert divergence_norm(sol.u) < 1e-9 * (1 + l2_norm(sol.u))
    assert fs.energy_identity_defect(sol, k) < 1e-9


def test_brinkman_tends_to_darcy(grid16, rng):
    f = gradient(ScalarField(grid16, rng.standard_normal(grid16.shape))) + random_solenoidal(grid16, rng)
    ud = FlowSolver(grid16, _params(), "CHHS").solve(f).u
    dist = [l2_norm(FlowSolver(grid16, _params(nu=nu)).solve(f).u - ud) for nu in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(dist, dist[1:]))


def test_manufactured_second_order():
    e = [manufactured_brinkman_error(n) for n in (16, 32, 64)]
    assert np.log2(e[1] / e[2]) > 1.9


def test_manufactured_rectangle():
    e = [manufactured_brinkman_error(n, lx=1.5, ly=0.8) for n in (32, 64)]
    assert np.log2(e[0] / e[1]) > 1.8


def test_variable_viscosity_and_eta(engine16, quartic, rng):
    g = engine16.grid
    phi = ScalarField(g, rng.uniform(-1, 1, g.shape))
    k = korteweg_force(phi, None, engine16, quartic)
    eta = ScalarField(g, 1.0 + rng.uniform(0, 2, g.shape))
    fs = FlowSolver(g, FlowParams(ViscosityProfile(0.05, 0.5), eta), "CHB")
    sol = fs.solve(k, phi)
    assert divergence_norm(sol.u) < 1e-9 * (1 + l2_norm(sol.u))
    assert fs.energy_identity_defect(sol, k, phi) < 1e-8
    fd = FlowSolver(g, FlowParams(ViscosityProfile.constant(1.0), eta), "CHHS")
    sd = fd.solve(k)
    assert divergence_norm(sd.u) < 1e-9 * (1 + l2_norm(sd.u))
    assert fd.energy_identity_defect(sd, k) < 1e-8


def test_body_force_work(grid16, rng):
    h = random_solenoidal(grid16, rng)
    fs = FlowSolver(grid16, FlowParams(ViscosityProfile.constant(0.1), 2.0, h), "CHHS")
    sol = fs.solve(h * 0.0)
    assert fs.forcing_work(sol.u) == pytest.approx(0.5 * l2_norm(h) ** 2, rel=1e-9)


def test_h1_seminorm_of_zero(grid16, rng):
    assert h1_seminorm_sq(random_solenoidal(grid16, rng) * 0.0) == 0.0
    assert h1_seminorm_sq(random_solenoidal(grid16, rng)) > 0


def test_hypothesis_checks():
    with pytest.raises(HypothesisViolated) as e:
        FlowParams(ViscosityProfile.constant(0.0)).validate(darcy=False)
    assert e.value.hypothesis == "H6"
    with pytest.raises(HypothesisViolated) as e:
        FlowParams(ViscosityProfile.constant(1.0), -1.0).validate(darcy=False)
    assert e.value.hypothesis == "H5"
    with pytest.raises(PermeabilityTooSmall):
        FlowParams(ViscosityProfile.constant(1.0), 0.0).validate(darcy=True)
    with pytest.raises(PermeabilityTooSmall):
        FlowParams(ViscosityProfile.constant(1.0), 0.5).validate(darcy=True, eta0=1.0)
    FlowParams(ViscosityProfile.constant(1.0), 0.0).validate(darcy=False)


def test_viscosity_profile():
    p = ViscosityProfile(0.1, 0.3)
    assert p(-5) == pytest.approx(0.1) and p(5) == pytest.approx(0.3) and p(0) == pytest.approx(0.2)
    assert p.bounds == (0.1, 0.3) and not p.is_constant
