import math

import numpy as np
import pytest

from nlchb.ch import CHStepperConfig
from nlchb.coupled import InitialCondition, SimConfig
from nlchb.errors import ConfigError, SlopeUndefined
from nlchb.experiments import (ProbeConfig, ProbeReport, SweepConfig, fit_slope, perturbation_shape,
                               run_dependence_probe, run_nu_sweep)
from nlchb.flow import FlowParams, ViscosityProfile
from nlchb.grid import GridSpec


def base(**kw):
    d = dict(grid=GridSpec(16, 16), stepper=CHStepperConfig(dt=5e-3), t_end=0.05,
             flow=FlowParams(ViscosityProfile.constant(0.1), 10.0),
             initial=InitialCondition("annulus", amplitude=0.9))
    d.update(kw)
    return SimConfig(**d)


def test_fit_slope_exact():
    x = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    s, c = fit_slope(x, 3.0 * x**1.5)
    assert s == pytest.approx(1.5) and 10**c == pytest.approx(3.0)
    with pytest.raises(SlopeUndefined):
        fit_slope(x, [1.0, 0.0, 1.0, 1.0])
    with pytest.raises(SlopeUndefined):
        fit_slope([1e-2, 1e-2], [1.0, 2.0])


def test_sweep_small(tmp_path):
    rep = run_nu_sweep(SweepConfig(base(), out_dir=str(tmp_path)))
    assert len(rep.errors) == 4
    assert rep.monotone and rep.bounded
    assert rep.slope > 0.5
    assert (tmp_path / "sweep.csv").read_text().startswith("# schema: nlchb-sweep/1")
    assert len(list(rep.lines())) == 6


def test_sweep_duplicates_are_deterministic():
    rep = run_nu_sweep(SweepConfig(base(), (1e-2, 1e-2)), strict=False)
    assert rep.errors[0] == rep.errors[1]
    assert math.isnan(rep.slope) and not rep.passed


def test_sweep_validation():
    with pytest.raises(ConfigError):
        SweepConfig(base(), (1e-1, 1e-2, 1e-3)).validate()
    with pytest.raises(ConfigError):
        SweepConfig(base(), (1e-1, 1e-2, 1e-2, 1e-4)).validate()
    with pytest.raises(ConfigError):
        SweepConfig(base(), (1e-1, 5e-2, 2e-2, 1e-2)).validate()
    with pytest.raises(ConfigError):
        SweepConfig(base(), (1.0, -1.0))
    var = base(flow=FlowParams(ViscosityProfile(0.1, 0.2), 10.0))
    with pytest.raises(ConfigError):
        SweepConfig(var).validate()


@pytest.mark.parametrize("mode", ["CHB", "CHHS"])
def test_probe_small(tmp_path, mode):
    rep = run_dependence_probe(ProbeConfig(base(mode=mode), (1e-1, 1e-2, 1e-3), out_dir=str(tmp_path)))
    assert rep.variation < 10 and rep.passed
    assert "nlchb-probe/1" in (tmp_path / "probe.csv").read_text()


def test_probe_mean_shift_judged_by_growth():
    rep = run_dependence_probe(ProbeConfig(base(), (1e-1, 1e-2, 1e-3), shape="mean_shift"))
    assert rep.no_growth and rep.passed


def test_probe_report_sentinels():
    r = ProbeReport("CHB", "mean_zero", [0.1, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, None])
    assert r.variation == 1.0 and r.passed
    assert "exact match" in list(r.lines())[1]
    assert not ProbeReport("CHB", "mean_zero", [1], [1], [1], [None]).no_growth


def test_perturbation_shape():
    v = perturbation_shape(ProbeConfig(base()))
    assert abs(v.mean()) < 1e-14 and np.max(np.abs(v)) == pytest.approx(1.0)
    np.testing.assert_array_equal(perturbation_shape(ProbeConfig(base(), shape="mean_shift")), 1.0)


def test_probe_validation():
    with pytest.raises(ConfigError):
        ProbeConfig(base(), shape="spike")
    with pytest.raises(ConfigError):
        ProbeConfig(base(), (-1.0,))
    with pytest.raises(ConfigError):
        ProbeConfig(base(), (1e-3, 1e-2)).validate()
    with pytest.raises(ConfigError):
        ProbeConfig(base(flow=FlowParams(ViscosityProfile(0.1, 0.2), 10.0))).validate()
