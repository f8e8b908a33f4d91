"""Coefficient presets, their derivatives, and the assumption audit."""

import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdelab.coefficients import (R_CAP, SIGMA_C0, SIGMA_C1, SamplePlan,
                                  check_assumptions, preset, zero_coefficients)
from spdelab.errors import ConfigError

RS = np.linspace(-30.0, 30.0, 601)


def test_zero_coefficients_are_zero():
    c = zero_coefficients()
    assert np.all(c.f(0.0, 0.5, RS) == 0.0)
    assert np.all(c.g(0.0, 0.5, RS) == 0.0)
    assert np.all(c.sigma(0.0, 0.5, RS) == 0.0)


def test_burgers_flux_and_derivative():
    c = preset("burgers")
    assert np.allclose(c.g(0.0, 0.5, RS), 0.5 * RS * RS)
    assert np.allclose(c.g_prime(0.0, 0.5, RS), RS)
    assert np.all(c.f(0.0, 0.5, RS) == 0.0)


def test_sigma_shape_and_bounds():
    c = preset("burgers")
    s = c.sigma(0.0, 0.5, RS)
    assert np.allclose(s, SIGMA_C0 / (1.0 + RS ** 2) + SIGMA_C1)
    assert np.all(s <= c.sigma_bound + 1e-15)
    assert np.all(s >= SIGMA_C1)  # bounded away from zero
    assert c.sigma(0.0, 0.5, 0.0) == pytest.approx(SIGMA_C0 + SIGMA_C1)


def test_reaction_diffusion_matches_bistable_inside_cap():
    c = preset("reaction_diffusion")
    r = np.linspace(-R_CAP, R_CAP, 101)
    assert np.allclose(c.f(0.0, 0.5, r), r - r ** 3, rtol=1e-12)
    assert np.allclose(c.f_prime(0.0, 0.5, r), 1.0 - 3.0 * r * r, rtol=1e-12)


def test_reaction_diffusion_linear_growth_outside_cap():
    c = preset("reaction_diffusion")
    r = np.array([3.0 * R_CAP, 10.0 * R_CAP, -5.0 * R_CAP])
    vals = np.abs(c.f(0.0, 0.5, r))
    assert np.all(vals <= c.K * (1.0 + np.abs(r)))
    # slope settles to the capped constant value far out
    d = c.f(0.0, 0.5, 101.0) - c.f(0.0, 0.5, 100.0)
    d2 = c.f(0.0, 0.5, 201.0) - c.f(0.0, 0.5, 200.0)
    assert d == pytest.approx(d2, rel=1e-12)


def test_capped_bistable_derivative_consistent():
    c = preset("reaction_diffusion")
    r = np.linspace(-3.0 * R_CAP, 3.0 * R_CAP, 401)
    h = 1e-6
    fd = (c.f(0.0, 0.5, r + h) - c.f(0.0, 0.5, r - h)) / (2.0 * h)
    assert np.allclose(fd, c.f_prime(0.0, 0.5, r), rtol=1e-4, atol=1e-3)


def test_custom_preset_from_expressions():
    c = preset("custom", {"f": "-r", "sigma": "1", "f_prime": "-1",
                          "K": 1.0, "L": 1.0})
    assert np.allclose(c.f(0.0, 0.5, RS), -RS)
    assert np.all(c.sigma(0.0, 0.5, RS) == 1.0)


def test_custom_preset_needs_expressions():
    with pytest.raises(ConfigError):
        preset("custom")
    with pytest.raises(ConfigError):
        preset("custom", {"K": "not-a-number"})


def test_unknown_preset_names_field():
    with pytest.raises(ConfigError) as err:
        preset("navier_stokes")
    assert err.value.field == "preset"


def test_presets_are_picklable():
    for name in ("burgers", "reaction_diffusion"):
        c = preset(name)
        c2 = pickle.loads(pickle.dumps(c))
        assert np.allclose(c2.f(0.1, 0.5, RS), c.f(0.1, 0.5, RS))
        assert np.allclose(c2.sigma(0.1, 0.5, RS), c.sigma(0.1, 0.5, RS))
    c = preset("custom", {"f": "sin(r)*exp(-t)"})
    c2 = pickle.loads(pickle.dumps(c))
    assert np.allclose(c2.f(0.3, 0.5, RS), c.f(0.3, 0.5, RS))


def test_assumption_audit_passes_for_presets():
    for name in ("burgers", "reaction_diffusion"):
        report = check_assumptions(preset(name))
        assert report.all_passed, [r for r in report.records if not r.passed]


def test_assumption_audit_flags_quadratic_f():
    # f = r^2 breaks linear growth; the audit reports it without raising
    c = preset("custom", {"f": "r**2", "K": 1.0})
    report = check_assumptions(c, SamplePlan(r_min=-50.0, r_max=50.0))
    rec = report.record("H1")
    assert not rec.passed
    assert rec.sampled_max > rec.declared


@given(st.floats(min_value=-100, max_value=100))
@settings(max_examples=60, deadline=None)
def test_burgers_growth_bound(r):
    c = preset("burgers")
    # quadratic flux satisfies the quadratic growth bound with K = 1/2
    assert abs(float(c.g2(0.0, r))) <= c.K * (1.0 + r * r) + 1e-9


@given(st.floats(min_value=-1e3, max_value=1e3),
       st.floats(min_value=-1e3, max_value=1e3))
@settings(max_examples=60, deadline=None)
def test_sigma_lipschitz(p, q):
    c = preset("burgers")
    lhs = abs(float(c.sigma(0.0, 0.5, p)) - float(c.sigma(0.0, 0.5, q)))
    assert lhs <= c.L * abs(p - q) + 1e-12
