"""Reproducible Brownian-sheet draws and bridge-consistent refinement."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdelab.errors import ConfigError
from spdelab.grids import GridSpec
from spdelab.noise import NoiseRealization, SeedSpec, aggregate, refine, sample_sheet

GRID = GridSpec(nx=15, nt=32, horizon_T=0.5)


def test_same_seed_same_sheet():
    a = sample_sheet(SeedSpec(42, 7), GRID)
    b = sample_sheet(SeedSpec(42, 7), GRID)
    assert np.array_equal(a.xi, b.xi)


def test_different_path_index_different_sheet():
    a = sample_sheet(SeedSpec(42, 0), GRID)
    b = sample_sheet(SeedSpec(42, 1), GRID)
    assert not np.array_equal(a.xi, b.xi)


def test_seed_validation():
    with pytest.raises(ConfigError):
        SeedSpec(-1, 0)
    with pytest.raises(ConfigError):
        SeedSpec(2 ** 64, 0)
    with pytest.raises(ConfigError):
        SeedSpec(3, -2)


def test_increment_scaling():
    sheet = sample_sheet(SeedSpec(5, 0), GRID)
    inc = sheet.increments()
    assert np.allclose(inc, np.sqrt(GRID.dt * GRID.dx) * sheet.xi)


def test_rectangle_variance_matches_area():
    # many cells: sample variance of increments ~ dt*dx within 3 SE
    g = GridSpec(nx=127, nt=1024, horizon_T=1.0)
    sheet = sample_sheet(SeedSpec(11, 0), g)
    inc = sheet.increments().ravel()
    n = inc.size
    assert n >= 10 ** 5
    var = inc.var()
    se = np.sqrt(2.0 / (n - 1)) * g.dt * g.dx  # SE of variance for normals
    assert abs(var - g.dt * g.dx) < 3.0 * se


def test_independent_sheets_uncorrelated():
    g = GridSpec(nx=63, nt=256, horizon_T=1.0)
    a = sample_sheet(SeedSpec(11, 0), g).xi.ravel()
    b = sample_sheet(SeedSpec(11, 1), g).xi.ravel()
    rho = np.corrcoef(a, b)[0, 1]
    assert abs(rho) < 4.0 / np.sqrt(a.size)


def test_noise_matrix_immutable():
    sheet = sample_sheet(SeedSpec(1, 0), GRID)
    with pytest.raises(ValueError):
        sheet.xi[0, 0] = 2.0


def test_refine_factor_validation():
    sheet = sample_sheet(SeedSpec(1, 0), GRID)
    for bad in (1, 3, 6, 0):
        with pytest.raises(ConfigError):
            refine(sheet, bad)


def test_refine_shapes():
    sheet = sample_sheet(SeedSpec(1, 0), GRID)
    fine = refine(sheet, 4)
    assert fine.grid.nt == 4 * GRID.nt
    assert fine.grid.nx == 4 * (GRID.nx + 1) - 1
    assert fine.grid.horizon_T == GRID.horizon_T


def test_refine_then_aggregate_roundtrip_exact():
    sheet = sample_sheet(SeedSpec(9, 3), GRID)
    for factor in (2, 4):
        fine = refine(sheet, factor)
        back = aggregate(fine, factor, GRID)
        assert np.array_equal(back.xi, sheet.xi)


def test_block_sums_reproduce_coarse_to_rounding():
    sheet = sample_sheet(SeedSpec(9, 3), GRID)
    f = 4
    fine = refine(sheet, f)
    core = fine.xi[:, : GRID.nx * f]
    blocks = core.reshape(GRID.nt, f, GRID.nx, f).sum(axis=(1, 3)) / f
    assert np.abs(blocks - sheet.xi).max() < 1e-12


def test_refine_is_deterministic():
    sheet = sample_sheet(SeedSpec(2, 5), GRID)
    a = refine(sheet, 2)
    b = refine(sample_sheet(SeedSpec(2, 5), GRID), 2)
    assert np.array_equal(a.xi, b.xi)


def test_refined_entries_remain_standard_normal():
    g = GridSpec(nx=31, nt=128, horizon_T=1.0)
    sheet = sample_sheet(SeedSpec(21, 0), g)
    fine = refine(sheet, 4)
    vals = fine.xi.ravel()
    n = vals.size
    assert abs(vals.mean()) < 4.0 / np.sqrt(n)
    assert abs(vals.var() - 1.0) < 4.0 * np.sqrt(2.0 / n)
    # kurtosis of a genuine normal is 3
    kurt = np.mean((vals - vals.mean()) ** 4) / vals.var() ** 2
    assert abs(kurt - 3.0) < 0.2


def test_refine_requires_seed():
    raw = NoiseRealization(xi=np.zeros((GRID.nt, GRID.nx)), grid=GRID)
    with pytest.raises(ConfigError):
        refine(raw, 2)


@given(st.integers(min_value=0, max_value=2 ** 32), st.integers(min_value=0, max_value=50))
@settings(max_examples=25, deadline=None)
def test_sheet_is_pure_function_of_seed(master, idx):
    g = GridSpec(nx=5, nt=6)
    a = sample_sheet(SeedSpec(master, idx), g)
    b = sample_sheet(SeedSpec(master, idx), g)
    assert np.array_equal(a.xi, b.xi)
