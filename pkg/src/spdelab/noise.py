"""Reproducible Brownian-sheet increments with counter-based seeding.

Each lattice cell (n, i) of the sheet carries the rescaled rectangle
increment dW = sqrt(dt*dx) * xi[n, i] with xi iid N(0,1).  Streams are
derived from (master_seed, path_index) through a splittable seed sequence,
so Monte Carlo results are independent of worker scheduling.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractViolation
from .grids import GridSpec


@dataclass(frozen=True)
class SeedSpec:
    """Injective, deterministic (master_seed, path_index) -> stream mapping."""

    master_seed: int
    path_index: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed < 2 ** 64):
            raise ConfigError("master_seed must be a 64-bit unsigned integer",
                              field="master_seed")
        if self.path_index < 0:
            raise ConfigError("path_index must be nonnegative", field="path_index")

    def generator(self, level=0):
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.path_index, level))
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class NoiseRealization:
    """Immutable nt x nx matrix of standard normal draws plus its grid.

    A realization produced by refine keeps a reference to its coarse parent,
    so aggregation can return the parent matrix exactly instead of the
    block-sum reconstruction (which matches only to rounding error).
    """

    xi: np.ndarray
    grid: GridSpec
    seed: SeedSpec = None
    level: int = 0
    parent: "NoiseRealization" = None

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.shape != (self.grid.nt, self.grid.nx):
            raise ContractViolation(
                f"noise has shape {xi.shape}, expected {(self.grid.nt, self.grid.nx)}")
        xi = xi.copy()
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    def increments(self):
        """Brownian-sheet rectangle increments sqrt(dt*dx)*xi."""
        return np.sqrt(self.grid.dt * self.grid.dx) * self.xi


def sample_sheet(seed, grid):
    """Draw a sheet realization; a deterministic function of the seed."""
    rng = seed.generator(level=0)
    xi = rng.standard_normal((grid.nt, grid.nx))
    return NoiseRealization(xi=xi, grid=grid, seed=seed, level=0)


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def refine(noise, factor):
    """Bridge-consistent refinement of rectangle increments by `factor`.

    The fine grid has nt*factor time steps and nx_f interior points with
    nx_f + 1 = factor*(nx + 1), so dx_f = dx/factor.  Each coarse cell
    becomes a factor x factor block of fine cells with the same total area;
    block sums of the fine xi, divided by factor, reproduce the coarse xi
    exactly, and fine entries remain N(0,1) marginally.  The factor-1 extra
    fine columns bordering x=1 have no coarse counterpart and carry fresh
    independent draws.
    """
    if factor < 2 or not _is_power_of_two(factor):
        raise ConfigError("refinement factor must be a power of two >= 2",
                          field="factor")
    if noise.seed is None:
        raise ConfigError("cannot refine a noise realization without a seed",
                          field="seed")
    grid = noise.grid
    f = factor
    fine_grid = GridSpec(nx=f * (grid.nx + 1) - 1,
                         nt=f * grid.nt,
                         horizon_T=grid.horizon_T)
    rng = noise.seed.generator(level=noise.level + 1)
    e = rng.standard_normal((grid.nt, f, grid.nx, f))
    block_mean = e.mean(axis=(1, 3), keepdims=True)
    xi_blocks = e - block_mean + noise.xi[:, None, :, None] / f
    fine_core = xi_blocks.reshape(grid.nt * f, grid.nx * f)
    extra_cols = fine_grid.nx - grid.nx * f
    pad = rng.standard_normal((grid.nt * f, extra_cols))
    fine_xi = np.concatenate([fine_core, pad], axis=1)
    return NoiseRealization(xi=fine_xi, grid=fine_grid, seed=noise.seed,
                            level=noise.level + 1, parent=noise)


def aggregate(noise, factor, coarse_grid):
    """Inverse of refine on the shared cells: block-sum / factor.

    A realization that remembers the matching coarse parent is aggregated
    exactly (the parent is returned as-is); otherwise block sums reproduce
    the coarse matrix only up to accumulated rounding.
    """
    if factor < 2 or not _is_power_of_two(factor):
        raise ConfigError("aggregation factor must be a power of two >= 2",
                          field="factor")
    parent = noise.parent
    if parent is not None and parent.grid == coarse_grid \
            and noise.grid.nt == factor * coarse_grid.nt:
        return parent
    f = factor
    core = noise.xi[:, : coarse_grid.nx * f]
    blocks = core.reshape(coarse_grid.nt, f, coarse_grid.nx, f)
    xi_c = blocks.sum(axis=(1, 3)) / f
    return NoiseRealization(xi=xi_c, grid=coarse_grid, seed=noise.seed,
                            level=max(noise.level - 1, 0))
