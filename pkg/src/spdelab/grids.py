"""Uniform space-time lattices on [0,T]x[0,1], scalar fields, and discrete norms.

Conventions used everywhere in the package:
  * nx interior spatial points, dx = 1/(nx+1); boundary indices 0 and nx+1
    carry the value 0 (homogeneous Dirichlet) and are stored explicitly.
  * nt time steps, dt = T/nt; trajectories hold nt+1 frames.
  * Space norms sum over interior points only; time quadrature is
    left-rectangle, matching the Euler stepper.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice on [0, horizon_T] x [0, 1]."""

    nx: int
    nt: int
    horizon_T: float = 1.0

    def __post_init__(self):
        if self.nx < 1:
            raise ContractViolation(f"nx must be a positive integer, got {self.nx}")
        if self.nt < 1:
            raise ContractViolation(f"nt must be a positive integer, got {self.nt}")
        if not self.horizon_T > 0:
            raise ContractViolation(f"horizon_T must be positive, got {self.horizon_T}")

    @property
    def dx(self):
        return 1.0 / (self.nx + 1)

    @property
    def dt(self):
        return self.horizon_T / self.nt

    def space_nodes(self):
        """All nx+2 spatial nodes including the two boundary nodes."""
        return np.linspace(0.0, 1.0, self.nx + 2)

    def interior_nodes(self):
        return self.space_nodes()[1:-1]

    def time_nodes(self):
        return np.linspace(0.0, self.horizon_T, self.nt + 1)


def _as_space_values(u, grid):
    values = u.values if isinstance(u, SpaceField) else np.asarray(u, dtype=float)
    if values.shape != (grid.nx + 2,):
        raise ContractViolation(
            f"space field has shape {values.shape}, expected {(grid.nx + 2,)}"
        )
    return values


@dataclass(frozen=True)
class SpaceField:
    """Scalar field on the spatial nodes; boundary entries are exactly 0."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] < 3:
            raise ContractViolation("SpaceField needs a 1-d array of length nx+2 >= 3")
        if values[0] != 0.0 or values[-1] != 0.0:
            raise ContractViolation("SpaceField boundary entries must be exactly 0")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_interior(cls, interior):
        interior = np.asarray(interior, dtype=float)
        return cls(np.concatenate(([0.0], interior, [0.0])))

    @classmethod
    def from_function(cls, func, grid):
        """Sample func(x) on the grid; boundary values are forced to 0."""
        values = np.asarray(func(grid.space_nodes()), dtype=float).copy()
        values[0] = 0.0
        values[-1] = 0.0
        return cls(values)

    @classmethod
    def zero(cls, grid):
        return cls(np.zeros(grid.nx + 2))

    @property
    def interior(self):
        return self.values[1:-1]


@dataclass(frozen=True)
class PathField:
    """Trajectory of nt+1 space fields, stored as an (nt+1, nx+2) array.

    frames[k] is the field at time level k; every frame carries zero
    boundary values.
    """

    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 3:
            raise ContractViolation("PathField needs an (nt+1, nx+2) array")
        if np.any(frames[:, 0] != 0.0) or np.any(frames[:, -1] != 0.0):
            raise ContractViolation("PathField boundary columns must be exactly 0")
        frames = frames.copy()
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @classmethod
    def zero(cls, grid):
        return cls(np.zeros((grid.nt + 1, grid.nx + 2)))

    def frame(self, k):
        return SpaceField(self.frames[k])

    def conforms(self, grid):
        return self.frames.shape == (grid.nt + 1, grid.nx + 2)


def l2_norm(u, grid):
    """Discrete L2([0,1]) norm: sqrt(dx * sum_i u_i^2) over interior points."""
    values = _as_space_values(u, grid)
    interior = values[1:-1]
    return float(np.sqrt(grid.dx * np.dot(interior, interior)))


def sup_l2_norm(p, grid):
    """Max over time levels of the l2_norm of each frame."""
    frames = p.frames if isinstance(p, PathField) else np.asarray(p, dtype=float)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ContractViolation("sup_l2_norm needs a non-empty path")
    if frames.shape[1] != grid.nx + 2:
        raise ContractViolation(
            f"path frames have width {frames.shape[1]}, expected {grid.nx + 2}"
        )
    interior = frames[:, 1:-1]
    return float(np.sqrt(grid.dx * np.max(np.einsum("ij,ij->i", interior, interior))))


def h_norm_sq(h, grid):
    """Squared Cameron-Martin norm: dt*dx*sum of hdot^2 over the lattice."""
    hdot = getattr(h, "hdot", h)
    hdot = np.asarray(hdot, dtype=float)
    if hdot.shape != (grid.nt, grid.nx):
        raise ContractViolation(
            f"control has shape {hdot.shape}, expected {(grid.nt, grid.nx)}"
        )
    return float(grid.dt * grid.dx * np.sum(hdot * hdot))
