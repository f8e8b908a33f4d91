"""Min-norm control evaluation of the moderate-deviation rate function.

The skeleton map A: hdot -> X-path is linear; the rate of a target path g
is inf { ||h||^2/2 : A hdot = g }.  We solve the Tikhonov-regularized
normal equations (A A* + reg I) mu = g by conjugate gradient, where A* is
the EXACT transpose of the implemented forward stepper in the discrete
inner products (reverse-time recursion with the same symmetric tridiagonal
solve and transposed difference operators).  Exact duality is what makes
CG trustworthy here.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractViolation
from .grids import GridSpec, PathField, h_norm_sq, sup_l2_norm
from .solvers import _Stepper, linearized_coefficient_arrays, solve_skeleton


@dataclass(frozen=True)
class Control:
    """Discretized hdot(t_n, x_i); membership in the radius-N ball is the
    predicate h_norm_sq <= N^2."""

    hdot: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        hdot = np.asarray(self.hdot, dtype=float)
        if hdot.shape != (self.grid.nt, self.grid.nx):
            raise ContractViolation(
                f"control has shape {hdot.shape}, expected "
                f"{(self.grid.nt, self.grid.nx)}")
        if not np.all(np.isfinite(hdot)):
            raise ContractViolation("control entries must be finite")
        hdot = hdot.copy()
        hdot.setflags(write=False)
        object.__setattr__(self, "hdot", hdot)

    @classmethod
    def zero(cls, grid):
        return cls(np.zeros((grid.nt, grid.nx)), grid)

    def norm_sq(self):
        return h_norm_sq(self.hdot, self.grid)

    def in_ball(self, radius):
        return self.norm_sq() <= radius * radius


@dataclass(frozen=True)
class RateCertificate:
    """I-value with its evidence: value = ||minimizer||^2/2 by construction,
    certified only up to the reported residual."""

    value: float
    minimizer: Control
    residual: float
    cg_iterations: int
    regularization: float
    multiplier: PathField = None  # dual variable mu from the normal equations


class SkeletonOperator:
    """The linear skeleton map and its exact discrete transpose.

    Inner products: control space dt*dx*sum over the (nt, nx) lattice;
    path space dt*dx*sum over interior nodes of frames 1..nt (frame 0 of
    any skeleton response is identically zero).
    """

    def __init__(self, base, p):
        grid = p.grid
        if not base.conforms(grid):
            raise ContractViolation("base path does not conform to grid")
        self.grid = grid
        self.params = p
        self.a, self.c, self.s = linearized_coefficient_arrays(p, base)
        self.stepper = _Stepper(grid)

    # -- forward: hdot (nt, nx) -> interior path (nt, nx), frames 1..nt
    def forward_interior(self, hdot):
        grid = self.grid
        dt, dx = grid.dt, grid.dx
        out = np.zeros((grid.nt, grid.nx))
        x = np.zeros(grid.nx + 2)
        for n in range(grid.nt):
            flux = self.c[n] * x
            rhs = (x[1:-1]
                   + dt * ((flux[2:] - flux[:-2]) / (2.0 * dx)
                           + self.a[n] * x[1:-1])
                   + dt * self.s[n] * hdot[n])
            x_int = self.stepper.solve(rhs)
            x = np.concatenate(([0.0], x_int, [0.0]))
            out[n] = x_int
        return out

    # -- adjoint: interior path weights mu (nt, nx) -> hdot (nt, nx)
    def adjoint_interior(self, mu):
        grid = self.grid
        dt, dx = grid.dt, grid.dx
        w = dt * dx
        out = np.zeros((grid.nt, grid.nx))
        nu = np.zeros(grid.nx)
        for n in range(grid.nt - 1, -1, -1):
            nu = nu + w * mu[n]
            z = self.stepper.solve(nu)
            out[n] = self.s[n] * z / dx
            z_full = np.concatenate(([0.0], z, [0.0]))
            dz = (z_full[2:] - z_full[:-2]) / (2.0 * dx)
            nu = z + dt * (-self.c[n][1:-1] * dz + self.a[n] * z)
        return out

    def control_inner(self, u, v):
        return self.grid.dt * self.grid.dx * float(np.sum(u * v))

    def path_inner(self, pframes, qframes):
        return self.grid.dt * self.grid.dx * float(np.sum(pframes * qframes))

    def interior_to_path(self, interior):
        grid = self.grid
        frames = np.zeros((grid.nt + 1, grid.nx + 2))
        frames[1:, 1:-1] = interior
        return PathField(frames)

    @staticmethod
    def path_to_interior(path):
        return np.asarray(path.frames[1:, 1:-1], dtype=float)


def forward_map(h, base, p):
    """The skeleton solver exposed as the linear operator hdot -> X-path."""
    return solve_skeleton(p, base, h).path


def adjoint_map(mu, base, p):
    """Exact transpose of the discrete forward map: <A h, mu> = <h, A* mu>."""
    op = SkeletonOperator(base, p)
    return Control(op.adjoint_interior(op.path_to_interior(mu)), p.grid)


def rate_lower_bound_functional(target, base, p, mu):
    """Dual certificate <target, mu> - ||A* mu||^2/2: a lower bound on the
    discrete rate of `target` for ANY multiplier mu (weak duality)."""
    op = SkeletonOperator(base, p)
    mu_int = op.path_to_interior(mu)
    astar = op.adjoint_interior(mu_int)
    pairing = op.path_inner(op.path_to_interior(target), mu_int)
    return pairing - 0.5 * h_norm_sq(astar, p.grid)


def evaluate_rate(target, base, p, reg=1e-6, tol=1e-10, max_iter=2000):
    """Tikhonov path to the min-norm control hitting `target`.

    Solves (A A* + reg I) mu = target by CG in the path inner product,
    returns hdot = A* mu with value = ||h||^2/2 and the achieved sup-L2
    residual ||A h - target||.  For attainable targets the value is
    nonincreasing toward the true rate as reg -> 0; unattainable targets
    show up as a residual that refuses to shrink with reg.
    """
    if not reg > 0:
        raise ConfigError("regularization must be positive", field="reg")
    grid = p.grid
    if not target.conforms(grid):
        raise ContractViolation("target does not conform to grid")
    op = SkeletonOperator(base, p)
    b = op.path_to_interior(target)

    def apply_normal(mu):
        return op.forward_interior(op.adjoint_interior(mu)) + reg * mu

    mu = np.zeros_like(b)
    r = b - apply_normal(mu)
    d = r.copy()
    rr = op.path_inner(r, r)
    b_norm = math.sqrt(max(op.path_inner(b, b), 1e-300))
    iterations = 0
    if math.sqrt(rr) / b_norm > tol:
        for iterations in range(1, max_iter + 1):
            ad = apply_normal(d)
            alpha = rr / op.path_inner(d, ad)
            mu = mu + alpha * d
            r = r - alpha * ad
            rr_new = op.path_inner(r, r)
            if not np.isfinite(rr_new):
                raise ConfigError("CG produced non-finite residual",
                                  field="target")
            if math.sqrt(rr_new) / b_norm <= tol:
                rr = rr_new
                break
            d = r + (rr_new / rr) * d
            rr = rr_new
        else:
            raise ContractViolation(
                f"CG did not converge in {max_iter} iterations; "
                f"last relative residual {math.sqrt(rr) / b_norm:.3e}")
    hdot = op.adjoint_interior(mu)
    fit = op.forward_interior(hdot)
    mismatch = op.interior_to_path(fit - b)
    residual = sup_l2_norm(mismatch, grid)
    minimizer = Control(hdot, grid)
    return RateCertificate(
        value=0.5 * h_norm_sq(hdot, grid),
        minimizer=minimizer,
        residual=residual,
        cg_iterations=iterations,
        regularization=reg,
        multiplier=op.interior_to_path(mu))


def rate_ladder(target, base, p, regs=(1e-2, 1e-4, 1e-6), tol=1e-10):
    """Certificates along a decreasing regularization ladder (reported, not
    hidden: the value should be nonincreasing for attainable targets)."""
    return [evaluate_rate(target, base, p, reg=r, tol=tol) for r in regs]
