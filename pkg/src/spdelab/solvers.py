"""Semi-implicit finite-difference steppers for the semilinear SPDE family.

One stepper, specialized five ways:

  * solve_deterministic : small-noise limit equation (epsilon = 0)
  * solve_spde          : noisy equation at intensity sqrt(epsilon)
  * solve_linearized    : Gaussian fluctuation field driven by the same noise
  * solve_skeleton      : linearized equation forced by a control hdot
  * solve_controlled    : rescaled difference field with exact difference
                          quotients and a Girsanov control shift

Diffusion is implicit (one symmetric tridiagonal solve per step, no dt
restriction); drift, flux divergence and noise are explicit.  The flux term
uses the conservative centered difference of g(u).  Noise enters as
sqrt(dt/dx) * xi multiplying sigma, the scaling under which the scheme
converges to the mild solution.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import BlowUpError, ConfigError, ContractViolation
from .grids import GridSpec, PathField, SpaceField, l2_norm
from .coefficients import CoefficientSet
from .noise import NoiseRealization


@dataclass(frozen=True)
class SimParams:
    grid: GridSpec
    coefficients: CoefficientSet
    initial_condition: SpaceField
    epsilon: float = 0.0
    deviation_scale: Optional[Callable] = None
    amplitude_cap: float = math.inf

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError("epsilon must be nonnegative", field="epsilon")
        if not self.amplitude_cap > 0:
            raise ConfigError("amplitude_cap must be positive",
                              field="amplitude_cap")
        if self.initial_condition.values.shape != (self.grid.nx + 2,):
            raise ContractViolation("initial condition does not conform to grid")

    def lam(self):
        if self.deviation_scale is None:
            raise ConfigError("deviation_scale required for this solve",
                              field="deviation_scale")
        return float(self.deviation_scale(self.epsilon))


@dataclass(frozen=True)
class SolveOutput:
    path: PathField
    exceedance_time: Optional[int]  # first time level with l2 norm >= cap
    diagnostics: dict

    def exceeded(self):
        return self.exceedance_time is not None


class _Stepper:
    """Prefactored implicit-diffusion step: (I - dt*Lap_h) u_new = rhs."""

    def __init__(self, grid):
        self.grid = grid
        c = grid.dt / grid.dx ** 2
        nx = grid.nx
        ab = np.zeros((2, nx))
        ab[0, 1:] = -c
        ab[1, :] = 1.0 + 2.0 * c
        self._cb = cholesky_banded(ab, lower=False)
        self._diag = ab[1].copy()
        self._off = -c

    def solve(self, rhs):
        return cho_solve_banded((self._cb, False), rhs)

    def residual(self, u_new, rhs):
        """inf-norm residual of the tridiagonal solve (diagnostic)."""
        r = self._diag * u_new
        r[:-1] += self._off * u_new[1:]
        r[1:] += self._off * u_new[:-1]
        return float(np.max(np.abs(r - rhs)))


def _centered_flux_divergence(field_full, dx):
    """Interior centered difference of a full-node field (Dirichlet aware)."""
    return (field_full[2:] - field_full[:-2]) / (2.0 * dx)


def _run_steps(grid, cap, initial_full, rhs_builder, check_every_residual=True):
    """Common time loop: returns (frames, exceedance_level, diagnostics)."""
    nt, nx = grid.nt, grid.nx
    stepper = _Stepper(grid)
    frames = np.zeros((nt + 1, nx + 2))
    frames[0] = initial_full
    max_abs = np.zeros(nt + 1)
    residuals = np.zeros(nt)
    max_abs[0] = float(np.max(np.abs(initial_full)))
    exceed = 0 if l2_norm(initial_full, grid) >= cap else None
    u = initial_full.copy()
    for n in range(nt):
        rhs = rhs_builder(n, u)
        if not np.all(np.isfinite(rhs)):
            raise BlowUpError(n + 1)
        u_int = stepper.solve(rhs)
        if not np.all(np.isfinite(u_int)):
            raise BlowUpError(n + 1)
        if check_every_residual:
            residuals[n] = stepper.residual(u_int, rhs)
        u = np.concatenate(([0.0], u_int, [0.0]))
        frames[n + 1] = u
        max_abs[n + 1] = float(np.max(np.abs(u)))
        if exceed is None and math.sqrt(grid.dx * float(np.dot(u_int, u_int))) >= cap:
            exceed = n + 1
    diagnostics = {"max_abs": max_abs, "tridiag_residual": residuals}
    return PathField(frames), exceed, diagnostics


def _nonlinear_rhs_builder(p, noise_xi, noise_prefactor):
    """RHS of the nonlinear stepper; noise term skipped when prefactor is 0."""
    grid = p.grid
    coeffs = p.coefficients
    nodes = grid.space_nodes()
    dt, dx = grid.dt, grid.dx
    noise_scale = noise_prefactor * math.sqrt(dt / dx)

    def build(n, u_full):
        t_n = n * dt
        u_int = u_full[1:-1]
        f_int = coeffs.f(t_n, nodes[1:-1], u_int)
        g_full = coeffs.g1(t_n, nodes, u_full) + coeffs.g2(t_n, u_full)
        rhs = u_int + dt * (f_int + _centered_flux_divergence(g_full, dx))
        if noise_prefactor != 0.0:
            sig_int = coeffs.sigma(t_n, nodes[1:-1], u_int)
            rhs = rhs + noise_scale * sig_int * noise_xi[n]
        return rhs

    return build


def solve_deterministic(p):
    """Semi-implicit Euler for the zero-noise equation."""
    builder = _nonlinear_rhs_builder(p, None, 0.0)
    path, exceed, diag = _run_steps(
        p.grid, p.amplitude_cap, p.initial_condition.values, builder)
    return SolveOutput(path=path, exceedance_time=exceed, diagnostics=diag)


def solve_mild_picard(p, max_iter=40, tol=1e-10):
    """Picard iteration on the zero-noise mild form (stepper cross-check).

    Iterates U <- G_t eta + J_G(f(U)) - J_dyG(g(U)) with the Dirichlet
    kernel evaluated from its series, so the fixed point shares nothing with
    the finite-difference stepper except the grid.  Returns (path, n_iter,
    final sup-norm update).
    """
    from .kernel import KernelConfig, apply_J, green

    grid = p.grid
    coeffs = p.coefficients
    nodes = grid.space_nodes()
    cfg = KernelConfig()
    eta = p.initial_condition.values
    w = np.full(grid.nx + 2, grid.dx)
    w[0] *= 0.5
    w[-1] *= 0.5
    homogeneous = np.empty((grid.nt + 1, grid.nx + 2))
    homogeneous[0] = eta
    x_col = nodes[:, None]
    y_row = nodes[None, :]
    for n in range(1, grid.nt + 1):
        homogeneous[n] = green(n * grid.dt, x_col, y_row, cfg) @ (w * eta)
    homogeneous[:, 0] = 0.0
    homogeneous[:, -1] = 0.0

    t_col = grid.time_nodes()[:, None]
    x_row = nodes[None, :]
    u = homogeneous.copy()
    gap = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        f_val = coeffs.f(t_col, x_row, u)
        g_val = coeffs.g1(t_col, x_row, u) + coeffs.g2(t_col, u)
        u_new = (homogeneous
                 + apply_J(np.broadcast_to(f_val, u.shape), "G", grid, cfg).frames
                 - apply_J(np.broadcast_to(g_val, u.shape), "dyG", grid, cfg).frames)
        gap = float(np.max(np.abs(u_new - u)))
        u = u_new
        if not np.all(np.isfinite(u)):
            raise BlowUpError(iterations)
        if gap < tol:
            break
    return PathField(u), iterations, gap


def solve_spde(p, noise):
    """Same stepper plus the explicit noise channel; epsilon=0 reproduces
    solve_deterministic bit-for-bit."""
    if noise.grid != p.grid:
        raise ContractViolation("noise grid does not match simulation grid")
    prefactor = math.sqrt(p.epsilon)
    builder = _nonlinear_rhs_builder(p, noise.xi, prefactor)
    path, exceed, diag = _run_steps(
        p.grid, p.amplitude_cap, p.initial_condition.values, builder)
    return SolveOutput(path=path, exceedance_time=exceed, diagnostics=diag)


def linearized_coefficient_arrays(p, base):
    """Per-step arrays (f', g', sigma) evaluated along the base path U0."""
    grid = p.grid
    coeffs = p.coefficients
    nodes = grid.space_nodes()
    nt = grid.nt
    a = np.zeros((nt, grid.nx))        # f'(t_n, x, U0_n) on interior nodes
    c = np.zeros((nt, grid.nx + 2))    # g'(t_n, x, U0_n) on all nodes
    s = np.zeros((nt, grid.nx))        # sigma(t_n, x, U0_n) on interior nodes
    for n in range(nt):
        t_n = n * grid.dt
        u = base.frames[n]
        a[n] = coeffs.f_prime(t_n, nodes[1:-1], u[1:-1])
        c[n] = coeffs.g_prime(t_n, nodes, u)
        s[n] = coeffs.sigma(t_n, nodes[1:-1], u[1:-1])
    return a, c, s


def _linear_rhs_builder(grid, a, c, s, forcing):
    """RHS of the linear stepper with per-step forcing(n) added to rhs."""
    dt, dx = grid.dt, grid.dx

    def build(n, v_full):
        v_int = v_full[1:-1]
        flux = c[n] * v_full
        rhs = v_int + dt * (_centered_flux_divergence(flux, dx) + a[n] * v_int)
        return rhs + forcing(n)

    return build


def solve_linearized(p, base, noise):
    """Gaussian fluctuation field V: linearization around U0, driven by noise,
    started from 0 (the limit field carries no initial term)."""
    grid = p.grid
    if not base.conforms(grid):
        raise ContractViolation("base path does not conform to grid")
    if noise.grid != grid:
        raise ContractViolation("noise grid does not match simulation grid")
    a, c, s = linearized_coefficient_arrays(p, base)
    scale = math.sqrt(grid.dt / grid.dx)

    def forcing(n):
        return s[n] * (scale * noise.xi[n])

    builder = _linear_rhs_builder(grid, a, c, s, forcing)
    path, exceed, diag = _run_steps(
        grid, p.amplitude_cap, np.zeros(grid.nx + 2), builder)
    return SolveOutput(path=path, exceedance_time=exceed, diagnostics=diag)


def solve_skeleton(p, base, h):
    """Deterministic controlled response: noise replaced by sigma(U0)*hdot."""
    grid = p.grid
    if not base.conforms(grid):
        raise ContractViolation("base path does not conform to grid")
    hdot = np.asarray(getattr(h, "hdot", h), dtype=float)
    if hdot.shape != (grid.nt, grid.nx):
        raise ContractViolation("control does not conform to grid")
    a, c, s = linearized_coefficient_arrays(p, base)
    dt = grid.dt

    def forcing(n):
        return dt * s[n] * hdot[n]

    builder = _linear_rhs_builder(grid, a, c, s, forcing)
    path, exceed, diag = _run_steps(
        grid, p.amplitude_cap, np.zeros(grid.nx + 2), builder)
    return SolveOutput(path=path, exceedance_time=exceed, diagnostics=diag)


def solve_controlled(p, noise, v=None, base=None):
    """Rescaled difference field X with exact difference quotients.

    X tracks (U_eps - U0)/(sqrt(eps)*lambda(eps)) exactly when v = 0; the
    nonlinearities enter through [f(U0 + a X) - f(U0)]/a with
    a = sqrt(eps)*lambda(eps), never through the derivative shortcut, and
    the control shifts the dynamics by sigma(U0 + a X) * vdot.
    """
    grid = p.grid
    if noise.grid != grid:
        raise ContractViolation("noise grid does not match simulation grid")
    if p.epsilon <= 0:
        raise ConfigError("solve_controlled needs epsilon > 0", field="epsilon")
    lam = p.lam()
    a_scale = math.sqrt(p.epsilon) * lam
    if a_scale >= 1.0:
        raise ConfigError(
            f"sqrt(eps)*lambda(eps) = {a_scale} >= 1: outside the moderate regime",
            field="deviation_scale")
    if base is None:
        base = solve_deterministic(p).path
    elif not base.conforms(grid):
        raise ContractViolation("base path does not conform to grid")
    if v is not None:
        vdot = np.asarray(getattr(v, "hdot", v), dtype=float)
        if vdot.shape != (grid.nt, grid.nx):
            raise ContractViolation("control does not conform to grid")
    else:
        vdot = None

    coeffs = p.coefficients
    nodes = grid.space_nodes()
    dt, dx = grid.dt, grid.dx
    noise_scale = math.sqrt(dt / dx) / lam

    def build(n, x_full):
        t_n = n * dt
        u0 = base.frames[n]
        shifted = u0 + a_scale * x_full
        df = (coeffs.f(t_n, nodes, shifted) - coeffs.f(t_n, nodes, u0)) / a_scale
        dg = (coeffs.g1(t_n, nodes, shifted) + coeffs.g2(t_n, shifted)
              - coeffs.g1(t_n, nodes, u0) - coeffs.g2(t_n, u0)) / a_scale
        sig = coeffs.sigma(t_n, nodes[1:-1], shifted[1:-1])
        rhs = (x_full[1:-1]
               + dt * (df[1:-1] + _centered_flux_divergence(dg, dx))
               + noise_scale * sig * noise.xi[n])
        if vdot is not None:
            rhs = rhs + dt * sig * vdot[n]
        return rhs

    path, exceed, diag = _run_steps(
        grid, p.amplitude_cap, np.zeros(grid.nx + 2), build)
    return SolveOutput(path=path, exceedance_time=exceed, diagnostics=diag)
