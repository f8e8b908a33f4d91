"""Dirichlet heat kernel on [0,1]: evaluation, bound audits, and convolution.

G_t(x,y) solves du/dt = d2u/dx2 with zero boundary values.  Two series
representations are kept:
  * spectral: sum_n 2 sin(n pi x) sin(n pi y) exp(-n^2 pi^2 t), fast for
    large t;
  * method of images: sum_k [phi_t(x-y+2k) - phi_t(x+y+2k)] with phi_t the
    Gaussian density of variance 2t, fast for small t.
A crossover time selects the branch.  The seven classical kernel estimates
are audited numerically by fitting the smallest constant on a sample plan;
the literature proves only existence of the constants, so finiteness is the
checkable statement.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation
from .grids import PathField

_PI2 = np.pi * np.pi


@dataclass(frozen=True)
class KernelConfig:
    series_terms: int = 128
    crossover_time: float = 0.05
    tail_tolerance: float = 1e-12

    def __post_init__(self):
        if self.series_terms < 1:
            raise ConfigError("series_terms must be >= 1", field="series_terms")
        if not self.crossover_time > 0:
            raise ConfigError("crossover_time must be positive",
                              field="crossover_time")
        if not self.tail_tolerance > 0:
            raise ConfigError("tail_tolerance must be positive",
                              field="tail_tolerance")
        # geometric remainder of the spectral sum at the crossover
        n = self.series_terms + 1
        tail = 2.0 * math.exp(-n * n * _PI2 * self.crossover_time)
        if tail > self.tail_tolerance:
            raise ConfigError(
                "series_terms too small for tail_tolerance at the crossover",
                field="series_terms")


def _spectral_terms(t, cfg):
    """Number of spectral terms needed for the tail tolerance at time t."""
    need = math.log(2.0 / cfg.tail_tolerance) / (_PI2 * t)
    return max(1, min(cfg.series_terms, int(math.ceil(math.sqrt(need))) + 2))


def _image_terms(t, cfg):
    """Number of image pairs needed: exp(-(2k-2)^2/(4t)) below tolerance."""
    need = math.sqrt(t * math.log(1.0 / cfg.tail_tolerance))
    return max(2, int(math.ceil(1.0 + need)) + 1)


def _check_domain(t, x, y):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(t <= 0.0):
        raise ContractViolation("kernel time must be positive")
    if np.any((x < 0.0) | (x > 1.0)) or np.any((y < 0.0) | (y > 1.0)):
        raise ContractViolation("kernel arguments x, y must lie in [0,1]")
    return t, x, y


def _green_spectral(t, x, y, n_terms):
    n = np.arange(1, n_terms + 1, dtype=float)
    shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
    t_b = np.broadcast_to(np.asarray(t, dtype=float), shape)[..., None]
    x_b = np.broadcast_to(np.asarray(x, dtype=float), shape)[..., None]
    y_b = np.broadcast_to(np.asarray(y, dtype=float), shape)[..., None]
    terms = (2.0 * np.sin(n * np.pi * x_b) * np.sin(n * np.pi * y_b)
             * np.exp(-n * n * _PI2 * t_b))
    return terms.sum(axis=-1)


def _green_dx_spectral(t, x, y, n_terms):
    n = np.arange(1, n_terms + 1, dtype=float)
    shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
    t_b = np.broadcast_to(np.asarray(t, dtype=float), shape)[..., None]
    x_b = np.broadcast_to(np.asarray(x, dtype=float), shape)[..., None]
    y_b = np.broadcast_to(np.asarray(y, dtype=float), shape)[..., None]
    terms = (2.0 * n * np.pi * np.cos(n * np.pi * x_b) * np.sin(n * np.pi * y_b)
             * np.exp(-n * n * _PI2 * t_b))
    return terms.sum(axis=-1)


def _green_dt_spectral(t, x, y, n_terms):
    n = np.arange(1, n_terms + 1, dtype=float)
    shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
    t_b = np.broadcast_to(np.asarray(t, dtype=float), shape)[..., None]
    x_b = np.broadcast_to(np.asarray(x, dtype=float), shape)[..., None]
    y_b = np.broadcast_to(np.asarray(y, dtype=float), shape)[..., None]
    terms = (-2.0 * n * n * _PI2 * np.sin(n * np.pi * x_b)
             * np.sin(n * np.pi * y_b) * np.exp(-n * n * _PI2 * t_b))
    return terms.sum(axis=-1)


def _phi(u, t):
    """Gaussian density with variance 2t."""
    return np.exp(-u * u / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)


def _phi_du(u, t):
    return -u / (2.0 * t) * _phi(u, t)


def _phi_dt(u, t):
    return _phi(u, t) * (u * u / (4.0 * t * t) - 0.5 / t)


def _green_images(t, x, y, k_terms, term=_phi):
    shape = np.broadcast(np.asarray(t), np.asarray(x), np.asarray(y)).shape
    t_b = np.broadcast_to(np.asarray(t, dtype=float), shape)
    x_b = np.broadcast_to(np.asarray(x, dtype=float), shape)
    y_b = np.broadcast_to(np.asarray(y, dtype=float), shape)
    total = np.zeros(shape)
    for k in range(-k_terms, k_terms + 1):
        total = total + term(x_b - y_b + 2.0 * k, t_b)
        total = total - term(x_b + y_b + 2.0 * k, t_b)
    return total


def _eval_branched(t, x, y, cfg, spectral_fn, image_term):
    t, x, y = _check_domain(t, x, y)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    scalar = np.asarray(t).ndim == 0 and np.asarray(x).ndim == 0 \
        and np.asarray(y).ndim == 0
    shape = np.broadcast(t, x, y).shape
    t_b = np.broadcast_to(np.asarray(t, dtype=float), shape)
    x_b = np.broadcast_to(np.asarray(x, dtype=float), shape)
    y_b = np.broadcast_to(np.asarray(y, dtype=float), shape)
    out = np.empty(shape)
    small = t_b < cfg.crossover_time
    if np.any(small):
        tmax = float(t_b[small].max())
        k = _image_terms(tmax, cfg)
        out[small] = _green_images(t_b[small], x_b[small], y_b[small], k,
                                   term=image_term)
    if np.any(~small):
        tmin = float(t_b[~small].min())
        n = _spectral_terms(tmin, cfg)
        out[~small] = spectral_fn(t_b[~small], x_b[~small], y_b[~small], n)
    del t_arr
    return float(out.reshape(())) if scalar else out


def green(t, x, y, cfg=None):
    """Evaluate G_t(x,y); branch between image and spectral series."""
    cfg = cfg or KernelConfig()
    return _eval_branched(t, x, y, cfg, _green_spectral, _phi)


def green_spectral(t, x, y, cfg=None):
    """Spectral-series evaluation regardless of t (for branch agreement)."""
    cfg = cfg or KernelConfig()
    t, x, y = _check_domain(t, x, y)
    tmin = float(np.min(t))
    return _green_spectral(t, x, y, _spectral_terms(tmin, cfg))


def green_images(t, x, y, cfg=None):
    """Image-series evaluation regardless of t (for branch agreement)."""
    cfg = cfg or KernelConfig()
    t, x, y = _check_domain(t, x, y)
    tmax = float(np.max(t))
    return _green_images(t, x, y, _image_terms(tmax, cfg))


def green_dx(t, x, y, cfg=None):
    """d/dx G_t(x,y), term-by-term differentiated series."""
    cfg = cfg or KernelConfig()
    return _eval_branched(t, x, y, cfg, _green_dx_spectral, _phi_du)


def green_dt(t, x, y, cfg=None):
    """d/dt G_t(x,y) (used by the kernel estimate audit)."""
    cfg = cfg or KernelConfig()
    return _eval_branched(t, x, y, cfg, _green_dt_spectral, _phi_dt)


def green_dy(t, x, y, cfg=None):
    """d/dy G_t(x,y) via the kernel's (x,y) symmetry: equals d/dx G_t(y,x)."""
    return green_dx(t, y, x, cfg)


def semigroup_defect(t, s, cfg=None, grid=None, n_quad=257, n_sample=9):
    """Max over sampled (x,y) of |int G_t(x,z)G_s(z,y)dz - G_{t+s}(x,y)|.

    Trapezoid quadrature in z on `grid`'s nodes (or n_quad uniform nodes).
    """
    cfg = cfg or KernelConfig()
    if not (t > 0 and s > 0):
        raise ContractViolation("semigroup_defect needs t, s > 0")
    if grid is not None:
        z = grid.space_nodes()
    else:
        z = np.linspace(0.0, 1.0, n_quad)
    w = np.full(z.shape, z[1] - z[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    xs = np.linspace(0.0, 1.0, n_sample + 2)[1:-1]
    gt = green(t, xs[:, None], z[None, :], cfg)        # (n_sample, nz)
    gs = green(s, z[:, None], xs[None, :], cfg)        # (nz, n_sample)
    comp = gt @ (w[:, None] * gs)                      # (n_sample, n_sample)
    direct = green(t + s, xs[:, None], xs[None, :], cfg)
    return float(np.max(np.abs(comp - direct)))


def kernel_mass(t, x, cfg=None, n_quad=128):
    """int_0^1 G_t(x,y) dy by Gauss-Legendre; <= 1 (Dirichlet kernel loses mass)."""
    cfg = cfg or KernelConfig()
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    y = 0.5 * (nodes + 1.0)
    vals = green(t, np.asarray(x, dtype=float), y, cfg)
    return float(0.5 * np.dot(vals, weights))


# --- space-time convolution operator -----------------------------------------

_KERNEL_KINDS = ("G", "G2", "dyG")


def _lag_matrices(kernel_kind, grid, cfg):
    """Kernel matrices H[m][i,j] = H(m*dt; x_i, y_j) for lags m = 1..nt."""
    nodes = grid.space_nodes()
    x = nodes[:, None]
    y = nodes[None, :]
    mats = []
    for m in range(1, grid.nt + 1):
        tau = m * grid.dt
        if kernel_kind == "G":
            mats.append(green(tau, x, y, cfg))
        elif kernel_kind == "G2":
            g = green(tau, x, y, cfg)
            mats.append(g * g)
        elif kernel_kind == "dyG":
            mats.append(green_dy(tau, x, y, cfg))
        else:
            raise ContractViolation(
                f"kernel_kind must be one of {_KERNEL_KINDS}, got {kernel_kind!r}")
    return mats


def apply_J(v, kernel_kind, grid, cfg=None):
    """Space-time convolution J(v)(t,x) = sum_{r<n} H(t_n - t_r) v(t_r) dy dr.

    Left-rectangle in time, trapezoid in space; linear in v.
    """
    cfg = cfg or KernelConfig()
    frames = v.frames if isinstance(v, PathField) else np.asarray(v, dtype=float)
    if frames.shape != (grid.nt + 1, grid.nx + 2):
        raise ContractViolation("v does not conform to the grid")
    mats = _lag_matrices(kernel_kind, grid, cfg)
    w = np.full(grid.nx + 2, grid.dx)
    w[0] *= 0.5
    w[-1] *= 0.5
    weighted = frames * w[None, :]
    out = np.zeros_like(frames)
    for n in range(1, grid.nt + 1):
        acc = np.zeros(grid.nx + 2)
        for r in range(n):
            acc += mats[n - r - 1] @ weighted[r]
        out[n] = acc * grid.dt
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return PathField(out)


# --- kernel estimate audit ----------------------------------------------------

@dataclass(frozen=True)
class EstimateRecord:
    estimate_id: int
    sample_count: int
    fitted_constant: float
    worst_point: tuple
    passed: bool


@dataclass(frozen=True)
class BoundAuditReport:
    records: tuple

    @property
    def all_passed(self):
        return all(rec.passed for rec in self.records)

    def record(self, estimate_id):
        for rec in self.records:
            if rec.estimate_id == estimate_id:
                return rec
        raise KeyError(estimate_id)

    def to_rows(self):
        return [
            {
                "estimate_id": rec.estimate_id,
                "sample_count": rec.sample_count,
                "fitted_constant": rec.fitted_constant,
                "worst_point": repr(rec.worst_point),
                "passed": rec.passed,
            }
            for rec in self.records
        ]


@dataclass(frozen=True)
class AuditSamplePlan:
    """Sample lattices for the seven estimates.

    Exponent ranges follow the estimates' statements: p in (3/2, 3) for
    estimate 4, p in (1, 3) for estimates 5 and 6.  gamma values for
    estimate 7 are sampled; alpha is taken at 90% of (gamma-1)/(2*gamma).
    """

    horizon_T: float = 0.5
    tau_ladder: tuple = (1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3)
    x_points: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    p_values_4: tuple = (1.6, 2.0, 2.5)
    p_values_56: tuple = (1.5, 2.0, 2.5)
    gamma_values: tuple = (2.0, 4.0, 8.0)
    gaussian_decay: float = 0.125  # exponent constant a=b=d=1/8
    n_space_quad: int = 257
    n_time_quad: int = 96

    def __post_init__(self):
        for p in self.p_values_4:
            if not (1.5 < p < 3.0):
                raise ContractViolation(
                    f"estimate-4 exponent p={p} outside (3/2, 3)")
        for p in self.p_values_56:
            if not (1.0 < p < 3.0):
                raise ContractViolation(
                    f"estimate-5/6 exponent p={p} outside (1, 3)")
        if any(t <= 0 for t in self.tau_ladder):
            raise ContractViolation("tau ladder must be positive (t=s excluded)")


def _graded_time_nodes(a, b, p, n):
    """Nodes for int_a^b with a u^((1-p)/2) singularity at u=a.

    Substitution u = a + (b-a) w^beta with beta = 4/(3-p) makes the
    transformed integrand vanish like w at w=0; returns (nodes, weights)
    for trapezoid in w including the Jacobian.
    """
    beta = 4.0 / (3.0 - p)
    w = np.linspace(0.0, 1.0, n + 1)
    u = a + (b - a) * w ** beta
    jac = (b - a) * beta * w ** (beta - 1.0)
    quad_w = np.full(n + 1, 1.0 / n)
    quad_w[0] *= 0.5
    quad_w[-1] *= 0.5
    return u[1:], (jac * quad_w)[1:]  # integrand*jac -> 0 at w=0, drop node


def _adaptive_z_nodes(kernel_time, centers, n_local=201, n_global=65):
    """Spatial nodes resolving Gaussian peaks of width sqrt(4u) at `centers`.

    A coarse global grid covers the smooth part; refined windows of
    half-width 10*sqrt(4u) around each center capture the peaks at any u.
    """
    h = math.sqrt(4.0 * max(kernel_time, 1e-300))
    parts = [np.linspace(0.0, 1.0, n_global)]
    for c in centers:
        lo = max(0.0, c - 10.0 * h)
        hi = min(1.0, c + 10.0 * h)
        if hi > lo:
            parts.append(np.linspace(lo, hi, n_local))
    return np.unique(np.concatenate(parts))


def time_slice_lp(t_hi, t_lo, x, p, cfg, plan):
    """int_{t_lo}^{t_hi} int_0^1 G_u(x,z)^p dz du with graded quadrature."""
    u, wu = _graded_time_nodes(t_lo, t_hi, p, plan.n_time_quad)
    inner = np.empty(u.size)
    for i, ui in enumerate(u):
        z = _adaptive_z_nodes(ui, (x,), n_local=plan.n_space_quad)
        inner[i] = np.trapezoid(np.abs(green(ui, x, z, cfg)) ** p, z)
    return float(np.dot(inner, wu))


def audit_bounds(cfg=None, plan=None):
    """Fit the smallest constant for each of the seven kernel estimates.

    The constants are fitted, not asserted: the estimates only claim
    existence, so the pass criterion is a finite fitted maximum ratio.
    """
    cfg = cfg or KernelConfig()
    plan = plan or AuditSamplePlan()
    a = plan.gaussian_decay
    xs = np.asarray(plan.x_points)
    records = []

    def fit(ratios_points):
        ratios = np.asarray([r for r, _ in ratios_points])
        if ratios.size == 0:
            return 0.0, (), True
        worst = int(np.argmax(ratios))
        c = float(ratios[worst])
        return c, ratios_points[worst][1], bool(np.isfinite(c))

    # (1)-(3): pointwise Gaussian-envelope bounds
    for est_id, func, power in ((1, green, 0.5), (2, green_dx, 1.5),
                                (3, green_dt, 2.0)):
        samples = []
        for tau in plan.tau_ladder:
            for x in xs:
                for y in xs:
                    lhs = abs(func(tau, float(x), float(y), cfg))
                    rhs = tau ** (-power) * math.exp(-a * (x - y) ** 2 / tau)
                    samples.append((lhs / rhs, (tau, float(x), float(y))))
        c, pt, ok = fit(samples)
        records.append(EstimateRecord(est_id, len(samples), c, pt, ok))

    T = plan.horizon_T

    # (4): spatial increments, sup over t realized at t = T
    samples = []
    for p in plan.p_values_4:
        u, wu = _graded_time_nodes(0.0, T, p, plan.n_time_quad)
        for i, x in enumerate(xs):
            for y in xs[i + 1:]:
                inner = np.empty(u.size)
                for j, uj in enumerate(u):
                    zj = _adaptive_z_nodes(uj, (float(x), float(y)))
                    gx = green(uj, float(x), zj, cfg)
                    gy = green(uj, float(y), zj, cfg)
                    inner[j] = np.trapezoid(np.abs(gx - gy) ** p, zj)
                lhs = float(np.dot(inner, wu))
                rhs = abs(x - y) ** (3.0 - p)
                samples.append((lhs / rhs, (p, float(x), float(y))))
    c, pt, ok = fit(samples)
    records.append(EstimateRecord(4, len(samples), c, pt, ok))

    # (5): temporal increments of the kernel
    samples = []
    pairs = [(s, t) for s in (0.05, 0.1, 0.2) for t in (0.12, 0.25, 0.45)
             if t > s]
    for p in plan.p_values_56:
        for s, t in pairs:
            # singularity sits at u -> s through G_{s-u}
            u, wu = _graded_time_nodes(0.0, s, p, plan.n_time_quad)
            u = s - u[::-1]
            wu = wu[::-1]
            for x in xs:
                inner = np.empty(u.size)
                for j, uj in enumerate(u):
                    zj = _adaptive_z_nodes(s - uj, (float(x),))
                    g1 = green(t - uj, float(x), zj, cfg)
                    g2 = green(s - uj, float(x), zj, cfg)
                    inner[j] = np.trapezoid(np.abs(g1 - g2) ** p, zj)
                lhs = float(np.dot(inner, wu))
                rhs = (t - s) ** ((3.0 - p) / 2.0)
                samples.append((lhs / rhs, (p, s, t, float(x))))
    c, pt, ok = fit(samples)
    records.append(EstimateRecord(5, len(samples), c, pt, ok))

    # (6): Lp mass over a time slice
    samples = []
    for p in plan.p_values_56:
        for s, t in [(0.0, tau) for tau in plan.tau_ladder] + [(0.1, 0.3)]:
            for x in xs:
                lhs = time_slice_lp(t, s, float(x), p, cfg, plan)
                rhs = (t - s) ** ((3.0 - p) / 2.0)
                samples.append((lhs / rhs, (p, s, t, float(x))))
    c, pt, ok = fit(samples)
    records.append(EstimateRecord(6, len(samples), c, pt, ok))

    # (7): Hoelder bound in the space-time metric, G_tau := 0 for tau <= 0
    samples = []
    point_pairs = [((0.3, 0.4), (0.25, 0.4)), ((0.3, 0.4), (0.3, 0.45)),
                   ((0.2, 0.6), (0.15, 0.5)), ((0.4, 0.3), (0.35, 0.35))]
    for gamma in plan.gamma_values:
        alpha = 0.9 * (gamma - 1.0) / (2.0 * gamma)
        for (t, x), (s, y) in point_pairs:
            t_, s_ = max(t, s), min(t, s)
            x_ = x if t >= s else y
            y_ = y if t >= s else x
            # int_0^{s} |G_{t-u}(x,.) - G_{s-u}(y,.)|^2 (singular at u -> s)
            u, wu = _graded_time_nodes(0.0, s_, 2.0, plan.n_time_quad)
            u = s_ - u[::-1]
            wu = wu[::-1]
            inner = np.empty(u.size)
            for j, uj in enumerate(u):
                zj = _adaptive_z_nodes(s_ - uj, (x_, y_))
                g1 = green(t_ - uj, x_, zj, cfg)
                g2 = green(s_ - uj, y_, zj, cfg)
                inner[j] = np.trapezoid((g1 - g2) ** 2, zj)
            part1 = float(np.dot(inner, wu))
            # int_{s}^{t} |G_{t-u}(x,.)|^2 = int_0^{t-s} G_w^2 dw, singular at 0
            if t_ > s_:
                u2, wu2 = _graded_time_nodes(0.0, t_ - s_, 2.0, plan.n_time_quad)
                inner2 = np.empty(u2.size)
                for j, uj in enumerate(u2):
                    zj = _adaptive_z_nodes(uj, (x_,))
                    inner2[j] = np.trapezoid(green(uj, x_, zj, cfg) ** 2, zj)
                part2 = float(np.dot(inner2, wu2))
            else:
                part2 = 0.0
            rho = math.hypot(t - s, x - y)
            lhs = part1 + part2
            samples.append((lhs / rho ** (2.0 * alpha),
                            (gamma, alpha, t, x, s, y)))
    c, pt, ok = fit(samples)
    records.append(EstimateRecord(7, len(samples), c, pt, ok))

    return BoundAuditReport(records=tuple(records))


def estimate6_slope(p, cfg=None, plan=None, t_ladder=(1e-4, 3e-4, 1e-3, 3e-3, 1e-2)):
    """Log-log slope of int_0^t int G_u(x,.)^p vs t; the bound predicts (3-p)/2."""
    cfg = cfg or KernelConfig()
    plan = plan or AuditSamplePlan()
    x = 0.5
    vals = [time_slice_lp(t, 0.0, x, p, cfg, plan) for t in t_ladder]
    logs_t = np.log(np.asarray(t_ladder))
    logs_v = np.log(np.asarray(vals))
    slope = np.polyfit(logs_t, logs_v, 1)[0]
    return float(slope)
