"""Monte Carlo studies: contraction in epsilon, coupled CLT, MDP tails, and
grid refinement.

Coupling policy (the core correctness requirement): one NoiseRealization per
(epsilon, path) index is shared by every field that needs noise at that
index.  Per-path statistics are collected into an array indexed by path and
reduced sequentially with compensated summation, so results are a
deterministic function of (master_seed, path count) and independent of the
worker count or execution order.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as sps

from .coefficients import preset, zero_coefficients
from .errors import ConfigError, DegenerateStudyError
from .expr import compile_expression
from .grids import GridSpec, PathField, SpaceField, h_norm_sq, sup_l2_norm
from .noise import SeedSpec, aggregate, refine, sample_sheet
from .rate import Control, evaluate_rate
from .solvers import (SimParams, solve_controlled, solve_deterministic,
                      solve_linearized, solve_spde)

_UNCOUPLED_OFFSET = 2 ** 30  # path-index offset for deliberately fresh noise


@dataclass(frozen=True)
class StudyConfig:
    """Fully picklable study description (workers rebuild everything from it)."""

    nx: int = 64
    nt: int = 4096
    horizon_T: float = 0.25
    preset: str = "burgers"
    custom_coefficients: tuple = ()  # ((key, value), ...) pairs for "custom"
    epsilon_ladder: tuple = (1e-2, 1e-3, 1e-4)
    paths_per_epsilon: int = 64
    deviation_scale_expr: str = "eps**(-0.25)"
    event_threshold: float = 0.5
    master_seed: int = 20260823
    amplitude_cap: float = 10.0
    ic_expression: str = "sin(pi*x)"
    threads: int = 1

    def __post_init__(self):
        if self.paths_per_epsilon < 1:
            raise ConfigError("paths_per_epsilon must be positive",
                              field="paths_per_epsilon")
        if not self.event_threshold > 0:
            raise ConfigError("event_threshold must be positive",
                              field="event_threshold")
        eps = sorted(self.epsilon_ladder, reverse=True)
        if not eps or tuple(eps) != tuple(self.epsilon_ladder):
            raise ConfigError("epsilon_ladder must be decreasing and non-empty",
                              field="epsilon_ladder")
        lam = self.deviation_scale()
        for e in self.epsilon_ladder:
            if not e > 0:
                raise ConfigError("epsilon values must be positive",
                                  field="epsilon_ladder")
            lam_e = float(lam(e))
            if not (lam_e > 1.0 and math.sqrt(e) * lam_e < 1.0):
                raise ConfigError(
                    f"eps={e}: lambda={lam_e} violates the moderate regime "
                    "(need lambda > 1 and sqrt(eps)*lambda < 1)",
                    field="deviation_scale_expr")

    def grid(self):
        return GridSpec(nx=self.nx, nt=self.nt, horizon_T=self.horizon_T)

    def deviation_scale(self):
        expr = compile_expression(self.deviation_scale_expr, ("eps",))
        return lambda e: float(expr(eps=e))

    def coefficients(self):
        if self.preset == "custom":
            return preset("custom", dict(self.custom_coefficients))
        if self.preset == "heat":
            return zero_coefficients()
        return preset(self.preset)

    def initial_condition(self, grid=None):
        grid = grid or self.grid()
        expr = compile_expression(self.ic_expression, ("x",))
        return SpaceField.from_function(lambda x: expr(x=x), grid)

    def params(self, epsilon):
        grid = self.grid()
        return SimParams(
            grid=grid,
            coefficients=self.coefficients(),
            initial_condition=self.initial_condition(grid),
            epsilon=epsilon,
            deviation_scale=_PickleableScale(self.deviation_scale_expr),
            amplitude_cap=self.amplitude_cap)


@dataclass(frozen=True)
class _PickleableScale:
    expr_source: str

    def __post_init__(self):
        object.__setattr__(
            self, "_expr", compile_expression(self.expr_source, ("eps",)))

    def __call__(self, eps):
        return float(self._expr(eps=eps))


@dataclass(frozen=True)
class StudyResult:
    study: str
    rows: tuple            # one dict per (epsilon, statistic) row
    slope: float = None
    intercept: float = None
    r2: float = None
    slope_stderr: float = None
    degenerate: bool = False
    notes: tuple = ()

    def estimates(self):
        return [row["estimate"] for row in self.rows]


# --- reduction and CI helpers ---------------------------------------------------

def compensated_mean(values):
    """Order-stable mean via exact summation of the collected array."""
    values = np.asarray(values, dtype=float)
    return math.fsum(values) / values.size


def mean_ci(values, level=0.95):
    """Normal-approximation CI for the mean of independent samples."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = compensated_mean(values)
    if n < 2:
        return mean, 0.0, (mean, mean)
    var = math.fsum((values - mean) ** 2) / (n - 1)
    se = math.sqrt(var / n)
    zcrit = sps.norm.ppf(0.5 + level / 2.0)
    return mean, se, (mean - zcrit * se, mean + zcrit * se)


def binomial_ci(hits, n, level=0.95):
    """Wilson interval; with zero hits this is the one-sided upper bound."""
    if n < 1:
        raise ConfigError("need at least one trial", field="paths_per_epsilon")
    z = sps.norm.ppf(0.5 + level / 2.0)
    phat = hits / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == n else min(1.0, center + half)
    return phat, (lo, hi)


def _loglog_regression(epsilons, estimates):
    xs = np.log(np.asarray(epsilons, dtype=float))
    ys = np.log(np.asarray(estimates, dtype=float))
    res = sps.linregress(xs, ys)
    return (float(res.slope), float(res.intercept), float(res.rvalue ** 2),
            float(res.stderr) if np.isfinite(res.stderr) else 0.0)


# --- parallel path mapping -------------------------------------------------------

def _map_paths(worker, tasks, threads):
    if threads <= 1:
        return [worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


def _path_seed(cfg, eps_index, path_index):
    return SeedSpec(master_seed=cfg.master_seed,
                    path_index=eps_index * cfg.paths_per_epsilon + path_index)


# worker functions must be module-level for pickling ------------------------------

def _contraction_worker(task):
    cfg, eps_index, path_index, epsilon, base_frames = task
    p = cfg.params(epsilon)
    base = PathField(base_frames)
    noise = sample_sheet(_path_seed(cfg, eps_index, path_index), p.grid)
    out = solve_spde(p, noise)
    gap = sup_l2_norm(PathField(out.path.frames - base.frames), p.grid)
    return gap * gap, out.exceeded()


def _clt_worker(task):
    cfg, eps_index, path_index, epsilon, base_frames, coupled = task
    p = cfg.params(epsilon)
    base = PathField(base_frames)
    seed = _path_seed(cfg, eps_index, path_index)
    noise = sample_sheet(seed, p.grid)
    out = solve_spde(p, noise)
    if coupled:
        noise_v = noise
    else:
        noise_v = sample_sheet(
            SeedSpec(cfg.master_seed, seed.path_index + _UNCOUPLED_OFFSET),
            p.grid)
    v_out = solve_linearized(p, base, noise_v)
    v_eps = (out.path.frames - base.frames) / math.sqrt(epsilon)
    gap = sup_l2_norm(PathField(v_eps - v_out.path.frames), p.grid)
    return gap, out.exceeded()


def _mdp_naive_worker(task):
    cfg, eps_index, path_index, epsilon, base_frames = task
    p = cfg.params(epsilon)
    base = PathField(base_frames)
    noise = sample_sheet(_path_seed(cfg, eps_index, path_index), p.grid)
    out = solve_spde(p, noise)
    lam = p.lam()
    x_eps = (out.path.frames - base.frames) / (math.sqrt(epsilon) * lam)
    hit = sup_l2_norm(PathField(x_eps), p.grid) >= cfg.event_threshold
    return 1.0 if hit else 0.0, 1.0


def _mdp_is_worker(task):
    cfg, eps_index, path_index, epsilon, base_frames, vdot = task
    p = cfg.params(epsilon)
    base = PathField(base_frames)
    grid = p.grid
    noise = sample_sheet(_path_seed(cfg, eps_index, path_index), grid)
    lam = p.lam()
    out = solve_controlled(p, noise, v=vdot, base=base)
    hit = sup_l2_norm(out.path, grid) >= cfg.event_threshold
    # Girsanov weight: exp(-lam * sum(vdot dW) - lam^2 * ||v||_H^2 / 2)
    stoch = float(np.sum(vdot * noise.increments()))
    log_w = -lam * stoch - 0.5 * lam * lam * h_norm_sq(vdot, grid)
    weight = math.exp(log_w)
    return (weight if hit else 0.0), weight


# --- the studies -----------------------------------------------------------------

def contraction_study(cfg):
    """E[sup_t ||U_eps - U0||^2] along the ladder; the bound predicts slope 1.

    Paths that exceed the amplitude cap are excluded, mirroring the
    stopping-time localization; the exceedance fraction is reported.
    """
    grid = cfg.grid()
    base = solve_deterministic(cfg.params(cfg.epsilon_ladder[0])).path
    rows = []
    for k, eps in enumerate(cfg.epsilon_ladder):
        tasks = [(cfg, k, j, eps, base.frames)
                 for j in range(cfg.paths_per_epsilon)]
        results = _map_paths(_contraction_worker, tasks, cfg.threads)
        stats = np.array([r[0] for r in results])
        exceeded = np.array([r[1] for r in results])
        kept = stats[~exceeded]
        if kept.size == 0:
            raise DegenerateStudyError(
                f"all {stats.size} paths exceeded the cap at eps={eps}; "
                "raise amplitude_cap or lower epsilon")
        mean, se, ci = mean_ci(kept)
        rows.append({
            "epsilon": eps, "estimate": mean, "stderr": se,
            "ci_low": ci[0], "ci_high": ci[1],
            "n_paths": int(kept.size),
            "exceedance_fraction": float(exceeded.mean()),
        })
    estimates = [row["estimate"] for row in rows]
    if any(e <= 0.0 for e in estimates):
        return StudyResult("contraction", tuple(rows), degenerate=True,
                           notes=("zero estimate: no noise channel",))
    slope, intercept, r2, stderr = _loglog_regression(
        cfg.epsilon_ladder, estimates)
    return StudyResult("contraction", tuple(rows), slope=slope,
                       intercept=intercept, r2=r2, slope_stderr=stderr)


def clt_study(cfg, coupled=True):
    """E[sup_t ||V_eps - V||] with common noise; the proof's bound predicts
    slope 1/2.  With coupled=False the two fields get independent noises and
    the gap must NOT vanish (control experiment)."""
    base = solve_deterministic(cfg.params(cfg.epsilon_ladder[0])).path
    rows = []
    for k, eps in enumerate(cfg.epsilon_ladder):
        tasks = [(cfg, k, j, eps, base.frames, coupled)
                 for j in range(cfg.paths_per_epsilon)]
        results = _map_paths(_clt_worker, tasks, cfg.threads)
        stats = np.array([r[0] for r in results])
        exceeded = np.array([r[1] for r in results])
        kept = stats[~exceeded]
        if kept.size == 0:
            raise DegenerateStudyError(f"all paths exceeded the cap at eps={eps}")
        mean, se, ci = mean_ci(kept)
        rows.append({
            "epsilon": eps, "estimate": mean, "stderr": se,
            "ci_low": ci[0], "ci_high": ci[1],
            "n_paths": int(kept.size),
            "exceedance_fraction": float(exceeded.mean()),
        })
    estimates = [row["estimate"] for row in rows]
    if any(e <= 0.0 for e in estimates):
        return StudyResult("clt", tuple(rows), degenerate=True,
                           notes=("zero estimate: no noise channel",))
    slope, intercept, r2, stderr = _loglog_regression(
        cfg.epsilon_ladder, estimates)
    return StudyResult("clt" if coupled else "clt-uncoupled", tuple(rows),
                       slope=slope, intercept=intercept, r2=r2,
                       slope_stderr=stderr)


def make_scaled_event_control(cfg, shape_hdot=None):
    """Scale a candidate control so its skeleton response just reaches the
    event threshold; gives a feasible point, hence a rate upper bound."""
    grid = cfg.grid()
    p = cfg.params(cfg.epsilon_ladder[0])
    base = solve_deterministic(p).path
    if shape_hdot is None:
        shape_hdot = np.ones((grid.nt, grid.nx))
    from .solvers import solve_skeleton
    response = solve_skeleton(p, base, shape_hdot).path
    amp = sup_l2_norm(response, grid)
    if amp <= 0:
        raise DegenerateStudyError("candidate control produces zero response")
    scale = cfg.event_threshold / amp
    return Control(scale * np.asarray(shape_hdot, dtype=float), grid), base, p


def mdp_tail_study(cfg, is_control=None, sn_radius=None, rate_reference=True):
    """Tail probabilities of the rescaled difference field along the ladder.

    Naive mode when is_control is None (indicator average with Wilson CI);
    otherwise Girsanov importance sampling under the shifted dynamics with
    per-path weights.  Reports -log(estimate)/lambda^2 per epsilon next to a
    rate-certificate upper bound; desk-scale epsilon cannot reach the
    asymptotic limit, so no equality is asserted.
    """
    grid = cfg.grid()
    base = solve_deterministic(cfg.params(cfg.epsilon_ladder[0])).path
    if is_control is not None:
        vdot = np.asarray(getattr(is_control, "hdot", is_control), dtype=float)
        if sn_radius is not None:
            if h_norm_sq(vdot, grid) > sn_radius ** 2:
                raise ConfigError(
                    "importance-sampling control lies outside the declared "
                    "Cameron-Martin ball", field="is_control")
    rows = []
    notes = []
    scale = cfg.deviation_scale()
    for k, eps in enumerate(cfg.epsilon_ladder):
        lam = scale(eps)
        if is_control is None:
            tasks = [(cfg, k, j, eps, base.frames)
                     for j in range(cfg.paths_per_epsilon)]
            results = _map_paths(_mdp_naive_worker, tasks, cfg.threads)
        else:
            tasks = [(cfg, k, j, eps, base.frames, vdot)
                     for j in range(cfg.paths_per_epsilon)]
            results = _map_paths(_mdp_is_worker, tasks, cfg.threads)
        contrib = np.array([r[0] for r in results])
        weights = np.array([r[1] for r in results])
        n = contrib.size
        estimate = compensated_mean(contrib)
        if is_control is None:
            hits = int(round(estimate * n))
            phat, (lo, hi) = binomial_ci(hits, n)
            se = math.sqrt(max(phat * (1 - phat), 0.0) / n)
            ess = float(n)
            if hits == 0:
                notes.append(f"eps={eps}: zero hits; one-sided CI upper {hi:.3e}")
        else:
            _, se, (lo, hi) = mean_ci(contrib)
            sw = float(np.sum(weights))
            sw2 = float(np.sum(weights * weights))
            ess = sw * sw / sw2 if sw2 > 0 else 0.0
            if ess < 10:
                notes.append(f"eps={eps}: IS effective sample size {ess:.1f} < 10")
        neg_log_rate = (-math.log(estimate) / (lam * lam)
                        if estimate > 0 else math.inf)
        rows.append({
            "epsilon": eps, "estimate": estimate, "stderr": se,
            "ci_low": lo, "ci_high": hi, "n_paths": n,
            "lambda": lam, "neg_log_over_lambda2": neg_log_rate,
            "effective_sample_size": ess,
        })
    rate_upper = None
    if rate_reference:
        control, base_p, p = make_scaled_event_control(
            cfg, None if is_control is None else vdot)
        from .solvers import solve_skeleton
        target = solve_skeleton(p, base_p, control).path
        cert = evaluate_rate(target, base_p, p, reg=1e-6, tol=1e-8)
        rate_upper = min(0.5 * control.norm_sq(), cert.value)
        notes.append(
            "rate reference is an upper bound from a feasible control; the "
            "asymptotic LDP limit is not desk-reproducible")
        for row in rows:
            row["rate_upper_bound"] = rate_upper
    return StudyResult("mdp-is" if is_control is not None else "mdp-naive",
                       tuple(rows), notes=tuple(notes))


def grid_refinement_study(cfg, factors=(2, 4), n_stochastic_paths=4):
    """Coarse-vs-fine gaps under bridge-consistent noise refinement, plus
    deterministic order checks on the pure-heat configuration."""
    rows = []
    grid = cfg.grid()
    # deterministic orders on pure heat: exact solution exp(-pi^2 t) sin(pi x)
    heat_cfg = replace(cfg, preset="heat", ic_expression="sin(pi*x)")
    errs = []
    for f in (1,) + tuple(factors):
        g = GridSpec(nx=f * (grid.nx + 1) - 1, nt=f * grid.nt,
                     horizon_T=grid.horizon_T)
        p = SimParams(grid=g, coefficients=zero_coefficients(),
                      initial_condition=heat_cfg.initial_condition(g),
                      epsilon=0.0)
        out = solve_deterministic(p)
        x = g.space_nodes()
        t = g.time_nodes()
        exact = np.exp(-np.pi ** 2 * t)[:, None] * np.sin(np.pi * x)[None, :]
        diff = out.path.frames - exact
        diff[:, 0] = 0.0  # sin(pi * 1.0) is only zero to rounding
        diff[:, -1] = 0.0
        err = sup_l2_norm(PathField(diff), g)
        errs.append(err)
        rows.append({"kind": "heat_error", "factor": f, "value": err})
    orders = [math.log2(errs[i - 1] / errs[i]) for i in range(1, len(errs))]
    for f, order in zip(factors, orders):
        rows.append({"kind": "heat_observed_order", "factor": f, "value": order})
    # stochastic coarse-fine gaps under coupled (refined) noise
    eps = cfg.epsilon_ladder[0]
    for j in range(n_stochastic_paths):
        seed = SeedSpec(cfg.master_seed, j)
        coarse_noise = sample_sheet(seed, grid)
        p_c = cfg.params(eps)
        out_c = solve_spde(p_c, coarse_noise)
        for f in factors:
            fine_noise = refine(coarse_noise, f)
            g = fine_noise.grid
            p_f = SimParams(grid=g, coefficients=cfg.coefficients(),
                            initial_condition=cfg.initial_condition(g),
                            epsilon=eps, amplitude_cap=cfg.amplitude_cap)
            out_f = solve_spde(p_f, fine_noise)
            # compare on shared coarse nodes and times
            fine_sub = out_f.path.frames[::f, ::f]
            gap = sup_l2_norm(PathField(fine_sub - out_c.path.frames), grid)
            rows.append({"kind": "stochastic_gap", "factor": f, "value": gap,
                         "path": j})
    return StudyResult("refine", tuple(rows))
