"""Coefficient triples (f, g, sigma) with derivatives and assumption audits.

A CoefficientSet carries evaluable functions of (t, x, r) -- vectorized over
numpy arrays in x and r -- together with the declared structural constants:
K (growth), L (local Lipschitz with linearly growing constant), K_prime
(Lipschitz constant of the derivatives) and sigma_bound (sup of |sigma|).

The flagship presets:
  * "burgers": f = 0, g = r^2/2, so the divergence term is the Burgers flux.
  * "reaction_diffusion": g = 0, f = bistable cubic r - r^3 smoothly capped
    to linear growth outside |r| = R_CAP so the linear-growth condition
    holds globally.
Both share a bounded, Lipschitz sigma(r) = c0/(1+r^2) + c1.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .expr import compile_expression

R_CAP = 20.0
SIGMA_C0 = 0.5
SIGMA_C1 = 0.5


# --- picklable building-block callables -------------------------------------

@dataclass(frozen=True)
class _Zero3:
    def __call__(self, t, x, r):
        return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class _Zero2:
    def __call__(self, t, r):
        return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class _BurgersFlux:
    """g2(t, r) = r^2 / 2."""

    def __call__(self, t, r):
        r = np.asarray(r, dtype=float)
        return 0.5 * r * r


@dataclass(frozen=True)
class _BurgersFluxPrime:
    def __call__(self, t, x, r):
        return np.asarray(r, dtype=float) + 0.0


@dataclass(frozen=True)
class _BoundedSigma:
    """sigma(r) = c0/(1+r^2) + c1: bounded, Lipschitz, bounded away from 0."""

    c0: float = SIGMA_C0
    c1: float = SIGMA_C1

    def __call__(self, t, x, r):
        r = np.asarray(r, dtype=float)
        return self.c0 / (1.0 + r * r) + self.c1


def _cubic_blend(u):
    """Odd C^2 function: u^3 on [0,1], cubic blend on [1,2], slope 6 beyond."""
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    s = a - 1.0
    mid = 1.0 + 3.0 * s + 3.0 * s * s - s ** 3
    out = np.where(a <= 1.0, a ** 3, np.where(a <= 2.0, mid, 6.0 + 6.0 * (a - 2.0)))
    return np.sign(u) * out


def _cubic_blend_prime(u):
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    s = a - 1.0
    mid = 3.0 + 6.0 * s - 3.0 * s * s
    return np.where(a <= 1.0, 3.0 * a * a, np.where(a <= 2.0, mid, 6.0))


@dataclass(frozen=True)
class _CappedBistable:
    """f(r) = r - R^3 * blend(r/R): equals r - r^3 for |r| <= R, linear beyond 2R."""

    cap: float = R_CAP

    def __call__(self, t, x, r):
        r = np.asarray(r, dtype=float)
        return r - self.cap ** 3 * _cubic_blend(r / self.cap)


@dataclass(frozen=True)
class _CappedBistablePrime:
    cap: float = R_CAP

    def __call__(self, t, x, r):
        r = np.asarray(r, dtype=float)
        return 1.0 - self.cap ** 2 * _cubic_blend_prime(r / self.cap)


@dataclass(frozen=True)
class _ExprFunc3:
    """Wrap a compiled (t, x, r) expression, broadcasting over x and r."""

    expr_source: str

    def __post_init__(self):
        object.__setattr__(
            self, "_expr", compile_expression(self.expr_source, ("t", "x", "r")))

    def __call__(self, t, x, r):
        t_arr, x_arr, r_arr = np.broadcast_arrays(
            np.asarray(t, dtype=float), np.asarray(x, dtype=float),
            np.asarray(r, dtype=float))
        return np.broadcast_to(
            np.asarray(self._expr(t=t_arr, x=x_arr, r=r_arr), dtype=float),
            r_arr.shape).copy()


@dataclass(frozen=True)
class _ExprFunc2:
    """Wrap a compiled (t, r) expression."""

    expr_source: str

    def __post_init__(self):
        object.__setattr__(
            self, "_expr", compile_expression(self.expr_source, ("t", "r")))

    def __call__(self, t, r):
        t_arr, r_arr = np.broadcast_arrays(
            np.asarray(t, dtype=float), np.asarray(r, dtype=float))
        return np.broadcast_to(
            np.asarray(self._expr(t=t_arr, r=r_arr), dtype=float),
            r_arr.shape).copy()


# --- the coefficient set ------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSet:
    """Evaluable coefficients with declared structural constants.

    All callables must be pure: the Monte Carlo harness shares a set across
    parallel workers without synchronization.
    """

    f: Callable
    g1: Callable
    g2: Callable
    sigma: Callable
    f_prime: Callable
    g_prime: Callable
    K: float
    L: float
    K_prime: float
    sigma_bound: float
    name: str = "custom"

    def g(self, t, x, r):
        """Total flux g(t,x,r) = g1(t,x,r) + g2(t,r)."""
        return self.g1(t, x, r) + self.g2(t, r)


def zero_coefficients():
    """Pure heat configuration: f = g = sigma = 0 (validation tool)."""
    zero3 = _Zero3()
    return CoefficientSet(
        f=zero3, g1=zero3, g2=_Zero2(), sigma=zero3,
        f_prime=zero3, g_prime=zero3,
        K=1.0, L=1.0, K_prime=1.0, sigma_bound=1.0, name="heat")


def preset(name, custom_exprs=None):
    """Build one of the named coefficient presets.

    "custom" expects a dict with expression strings for keys
    f, g1, g2, sigma, f_prime, g_prime and floats K, L, K_prime, sigma_bound.
    """
    sigma = _BoundedSigma()
    # max |d sigma/dr| = 2*c0*max|r|/(1+r^2)^2 attained at r = 1/sqrt(3)
    sigma_lip = 2.0 * SIGMA_C0 * (3.0 * np.sqrt(3.0) / 16.0)
    if name == "burgers":
        zero3 = _Zero3()
        return CoefficientSet(
            f=zero3, g1=zero3, g2=_BurgersFlux(), sigma=sigma,
            f_prime=zero3, g_prime=_BurgersFluxPrime(),
            K=0.5,
            L=max(0.5, sigma_lip),
            K_prime=1.0,
            sigma_bound=SIGMA_C0 + SIGMA_C1,
            name="burgers")
    if name == "reaction_diffusion":
        zero3 = _Zero3()
        # |f'| <= 1 + 6*R^2 globally, so L = 1 + 6*R^2 works in the local
        # Lipschitz form; |f|/(1+|r|) is maximized in the linear tail.
        slope_cap = 1.0 + 6.0 * R_CAP ** 2
        return CoefficientSet(
            f=_CappedBistable(), g1=zero3, g2=_Zero2(), sigma=sigma,
            f_prime=_CappedBistablePrime(), g_prime=zero3,
            K=slope_cap,
            L=slope_cap,
            K_prime=6.0 * R_CAP,
            sigma_bound=SIGMA_C0 + SIGMA_C1,
            name="reaction_diffusion")
    if name == "custom":
        if not custom_exprs:
            raise ConfigError("custom preset needs coefficient expressions",
                              field="coefficients")
        try:
            return CoefficientSet(
                f=_ExprFunc3(custom_exprs.get("f", "0")),
                g1=_ExprFunc3(custom_exprs.get("g1", "0")),
                g2=_ExprFunc2(custom_exprs.get("g2", "0")),
                sigma=_ExprFunc3(custom_exprs.get("sigma", "1")),
                f_prime=_ExprFunc3(custom_exprs.get("f_prime", "0")),
                g_prime=_ExprFunc3(custom_exprs.get("g_prime", "0")),
                K=float(custom_exprs.get("K", 1.0)),
                L=float(custom_exprs.get("L", 1.0)),
                K_prime=float(custom_exprs.get("K_prime", 1.0)),
                sigma_bound=float(custom_exprs.get("sigma_bound", 1.0)),
                name="custom")
        except ConfigError:
            raise
        except Exception as exc:  # bad numeric field
            raise ConfigError(f"invalid custom coefficient spec: {exc}",
                              field="coefficients") from exc
    raise ConfigError(f"unknown coefficient preset {name!r}", field="preset")


# --- assumption audit ---------------------------------------------------------

@dataclass(frozen=True)
class SamplePlan:
    """Compact audit window: hypotheses are global, the audit is sampled."""

    r_min: float = -10.0
    r_max: float = 10.0
    n_r: int = 201
    n_t: int = 5
    n_x: int = 9
    horizon_T: float = 1.0


@dataclass(frozen=True)
class AssumptionRecord:
    hypothesis: str
    sampled_max: float
    declared: float
    passed: bool


@dataclass(frozen=True)
class AssumptionReport:
    records: tuple
    plan: SamplePlan

    @property
    def all_passed(self):
        return all(rec.passed for rec in self.records)

    def record(self, hypothesis):
        for rec in self.records:
            if rec.hypothesis == hypothesis:
                return rec
        raise KeyError(hypothesis)


_SLACK = 1e-9


def check_assumptions(coeffs, plan=None):
    """Sample the growth/Lipschitz ratios and compare to declared constants.

    Failures are reported, never raised: user-supplied coefficients are
    opaque and the report is the diagnostic artifact.
    """
    plan = plan or SamplePlan()
    ts = np.linspace(0.0, plan.horizon_T, plan.n_t)
    xs = np.linspace(0.0, 1.0, plan.n_x)
    rs = np.linspace(plan.r_min, plan.r_max, plan.n_r)

    tg, xg, rg = np.meshgrid(ts, xs, rs, indexing="ij")
    denom_lin = 1.0 + np.abs(rg)
    denom_quad = 1.0 + rg * rg

    f_vals = coeffs.f(tg, xg, rg)
    g1_vals = coeffs.g1(tg, xg, rg)
    g2_vals = coeffs.g2(tg[:, 0, :], rg[:, 0, :])
    sig_vals = coeffs.sigma(tg, xg, rg)

    h1 = float(np.max(np.abs(f_vals) / denom_lin))
    h2 = float(max(np.max(np.abs(g1_vals) / denom_lin),
                   np.max(np.abs(g2_vals) / (1.0 + rg[:, 0, :] ** 2))))
    h3_bound = float(np.max(np.abs(sig_vals)))

    # pairwise ratios on a thinner r lattice to keep the audit quick
    rp = np.linspace(plan.r_min, plan.r_max, max(41, plan.n_r // 5))
    p, q = np.meshgrid(rp, rp, indexing="ij")
    mask = np.abs(p - q) > 1e-12
    pm, qm = p[mask], q[mask]
    gap = np.abs(pm - qm)
    lin_pair = 1.0 + np.abs(pm) + np.abs(qm)

    def pair_max(func, with_x=True):
        best = 0.0
        for t in ts:
            for x in (xs if with_x else [None]):
                if with_x:
                    a, b = func(t, x, pm), func(t, x, qm)
                else:
                    a, b = func(t, pm), func(t, qm)
                best = max(best, float(np.max(np.abs(a - b) / gap / lin_pair)))
        return best

    def pair_max_plain(func):
        best = 0.0
        for t in ts:
            for x in xs:
                a, b = func(t, x, pm), func(t, x, qm)
                best = max(best, float(np.max(np.abs(a - b) / gap)))
        return best

    h3_lip = max(
        pair_max_plain(coeffs.sigma) / 1.0,  # sigma is globally Lipschitz
        pair_max(coeffs.f),
        pair_max(coeffs.g1),
        pair_max(coeffs.g2, with_x=False),
    )
    # sigma's Lipschitz bound does not carry the (1+|p|+|q|) factor
    h3_sigma_lip = pair_max_plain(coeffs.sigma)

    h4 = max(pair_max_plain(coeffs.f_prime), pair_max_plain(coeffs.g_prime))

    records = (
        AssumptionRecord("H1", h1, coeffs.K, h1 <= coeffs.K + _SLACK),
        AssumptionRecord("H2", h2, coeffs.K, h2 <= coeffs.K + _SLACK),
        AssumptionRecord("H3-bounded", h3_bound, coeffs.sigma_bound,
                         h3_bound <= coeffs.sigma_bound + _SLACK),
        AssumptionRecord("H3-lipschitz", max(h3_lip, h3_sigma_lip), coeffs.L,
                         max(h3_lip, h3_sigma_lip) <= coeffs.L + _SLACK),
        AssumptionRecord("H4", h4, coeffs.K_prime, h4 <= coeffs.K_prime + _SLACK),
    )
    return AssumptionReport(records=records, plan=plan)
