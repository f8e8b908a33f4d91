"""Command-line entry point: configuration, orchestration, bit-exact reports.

Subcommands and their CSV schemas (column order is fixed and part of the
output contract):

  simulate            path.csv: step,time,l2_norm,max_abs
  contraction-study   rows.csv: epsilon,estimate,stderr,ci_low,ci_high,
                      n_paths,exceedance_fraction
                      summary.csv: study,slope,intercept,r2,slope_stderr,degenerate
  clt-study           same schema as contraction-study
  mdp-study           rows.csv: epsilon,estimate,stderr,ci_low,ci_high,n_paths,
                      lambda,neg_log_over_lambda2,effective_sample_size,
                      rate_upper_bound
  refine-study        rows.csv: kind,factor,path,value
  kernel-audit        audit.csv: estimate_id,sample_count,fitted_constant,
                      worst_point,passed
  rate                rate.json (regularization ladder of certificates)

A config file (TOML, see --config) supplies defaults; command-line flags
override file values.  Custom coefficient expressions use a small grammar:
arithmetic (+ - * / ** and parentheses), exp, sin, cos, tanh, min, max,
numeric literals and the constants pi, e, over the variables t, x, r (u for
the sigma bound is r as well); controls and initial conditions use t, x.

Exit codes: 0 success, 2 configuration error (the offending field is named),
3 numerical blow-up, 4 degenerate study.
"""

import argparse
import os
import sys
import time
try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from . import __version__
from .errors import BlowUpError, ConfigError, DegenerateStudyError
from .expr import compile_expression
from .grids import l2_norm
from .kernel import audit_bounds
from .noise import SeedSpec, sample_sheet
from .rate import rate_ladder
from .reporting import canonical_json, write_csv, write_manifest
from .solvers import solve_deterministic, solve_skeleton, solve_spde
from .studies import (StudyConfig, clt_study, contraction_study,
                      grid_refinement_study, make_scaled_event_control,
                      mdp_tail_study)

STUDY_ROW_COLUMNS = ("epsilon", "estimate", "stderr", "ci_low", "ci_high",
                     "n_paths", "exceedance_fraction")
MDP_ROW_COLUMNS = ("epsilon", "estimate", "stderr", "ci_low", "ci_high",
                   "n_paths", "lambda", "neg_log_over_lambda2",
                   "effective_sample_size", "rate_upper_bound")
SUMMARY_COLUMNS = ("study", "slope", "intercept", "r2", "slope_stderr",
                   "degenerate")
REFINE_COLUMNS = ("kind", "factor", "path", "value")
AUDIT_COLUMNS = ("estimate_id", "sample_count", "fitted_constant",
                 "worst_point", "passed")
SIMULATE_COLUMNS = ("step", "time", "l2_norm", "max_abs")

_CONFIG_KEYS = {
    "nx": int, "nt": int, "horizon": float, "preset": str,
    "epsilon_ladder": None, "paths_per_epsilon": int,
    "deviation_scale": str, "event_threshold": float, "seed": int,
    "amplitude_cap": float, "initial_condition": str, "threads": int,
    "epsilon": float, "uncoupled": bool, "mode": str, "is_shape": str,
    "control": str, "reg_ladder": None, "factors": None,
    "coefficients": None,
}


def _load_config_file(path):
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}", field="config")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file is not valid TOML: {exc}",
                          field="config")
    for key in data:
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}", field=key)
    return data


def _parse_float_list(text):
    try:
        values = tuple(float(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"not a comma-separated float list: {text!r}",
                          field="epsilon_ladder")
    if not values:
        raise ConfigError("empty list", field="epsilon_ladder")
    return values


def _merged(args, file_cfg, key, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def _study_config(args, file_cfg):
    ladder = _merged(args, file_cfg, "epsilon_ladder", (1e-2, 1e-3, 1e-4))
    if isinstance(ladder, str):
        ladder = _parse_float_list(ladder)
    else:
        ladder = tuple(float(e) for e in ladder)
    custom = file_cfg.get("coefficients", {})
    if custom and not isinstance(custom, dict):
        raise ConfigError("coefficients must be a table of expressions",
                          field="coefficients")
    return StudyConfig(
        nx=int(_merged(args, file_cfg, "nx", 64)),
        nt=int(_merged(args, file_cfg, "nt", 4096)),
        horizon_T=float(_merged(args, file_cfg, "horizon", 0.25)),
        preset=str(_merged(args, file_cfg, "preset", "burgers")),
        custom_coefficients=tuple(sorted(custom.items())),
        epsilon_ladder=ladder,
        paths_per_epsilon=int(_merged(args, file_cfg, "paths_per_epsilon", 64)),
        deviation_scale_expr=str(
            _merged(args, file_cfg, "deviation_scale", "eps**(-0.25)")),
        event_threshold=float(_merged(args, file_cfg, "event_threshold", 0.5)),
        master_seed=int(_merged(args, file_cfg, "seed", 20260823)),
        amplitude_cap=float(_merged(args, file_cfg, "amplitude_cap", 10.0)),
        ic_expression=str(
            _merged(args, file_cfg, "initial_condition", "sin(pi*x)")),
        threads=int(_merged(args, file_cfg, "threads", 1)),
    )


def _config_dict(cfg, extra=None):
    out = {
        "nx": cfg.nx, "nt": cfg.nt, "horizon": cfg.horizon_T,
        "preset": cfg.preset,
        "coefficients": dict(cfg.custom_coefficients),
        "epsilon_ladder": list(cfg.epsilon_ladder),
        "paths_per_epsilon": cfg.paths_per_epsilon,
        "deviation_scale": cfg.deviation_scale_expr,
        "event_threshold": cfg.event_threshold,
        "seed": cfg.master_seed,
        "amplitude_cap": cfg.amplitude_cap,
        "initial_condition": cfg.ic_expression,
        "threads": cfg.threads,
    }
    if extra:
        out.update(extra)
    return out


def _emit_study(result, out_dir, cfg, extra_config, started, columns):
    rows_path = os.path.join(out_dir, "rows.csv")
    summary_path = os.path.join(out_dir, "summary.csv")
    rows = [{k: row.get(k, "") for k in columns} for row in result.rows]
    write_csv(rows_path, columns, rows)
    write_csv(summary_path, SUMMARY_COLUMNS, [{
        "study": result.study,
        "slope": result.slope if result.slope is not None else "",
        "intercept": result.intercept if result.intercept is not None else "",
        "r2": result.r2 if result.r2 is not None else "",
        "slope_stderr": (result.slope_stderr
                         if result.slope_stderr is not None else ""),
        "degenerate": result.degenerate,
    }])
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   _config_dict(cfg, extra_config), cfg.master_seed,
                   started, time.time(), [rows_path, summary_path])
    for note in result.notes:
        print(f"note: {note}")
    print(f"wrote {rows_path}")


def _cmd_simulate(args, file_cfg, out_dir, started):
    cfg = _study_config(args, file_cfg)
    epsilon = float(_merged(args, file_cfg, "epsilon", cfg.epsilon_ladder[0]))
    grid = cfg.grid()
    p = cfg.params(epsilon)
    if epsilon == 0.0:
        out = solve_deterministic(p)
    else:
        out = solve_spde(p, sample_sheet(SeedSpec(cfg.master_seed, 0), grid))
    rows = []
    for n in range(grid.nt + 1):
        frame = out.path.frames[n]
        rows.append({
            "step": n,
            "time": n * grid.dt,
            "l2_norm": l2_norm(frame, grid),
            "max_abs": float(np.max(np.abs(frame))),
        })
    path = os.path.join(out_dir, "path.csv")
    write_csv(path, SIMULATE_COLUMNS, rows)
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   _config_dict(cfg, {"subcommand": "simulate",
                                      "epsilon": epsilon}),
                   cfg.master_seed, started, time.time(), [path])
    print(f"wrote {path}")
    return 0


def _cmd_contraction(args, file_cfg, out_dir, started):
    cfg = _study_config(args, file_cfg)
    result = contraction_study(cfg)
    _emit_study(result, out_dir, cfg, {"subcommand": "contraction-study"},
                started, STUDY_ROW_COLUMNS)
    return 0


def _cmd_clt(args, file_cfg, out_dir, started):
    cfg = _study_config(args, file_cfg)
    coupled = not bool(_merged(args, file_cfg, "uncoupled", False))
    result = clt_study(cfg, coupled=coupled)
    _emit_study(result, out_dir, cfg,
                {"subcommand": "clt-study", "uncoupled": not coupled},
                started, STUDY_ROW_COLUMNS)
    return 0


def _cmd_mdp(args, file_cfg, out_dir, started):
    cfg = _study_config(args, file_cfg)
    mode = str(_merged(args, file_cfg, "mode", "naive"))
    if mode not in ("naive", "is"):
        raise ConfigError(f"mode must be 'naive' or 'is', got {mode!r}",
                          field="mode")
    is_control = None
    if mode == "is":
        shape_expr = str(_merged(args, file_cfg, "is_shape", "1"))
        is_control = _control_from_expression(cfg, shape_expr, scaled=True)
    result = mdp_tail_study(cfg, is_control=is_control)
    rows = [{k: row.get(k, "") for k in MDP_ROW_COLUMNS} for row in result.rows]
    rows_path = os.path.join(out_dir, "rows.csv")
    write_csv(rows_path, MDP_ROW_COLUMNS, rows)
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   _config_dict(cfg, {"subcommand": "mdp-study", "mode": mode}),
                   cfg.master_seed, started, time.time(), [rows_path])
    for note in result.notes:
        print(f"note: {note}")
    print(f"wrote {rows_path}")
    return 0


def _control_from_expression(cfg, text, scaled=False):
    grid = cfg.grid()
    expr = compile_expression(text, ("t", "x"))
    tt = grid.dt * np.arange(grid.nt)[:, None]
    xx = grid.interior_nodes()[None, :]
    hdot = np.broadcast_to(np.asarray(expr(t=tt, x=xx), dtype=float),
                           (grid.nt, grid.nx)).copy()
    if scaled:
        control, _, _ = make_scaled_event_control(cfg, hdot)
        return control
    from .rate import Control
    return Control(hdot, grid)


def _cmd_rate(args, file_cfg, out_dir, started):
    cfg = _study_config(args, file_cfg)
    control_expr = str(_merged(args, file_cfg, "control", "sin(pi*x)"))
    regs = _merged(args, file_cfg, "reg_ladder", (1e-2, 1e-4, 1e-6))
    if isinstance(regs, str):
        regs = _parse_float_list(regs)
    control = _control_from_expression(cfg, control_expr)
    p = cfg.params(cfg.epsilon_ladder[0])
    base = solve_deterministic(p).path
    target = solve_skeleton(p, base, control).path
    certificates = rate_ladder(target, base, p, regs=tuple(regs))
    payload = {
        "control_expression": control_expr,
        "control_half_norm_sq": 0.5 * control.norm_sq(),
        "ladder": [
            {
                "regularization": cert.regularization,
                "value": cert.value,
                "residual": cert.residual,
                "cg_iterations": cert.cg_iterations,
            }
            for cert in certificates
        ],
    }
    path = os.path.join(out_dir, "rate.json")
    from .reporting import _atomic_write_text
    _atomic_write_text(path, canonical_json(payload) + "\n")
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   _config_dict(cfg, {"subcommand": "rate",
                                      "control": control_expr,
                                      "reg_ladder": list(regs)}),
                   cfg.master_seed, started, time.time(), [path])
    print(f"wrote {path}")
    return 0


def _cmd_kernel_audit(args, file_cfg, out_dir, started):
    report = audit_bounds()
    rows = []
    for raw in report.to_rows():
        row = dict(raw)
        row["worst_point"] = str(row["worst_point"]).replace(",", ";")
        rows.append(row)
    path = os.path.join(out_dir, "audit.csv")
    write_csv(path, AUDIT_COLUMNS, rows)
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   {"subcommand": "kernel-audit"}, 0, started, time.time(),
                   [path])
    status = "all passed" if report.all_passed else "FAILURES"
    print(f"kernel audit: {len(rows)} estimates, {status}; wrote {path}")
    return 0


def _cmd_refine(args, file_cfg, out_dir, started):
    cfg = _study_config(args, file_cfg)
    factors = _merged(args, file_cfg, "factors", (2, 4))
    if isinstance(factors, str):
        factors = tuple(int(float(tok)) for tok in factors.split(",") if tok)
    result = grid_refinement_study(cfg, factors=tuple(int(f) for f in factors))
    rows = [{k: row.get(k, "") for k in REFINE_COLUMNS} for row in result.rows]
    rows_path = os.path.join(out_dir, "rows.csv")
    write_csv(rows_path, REFINE_COLUMNS, rows)
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   _config_dict(cfg, {"subcommand": "refine-study",
                                      "factors": list(factors)}),
                   cfg.master_seed, started, time.time(), [rows_path])
    print(f"wrote {rows_path}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "contraction-study": _cmd_contraction,
    "clt-study": _cmd_clt,
    "mdp-study": _cmd_mdp,
    "rate": _cmd_rate,
    "kernel-audit": _cmd_kernel_audit,
    "refine-study": _cmd_refine,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spdelab",
        description="Stochastic PDE laboratory: simulation, fluctuation "
                    "studies, tail studies and rate-function evaluation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", default=None, help="TOML config file")
        s.add_argument("--seed", type=int, default=None, dest="seed")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--threads", type=int, default=None)
        s.add_argument("--epsilon-ladder", default=None, dest="epsilon_ladder",
                       help="comma-separated decreasing epsilons")
        s.add_argument("--preset", default=None,
                       help="burgers, reaction_diffusion, heat or custom")
        s.add_argument("--nx", type=int, default=None)
        s.add_argument("--nt", type=int, default=None)
        s.add_argument("--horizon", type=float, default=None)
        s.add_argument("--paths-per-epsilon", type=int, default=None,
                       dest="paths_per_epsilon")
        s.add_argument("--deviation-scale", default=None, dest="deviation_scale")
        s.add_argument("--event-threshold", type=float, default=None,
                       dest="event_threshold")
        s.add_argument("--amplitude-cap", type=float, default=None,
                       dest="amplitude_cap")
        s.add_argument("--initial-condition", default=None,
                       dest="initial_condition")
        if name == "simulate":
            s.add_argument("--epsilon", type=float, default=None)
        if name == "clt-study":
            s.add_argument("--uncoupled", action="store_const", const=True,
                           default=None)
        if name == "mdp-study":
            s.add_argument("--mode", choices=("naive", "is"), default=None)
            s.add_argument("--is-shape", default=None, dest="is_shape",
                           help="expression in t, x for the sampling shift shape")
        if name == "rate":
            s.add_argument("--control", default=None,
                           help="expression in t, x defining hdot")
            s.add_argument("--reg-ladder", default=None, dest="reg_ladder")
        if name == "refine-study":
            s.add_argument("--factors", default=None,
                           help="comma-separated powers of two")
    return parser


def run(argv):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = _load_config_file(args.config) if args.config else {}
        out_dir = args.out
        os.makedirs(out_dir, exist_ok=True)
        started = time.time()
        return _COMMANDS[args.subcommand](args, file_cfg, out_dir, started)
    except ConfigError as exc:
        field = f" (field: {exc.field})" if getattr(exc, "field", None) else ""
        print(f"error: config: {exc}{field}", file=sys.stderr)
        return 2
    except BlowUpError as exc:
        print(f"error: blow-up: {exc}", file=sys.stderr)
        return 3
    except DegenerateStudyError as exc:
        print(f"error: degenerate study: {exc}", file=sys.stderr)
        return 4


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
