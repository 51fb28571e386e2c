"""Command-line front end.

Subcommands ``solve``, ``verify``, ``simulate``, ``sweep`` and ``gamma-bar``.
Settings come from an optional flat ``key = value`` file (``--config``) and
are overridden by flags of the same name. Exit codes: 0 success, 1 config
error, 2 solver failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .barrier import DEFAULT_N_SCAN, DEFAULT_TOL, BarrierError
from .model import ModelParams, ParameterError, RegimeMismatch
from .simulate import (
    SimConfig,
    SimulationError,
    estimate_moments,
    estimate_mv_frontier,
    set_threads,
)
from .sweep import (
    OUTPUTS,
    VARIABLES,
    NotFound,
    SweepSpec,
    default_grid,
    f_curve,
    gamma_bar,
    sweep_barrier,
    value_curve,
)
from .tables import Table
from .value import (
    DEFAULT_CONCAVITY_GRID,
    DEFAULT_TOL_INEQ,
    DEFAULT_TOL_RES,
    DEFAULT_VERIFY_GRID,
    INDETERMINATE_NOTE,
    Status,
    build_solution,
    solve_equilibrium,
    verify_hjb,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _words(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


# key -> (parser, default, help)
MODEL_KEYS = {
    "a": (float, 1.0, "drift"),
    "b": (float, 0.25, "volatility"),
    "rho": (float, 0.2, "discount rate"),
    "gamma": (float, 0.13, "risk aversion"),
}
SOLVER_KEYS = {
    "tol": (float, DEFAULT_TOL, "root tolerance"),
    "n_scan": (int, DEFAULT_N_SCAN, "sign-change scan nodes"),
    "x_max": (_optional_float, None, "right end of the root scan"),
    "concavity_grid": (int, DEFAULT_CONCAVITY_GRID, "nodes of the concavity grid"),
}
COMMAND_KEYS = {
    "solve": {},
    "verify": {
        "verify_grid": (int, DEFAULT_VERIFY_GRID, "nodes per verification region"),
        "tol_res": (float, DEFAULT_TOL_RES, "tolerance on equation residuals"),
        "tol_ineq": (float, DEFAULT_TOL_INEQ, "slack on inequalities"),
    },
    "simulate": {
        "dt": (float, 1e-3, "time step"),
        "n_paths": (int, 10_000, "number of paths"),
        "t_max": (_optional_float, None, "horizon (default 60/rho)"),
        "seed": (int, 0, "random seed"),
        "x0": (float, None, "initial surplus (default: half the barrier)"),
        "tail": (str, "truncate", "truncate | randomized"),
        "barrier": (_optional_float, None, "simulate this barrier instead of the solved one"),
        "barriers": (_floats, None, "comma-separated barriers: emit a mean-variance frontier"),
        "threads": (int, None, "cap on worker threads"),
    },
    "sweep": {
        "vary": (str, "gamma", "|".join(VARIABLES)),
        "grid": (_floats, None, "comma-separated grid (default: built-in range)"),
        "outputs": (_words, ["x_tilde", "concave", "c1", "c3"], ",".join(OUTPUTS)),
        "curve": (str, "barrier", "barrier | value | f"),
        "x_grid_max": (_optional_float, None, "right end of the x grid for value/f curves"),
        "x_grid_n": (int, 201, "nodes of the x grid for value/f curves"),
        "gamma_bar_tol": (float, 1e-4, "bisection width for gamma-bar outputs"),
    },
    "gamma-bar": {
        "gamma_bar_tol": (float, 1e-4, "bisection width"),
    },
}
IO_KEYS = {
    "format": (str, "csv", "csv | json"),
    "output": (str, None, "output file (default stdout)"),
}
ALL_KEYS = {**MODEL_KEYS, **SOLVER_KEYS, **IO_KEYS}
for _keys in COMMAND_KEYS.values():
    ALL_KEYS.update(_keys)


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = value
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit with 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_keys(p: argparse.ArgumentParser, keys: dict) -> None:
    for key, (_, default, help_) in keys.items():
        if isinstance(default, list):
            default = ",".join(default)
        shown = "" if default is None else f" [{default}]"
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, type=str,
                       metavar="V", help=help_ + shown)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvdividend", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp line in CSV")
    _add_keys(common, {**MODEL_KEYS, **SOLVER_KEYS, **IO_KEYS})
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "solve": "classify the regime and solve for the barrier",
        "verify": "check the extended HJB system on grids",
        "simulate": "Monte Carlo moments of discounted dividends",
        "sweep": "barrier and curve tables over a parameter grid",
        "gamma-bar": "largest risk aversion with a concave barrier solution",
    }
    for name, keys in COMMAND_KEYS.items():
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        _add_keys(sp, keys)
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (in increasing precedence) and parse values."""
    keys = {**MODEL_KEYS, **SOLVER_KEYS, **IO_KEYS, **COMMAND_KEYS[args.command]}
    raw: dict[str, str] = {}
    if args.config:
        try:
            raw.update(read_config(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    out = {}
    for key, (parse, default, _) in keys.items():
        if key in raw:
            try:
                out[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw[key]!r} ({exc})") from exc
        else:
            out[key] = default
    if out["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {out['format']!r}")
    return out


def _params(s: dict) -> ModelParams:
    return ModelParams(a=s["a"], b=s["b"], rho=s["rho"], gamma=s["gamma"])


def _meta(s: dict, command: str) -> dict:
    return {"tool": f"mvdividend {__version__}", "command": command,
            "config": {k: (",".join(map(str, v)) if isinstance(v, list) else v)
                       for k, v in s.items() if k not in ("output", "format")}}


def _solve(s: dict):
    return solve_equilibrium(_params(s), tol=s["tol"], x_max=s["x_max"], n_scan=s["n_scan"],
                             n_grid=s["concavity_grid"])


def cmd_solve(s: dict) -> tuple[Table, int]:
    eq = _solve(s)
    sol = eq.solution
    cols = ["regime", "status", "x_tilde", "c1", "c3", "concave", "first_violation",
            "residual", "bracket_lo", "bracket_hi", "note"]
    t = Table(cols, meta=_meta(s, "solve"))
    if eq.status is Status.PAY_ALL:
        t.append({"regime": "PayAll", "status": eq.status.value, "x_tilde": 0.0,
                  "note": "V(x) = G(x) = x; pay out all surplus"})
    else:
        t.append({
            "regime": "BarrierCandidate", "status": eq.status.value, "x_tilde": sol.x_tilde,
            "c1": sol.c1, "c3": sol.c3, "concave": eq.concavity.concave,
            "first_violation": eq.concavity.first_violation, "residual": eq.barrier.residual,
            "bracket_lo": eq.barrier.bracket[0], "bracket_hi": eq.barrier.bracket[1],
            "note": INDETERMINATE_NOTE if eq.status is Status.INDETERMINATE else "",
        })
    return t, EXIT_OK


def cmd_verify(s: dict) -> tuple[Table, int]:
    eq = _solve(s)
    report = verify_hjb(eq.solution, n_grid=s["verify_grid"], tol_res=s["tol_res"],
                        tol_ineq=s["tol_ineq"])
    t = Table(["name", "region", "worst_residual", "worst_location", "tolerance", "passed"],
              meta={**_meta(s, "verify"), "status": eq.status.value, "barrier": eq.solution.barrier,
                    "all_passed": report.passed})
    for r in report.records:
        t.append([r.name, r.region, r.worst_residual, r.worst_location, r.tolerance, r.passed])
    return t, EXIT_OK if report.passed else EXIT_VERIFY


def cmd_simulate(s: dict) -> tuple[Table, int]:
    set_threads(s["threads"])
    params = _params(s)
    meta = _meta(s, "simulate")
    if s["barriers"]:
        x0 = s["x0"] if s["x0"] is not None else 0.5 * min(s["barriers"])
        cfg = SimConfig(dt=s["dt"], n_paths=s["n_paths"], t_max=s["t_max"], seed=s["seed"],
                        x0=x0, tail=s["tail"])
        fr = estimate_mv_frontier(params, s["barriers"], cfg)
        t = Table(["barrier", "g_hat", "var_hat", "j_hat", "se_g"], meta=meta)
        for r in fr.rows:
            t.append([r.barrier, r.g_hat, r.var_hat, r.j_hat, r.se_g])
        return t, EXIT_OK
    if s["barrier"] is not None:
        sol = build_solution(params, s["barrier"])
    else:
        sol = _solve(s).solution
    x0 = s["x0"] if s["x0"] is not None else 0.5 * sol.barrier
    cfg = SimConfig(dt=s["dt"], n_paths=s["n_paths"], t_max=s["t_max"], seed=s["seed"], x0=x0,
                    tail=s["tail"])
    est = estimate_moments(sol, cfg)
    g, h = float(sol.G(x0)), float(sol.H(x0))
    cols = ["barrier", "x0", "g_hat", "se_g", "G", "z_g", "h_hat", "se_h", "H", "z_h", "v_hat", "V",
            "truncated_fraction", "ruin_fraction", "truncation_bound"]
    t = Table(cols, meta=meta)

    def z(diff, se):
        return diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))

    t.append([sol.barrier, x0, est.g_hat, est.se_g, g, z(est.g_hat - g, est.se_g), est.h_hat,
              est.se_h, h, z(est.h_hat - h, est.se_h), est.v_hat, float(sol.V(x0)),
              est.truncated_fraction, est.ruin_fraction, est.truncation_bound])
    return t, EXIT_OK


def cmd_sweep(s: dict) -> tuple[Table, int]:
    params = _params(s)
    curve = s["curve"]
    if curve == "barrier":
        varied = s["vary"]
        if varied not in VARIABLES:
            raise ConfigError(f"vary must be one of {VARIABLES}, got {varied!r}")
        grid = s["grid"] or default_grid(varied)
        spec = SweepSpec(varied=varied, grid=tuple(grid), fixed=params, outputs=tuple(s["outputs"]),
                         tol=s["tol"], n_grid=s["concavity_grid"], gamma_bar_tol=s["gamma_bar_tol"])
        t = sweep_barrier(spec)
    elif curve in ("value", "f"):
        if curve == "value":
            sol = _solve(s).solution
            x_hi = s["x_grid_max"] if s["x_grid_max"] is not None else 2.0 * max(sol.barrier, 0.25)
        else:
            x_hi = s["x_grid_max"] if s["x_grid_max"] is not None else 1.0
        xs = np.linspace(0.0, x_hi, s["x_grid_n"])
        t = value_curve(sol, xs) if curve == "value" else f_curve(params, xs)
    else:
        raise ConfigError(f"curve must be barrier, value or f, got {curve!r}")
    t.meta = {**_meta(s, "sweep"), **{k: v for k, v in t.meta.items() if k != "tool"}}
    return t, EXIT_OK


def cmd_gamma_bar(s: dict) -> tuple[Table, int]:
    params = _params(s)
    value = gamma_bar(params, tol=s["gamma_bar_tol"], solver_tol=s["tol"],
                      n_grid=s["concavity_grid"])
    t = Table(["a", "b", "rho", "gamma_bar", "pay_all_threshold"], meta=_meta(s, "gamma-bar"))
    t.append([params.a, params.b, params.rho, value, params.pay_all_threshold])
    return t, EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "gamma-bar": cmd_gamma_bar,
}


def _emit(table: Table, s: dict, timestamp: bool) -> None:
    text = table.dump(s["format"], timestamp=timestamp)
    if s["output"]:
        Path(s["output"]).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    warnings.filterwarnings("ignore", message=".*TBB threading layer.*")
    args = build_parser().parse_args(argv)
    try:
        settings = resolve_settings(args)
        table, code = COMMANDS[args.command](settings)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BarrierError, RegimeMismatch, NotFound) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SimulationError as exc:
        print(f"simulation failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(table, settings, timestamp=not args.no_timestamp)
    return code


if __name__ == "__main__":
    sys.exit(main())
