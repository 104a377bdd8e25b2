"""Command line front end: flat config files, pipelines, CSV emission.

Config files are plain ``key = value`` lines with ``#`` comments.  Every
emitted CSV starts with a comment echoing the fully resolved config, so
a results directory is self-describing and a rerun with the same config
reproduces every file byte for byte.  Exit codes: 0 on success, 2 on a
config problem, 3 on a numerical failure.
"""

import argparse
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import analytics, apriori, duality, market, solver, utility
from .errors import ConfigError, NumericalFailure, ResourceLimit
from .lattice import control_mesh
from .quadrature import gauss_hermite_rule

_PROBLEMS = ("merton", "cuoco-liu")
_MODES = ("error", "gap")
_MAX_LEVEL = 8

#: step counts exercised by the polar check, kept small enough to enumerate
_POLAR_STEPS = (2, 4, 8)
_POLAR_DRAWS = 16

# key -> (parser, default); None default means resolved later or required
_SCHEMA = {
    "problem": (str, None),
    "p": (float, 0.5),
    "r": (float, 0.8),
    "b": (float, 1.2),
    "sigma": (float, 1.0),
    "T": (float, 0.5),
    "x_max": (float, 20.0),
    "y_max": (str, "auto"),
    "R": (float, 1.0),
    "iota": (float, 0.5),
    "lambda_plus": (float, 1.0),
    "lambda_minus": (float, 1.0),
    "a_min": (float, -1.0),
    "a_max": (float, 1.0),
    "gamma_min": (float, None),
    "gamma_max": (float, None),
    "M": (int, 4),
    "k_min": (int, 1),
    "k_max": (int, 5),
    "rho": (float, 18.0),
    "c0": (float, 8.0),
    "mode": (str, None),
    "out": (str, "results"),
    "seed": (int, 0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    p: float
    r: float
    b: float
    sigma: float
    T: float
    x_max: float
    y_max: float  # resolved numeric value
    R: float
    iota: float
    lambda_plus: float
    lambda_minus: float
    a_min: float
    a_max: float
    gamma_min: float
    gamma_max: float
    M: int
    k_min: int
    k_max: int
    rho: float
    c0: float
    mode: str
    out: str
    seed: int

    def echo(self):
        """Canonical one-line rendering of the resolved config."""
        parts = []
        for key in sorted(_SCHEMA):
            value = getattr(self, key)
            if isinstance(value, float):
                parts.append(f"{key}={value:g}")
            else:
                parts.append(f"{key}={value}")
        return "config: " + " ".join(parts)


def resolve_config_path(spec):
    """An existing file wins; otherwise fall back to a bundled config."""
    path = Path(spec)
    if path.is_file():
        return path
    name = spec[:-4] if spec.endswith(".cfg") else spec
    bundled = resources.files("dualgap").joinpath("configs", f"{name}.cfg")
    if bundled.is_file():
        return bundled
    raise ConfigError(f"config file not found: {spec}")


def _parse_entries(text, source):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key}")
        entries[key] = value
    return entries


def load_config(spec):
    """Parse and validate a config file into a fully resolved ExperimentConfig."""
    path = resolve_config_path(spec)
    entries = _parse_entries(path.read_text(encoding="utf-8"), str(spec))
    unknown = sorted(set(entries) - set(_SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    values = {}
    for key, (cast, default) in _SCHEMA.items():
        if key in entries:
            try:
                values[key] = cast(entries[key])
            except ValueError:
                raise ConfigError(f"bad value for {key}: {entries[key]!r}") from None
        else:
            values[key] = default
    if values["problem"] is None:
        raise ConfigError("missing required key: problem")
    if values["problem"] not in _PROBLEMS:
        raise ConfigError(f"problem must be one of {', '.join(_PROBLEMS)}, got {values['problem']}")
    if values["gamma_min"] is None:
        values["gamma_min"] = 0.0 if values["problem"] == "merton" else -1.0
    if values["gamma_max"] is None:
        values["gamma_max"] = 0.0 if values["problem"] == "merton" else 1.0
    if values["mode"] is None:
        values["mode"] = "error" if values["problem"] == "merton" else "gap"
    _validate(values)
    values["y_max"] = _resolve_y_max(values)
    return ExperimentConfig(**values)


def _validate(values):
    def require(condition, message):
        if not condition:
            raise ConfigError(message)

    require(0.0 < values["p"] < 1.0, f"p must lie in (0, 1), got {values['p']}")
    require(values["sigma"] > 0.0, f"sigma must be positive, got {values['sigma']}")
    require(values["T"] > 0.0, f"T must be positive, got {values['T']}")
    require(values["x_max"] > 0.0, f"x_max must be positive, got {values['x_max']}")
    require(values["rho"] > 0.0, f"rho must be positive, got {values['rho']}")
    require(values["c0"] > 0.0, f"c0 must be positive, got {values['c0']}")
    require(
        values["c0"] / values["rho"] < values["rho"],
        f"c0/rho = {values['c0'] / values['rho']} must fall below rho = {values['rho']}",
    )
    require(
        values["rho"] <= values["x_max"],
        f"rho = {values['rho']} must not exceed x_max = {values['x_max']}",
    )
    require(
        values["a_min"] <= 0.0 <= values["a_max"],
        f"control interval [{values['a_min']}, {values['a_max']}] must contain 0",
    )
    require(
        values["gamma_min"] <= values["gamma_max"],
        f"empty dual control interval [{values['gamma_min']}, {values['gamma_max']}]",
    )
    require(2 <= values["M"] <= 20, f"M must lie in [2, 20], got {values['M']}")
    require(values["k_min"] >= 0, f"k_min must be nonnegative, got {values['k_min']}")
    require(
        values["k_min"] <= values["k_max"],
        f"k_min = {values['k_min']} exceeds k_max = {values['k_max']}",
    )
    require(
        values["k_max"] <= _MAX_LEVEL,
        f"k_max = {values['k_max']} exceeds the supported maximum {_MAX_LEVEL}",
    )
    require(values["mode"] in _MODES, f"mode must be one of {', '.join(_MODES)}, got {values['mode']}")
    require(values["seed"] >= 0, f"seed must be nonnegative, got {values['seed']}")
    if values["problem"] == "cuoco-liu":
        require(
            values["R"] >= values["r"],
            f"borrowing rate R = {values['R']} must be at least r = {values['r']}",
        )
        require(
            values["lambda_plus"] > 0.0 and values["lambda_minus"] > 0.0,
            "lambda_plus and lambda_minus must be positive",
        )
        require(values["iota"] >= 0.0, f"iota must be nonnegative, got {values['iota']}")


def _resolve_y_max(values):
    raw = values["y_max"]
    if raw != "auto":
        try:
            y_max = float(raw)
        except ValueError:
            raise ConfigError(f"y_max must be a number or 'auto', got {raw!r}") from None
        if y_max <= 0.0:
            raise ConfigError(f"y_max must be positive, got {y_max}")
        return y_max
    # auto: cover the conjugate's support edge with integer headroom
    x_rho = values["c0"] / values["rho"]
    chord_slope = (x_rho ** values["p"] / values["p"]) / x_rho
    return float(math.ceil(max(chord_slope, 4.0)))


@dataclass(frozen=True)
class Problem:
    """Config materialised into model and reward objects."""

    model: market.MarketModel
    base: utility.UtilitySpec
    reward: utility.UtilitySpec
    conjugate: utility.ConjugateSpec


def build_problem(cfg):
    try:
        if cfg.problem == "merton":
            model = market.merton_model(
                r=cfg.r,
                b=cfg.b,
                sigma=cfg.sigma,
                horizon=cfg.T,
                a_interval=(cfg.a_min, cfg.a_max),
            )
            if (cfg.gamma_min, cfg.gamma_max) != (0.0, 0.0):
                model = replace(model, gamma_interval=(cfg.gamma_min, cfg.gamma_max))
        else:
            model = market.cuoco_liu_model(
                r=cfg.r,
                borrowing_rate=cfg.R,
                b=cfg.b,
                sigma=cfg.sigma,
                horizon=cfg.T,
                iota=cfg.iota,
                lambda_plus=cfg.lambda_plus,
                lambda_minus=cfg.lambda_minus,
                gamma_interval=(cfg.gamma_min, cfg.gamma_max),
            )
        base = utility.power_utility(cfg.p)
        reward = utility.lipschitz_truncate(base, cfg.rho, cfg.c0)
        conjugate = utility.conjugate_spec(reward)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return Problem(model=model, base=base, reward=reward, conjugate=conjugate)


def _level(cfg, args):
    k = cfg.k_min if getattr(args, "level", None) is None else args.level
    if not 0 <= k <= _MAX_LEVEL:
        raise ConfigError(f"level must lie in [0, {_MAX_LEVEL}], got {k}")
    return analytics.refinement_ladder(k, k, cfg.M)[0]


def _reference(cfg):
    if cfg.problem != "merton":
        raise ConfigError(
            f"no closed-form reference for problem {cfg.problem}; use mode gap"
        )
    return lambda x: market.merton_value(cfg.T, x, cfg.p, cfg.r, cfg.b, cfg.sigma)


def _header(cfg, extra=None):
    return cfg.echo() if extra is None else f"{cfg.echo()} {extra}"


def cmd_solve_primal(cfg, out, args):
    problem = build_problem(cfg)
    level = _level(cfg, args)
    disc = level.discretization(cfg.x_max, cfg.y_max)
    surface = solver.solve(problem.model, problem.reward, disc, "primal")
    path = out / f"primal_N{level.steps}.csv"
    solver.write_surface_csv(surface, path, _header(cfg, f"level={level.index}"))
    print(f"primal level {level.index}: N={level.steps} J={level.cells} -> {path}")


def cmd_solve_dual(cfg, out, args):
    problem = build_problem(cfg)
    level = _level(cfg, args)
    disc = level.discretization(cfg.x_max, cfg.y_max)
    surface = solver.solve(problem.model, problem.conjugate, disc, "dual")
    path = out / f"dual_N{level.steps}.csv"
    solver.write_surface_csv(surface, path, _header(cfg, f"level={level.index}"))
    print(f"dual level {level.index}: N={level.steps} J={level.cells} -> {path}")


def cmd_gap(cfg, out, args):
    problem = build_problem(cfg)
    level = _level(cfg, args)
    disc = level.discretization(cfg.x_max, cfg.y_max)
    primal = solver.solve(problem.model, problem.reward, disc, "primal")
    dual = solver.solve(problem.model, problem.conjugate, disc, "dual")
    report = duality.duality_gap(primal, dual, 0)
    rule = gauss_hermite_rule(cfg.M)
    primal_constants = apriori.constant_set(market.coefficient_bounds(problem.model), cfg.T)
    dual_constants = apriori.constant_set(market.dual_coefficient_bounds(problem.model), cfg.T)
    c_primal, c_dual = apriori.envelope_constants(primal_constants, dual_constants, rule)
    allowance = np.array(
        [
            apriori.truncation_allowance(x, problem.base, cfg.rho, cfg.c0, primal_constants)
            for x in report.x
        ]
    )
    bounds = duality.aposteriori_bounds(
        report,
        order=cfg.M,
        step=primal.time.step,
        spacing=primal.grid.spacing,
        lip_primal=problem.reward.lipschitz,
        lip_dual=problem.conjugate.lipschitz,
        c_primal=c_primal,
        c_dual=c_dual,
        allowance=allowance,
    )
    path = out / f"gap_N{level.steps}.csv"
    duality.write_gap_csv(report, path, _header(cfg, f"level={level.index}"), bounds)
    print(
        f"gap level {level.index}: N={level.steps} max gap {float(np.max(report.gap)):.3e} -> {path}"
    )


def cmd_convergence(cfg, out, args):
    problem = build_problem(cfg)
    mode = cfg.mode if getattr(args, "mode", None) is None else args.mode
    ladder = analytics.refinement_ladder(cfg.k_min, cfg.k_max, cfg.M)
    kwargs = {"x_max": cfg.x_max, "y_max": cfg.y_max}
    if mode == "error":
        kwargs["reference"] = _reference(cfg)
    else:
        kwargs["conjugate"] = problem.conjugate
    table = analytics.run_ladder(problem.model, problem.reward, ladder, mode, **kwargs)
    path = out / f"convergence_{mode}.csv"
    analytics.write_convergence_csv(table, path, _header(cfg))
    for i, level in enumerate(table.levels):
        norms = table.norms[i]
        print(
            f"k={level.index} N={level.steps} J={level.cells} "
            f"l1={norms['l1']:.3e} l2={norms['l2']:.3e} linf={norms['linf']:.3e} "
            f"({table.seconds[i]:.2f} s)"
        )
    print(f"convergence ({mode}) -> {path}")


def cmd_bounds(cfg, out, args):
    problem = build_problem(cfg)
    reference = _reference(cfg)
    ladder = analytics.refinement_ladder(cfg.k_min, cfg.k_max, cfg.M)
    rule = gauss_hermite_rule(cfg.M)
    constants = apriori.constant_set(market.coefficient_bounds(problem.model), cfg.T)
    lipschitz = problem.reward.lipschitz
    errors = analytics.run_ladder(
        problem.model, problem.reward, ladder, "error",
        x_max=cfg.x_max, y_max=cfg.y_max, reference=reference,
    )
    gaps = analytics.run_ladder(
        problem.model, problem.reward, ladder, "gap",
        x_max=cfg.x_max, y_max=cfg.y_max, conjugate=problem.conjugate,
    )
    rows = []
    for i, level in enumerate(ladder):
        step = cfg.T / level.steps
        rows.append(
            (
                step,
                apriori.em_bound(step, 1.0, lipschitz, constants),
                apriori.gh_bound(step, 1.0, rule, lipschitz, constants),
                errors.norms[i]["linf"],
                gaps.norms[i]["linf"],
            )
        )
    path = out / "bounds.csv"
    apriori.write_bound_table_csv(path, rows, _header(cfg))
    for row in rows:
        print(
            f"h={row[0]:.4e} em={row[1]:.3e} gh={row[2]:.3e} "
            f"error={row[3]:.3e} gap={row[4]:.3e}"
        )
    print(f"bounds -> {path}")


def cmd_polar_check(cfg, out, args):
    problem = build_problem(cfg)
    model = problem.model
    rule = gauss_hermite_rule(cfg.M)
    a_mesh = control_mesh(model.a_interval, 2 ** max(cfg.k_min, 1) + 1)
    rng = np.random.default_rng(cfg.seed)
    lines_out = []
    for steps in _POLAR_STEPS:
        step = cfg.T / steps
        ratios = []
        violation = 0.0
        for _ in range(_POLAR_DRAWS):
            primal_policy = rng.uniform(model.a_interval[0], model.a_interval[1], size=steps)
            lo, hi = model.gamma_interval
            dual_policy = rng.uniform(lo, hi, size=steps) if hi > lo else np.full(steps, lo)
            _, defect = duality.polar_defect(
                model, rule, steps, step, (1.0, 1.0),
                tuple(primal_policy), tuple(dual_policy), a_mesh,
            )
            ratios.append(abs(defect) / step)
            violation = max(violation, max(defect, 0.0) / step)
        lines_out.append((steps, step, float(np.mean(ratios)), float(np.max(ratios)), violation))
    path = out / "polar.csv"
    lines = [f"# {_header(cfg)}", "N,h,c_abs_mean,c_abs_max,violation_max"]
    for steps, step, c_mean, c_max, vio in lines_out:
        lines.append(f"{steps},{step:.15e},{c_mean:.15e},{c_max:.15e},{vio:.15e}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    for steps, step, c_mean, c_max, vio in lines_out:
        print(f"N={steps} h={step:.4e} c_mean={c_mean:.3e} c_max={c_max:.3e} violation={vio:.3e}")
    print(f"polar check -> {path}")


_PIPELINES = {
    "solve-primal": cmd_solve_primal,
    "solve-dual": cmd_solve_dual,
    "gap": cmd_gap,
    "convergence": cmd_convergence,
    "bounds": cmd_bounds,
    "polar-check": cmd_polar_check,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dualgap",
        description="Primal and dual value function experiments with duality gap diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "solve-primal": "solve the maximising surface at one level",
        "solve-dual": "solve the minimising surface at one level",
        "gap": "duality gap with two-sided bounds at one level",
        "convergence": "norms and orders over the refinement ladder",
        "bounds": "a priori envelopes against observed errors and gaps",
        "polar-check": "product-chain supermartingale diagnostic",
    }
    for name, help_text in specs.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="config file path or bundled name")
        cmd.add_argument("--out", default=None, help="output directory (default from config)")
        if name in ("solve-primal", "solve-dual", "gap"):
            cmd.add_argument("--level", type=int, default=None, help="ladder level k")
        if name == "convergence":
            cmd.add_argument("--mode", choices=_MODES, default=None, help="error or gap ladder")
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out if args.out is not None else cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        _PIPELINES[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, ResourceLimit, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
