"""Command-line experiment runner: ``gen``, ``solve``, ``rate``, ``check``.

Experiments are described by a JSON config (schema below, ``version`` 1).
Outputs are CSV (comma-delimited, header row, floats at 17 significant
digits) and JSON with a fixed key order, so identical configs and seeds
reproduce identical bytes — except for the wall-clock ``timing`` entry,
which is the one intentionally non-reproducible field.

Config schema::

    {
      "version": 1,
      "regime": "young" | "singular" | "rough",
      "a": number | [numbers],                  # initial value
      "driver": {"kind": "fbm", "hurst": H, "dim": n, "seed": s,
                 "method"?: "auto|cholesky|circulant", "lift_refine"?: r}
              | {"kind": "builtin", "name": "linear|sine|cosine|quadratic|trig",
                 "dim"?: n},
      "grid": {"n_steps": N, "horizon": T},     # N a power of two
      "gamma": g, "kappa": k,                   # regularity exponents
      "coefficient": {"family": "constant|linear|separable|trig",
                      "params": {...}},         # young / rough regimes
      "kernel": {"alpha": a, "psi": "<matrix function>",
                 "psi_params"?: {...}},         # singular regime
      "solver"?: {"tol": t, "max_iter": m},
      "rate"?: {"mode": "oracle" | "self", "oracle"?: "<name>",
                "benchmark"?: number},
      "outputs"?: {"prefix": "experiment", "write_lift": false}
    }

Exit codes: 0 success; 2 invalid config or arguments (the message names
the violated constraint); 3 solver non-convergence or failed checks
(outputs are still written); 4 I/O failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .algebra import Grid, Path, path_holder_norm
from .checks import FAULT_MODES, SUITES, checks_report, run_checks
from .coefficients import (
    Coefficient,
    constant_coefficient,
    linear_coefficient,
    matrix_func,
    scalar_func,
    separable_coefficient,
    trig_coefficient,
)
from .rough import LevyArea, levy_lift_piecewise_linear, lift_from_subgrid
from .signals import BUILTIN_PATHS, FbmSpec, builtin_path, generate_fbm_detailed
from .singular import KernelSpec
from .solver import SolverReport, VolterraProblem, solve

__all__ = [
    "ExperimentConfig",
    "RateReport",
    "load_config",
    "build_problem",
    "cmd_gen",
    "cmd_solve",
    "cmd_rate",
    "cmd_check",
    "main",
    "EXIT_OK",
    "EXIT_INVALID",
    "EXIT_NOT_CONVERGED",
    "EXIT_IO",
]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4

CONFIG_VERSION = 1

RATE_ORACLES = ("exp_of_sine", "exponential", "power_kernel", "quadratic_ramp")

_TOP_KEYS = {
    "version",
    "regime",
    "a",
    "driver",
    "grid",
    "gamma",
    "kappa",
    "coefficient",
    "kernel",
    "solver",
    "rate",
    "outputs",
}
_DRIVER_KEYS = {"kind", "hurst", "dim", "seed", "method", "lift_refine", "name"}
_GRID_KEYS = {"n_steps", "horizon"}
_SOLVER_KEYS = {"tol", "max_iter"}
_RATE_KEYS = {"mode", "oracle", "benchmark"}
_OUTPUT_KEYS = {"prefix", "write_lift"}


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description.

    Keeps the raw (validated) dictionary so serialization round-trips
    losslessly: ``ExperimentConfig.from_dict(d).to_dict() == d``.
    """

    raw: dict

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ValueError(f"unknown config key '{sorted(unknown)[0]}'")
        for key in ("version", "regime", "a", "driver", "grid"):
            if key not in data:
                raise ValueError(f"config missing required key '{key}'")
        if data["version"] != CONFIG_VERSION:
            raise ValueError(
                f"unsupported config version {data['version']!r} (this build reads version {CONFIG_VERSION})"
            )

        _check_keys(data["driver"], _DRIVER_KEYS, "driver")
        _check_keys(data["grid"], _GRID_KEYS, "grid")
        _check_keys(data.get("solver", {}), _SOLVER_KEYS, "solver")
        _check_keys(data.get("rate", {}), _RATE_KEYS, "rate")
        _check_keys(data.get("outputs", {}), _OUTPUT_KEYS, "outputs")

        driver = data["driver"]
        kind = driver.get("kind")
        if kind not in ("fbm", "builtin"):
            raise ValueError(f"driver kind must be 'fbm' or 'builtin', got {kind!r}")
        if kind == "fbm":
            for key in ("hurst", "dim", "seed"):
                if key not in driver:
                    raise ValueError(f"fbm driver missing required key '{key}'")
        else:
            if "name" not in driver:
                raise ValueError("builtin driver missing required key 'name'")
            if driver["name"] not in BUILTIN_PATHS:
                raise ValueError(
                    f"unknown builtin driver '{driver['name']}' (expected one of {', '.join(BUILTIN_PATHS)})"
                )

        regime = data["regime"]
        if regime in ("young", "rough"):
            if "coefficient" not in data:
                raise ValueError(f"{regime} regime config requires a 'coefficient' entry")
            if "gamma" not in data or "kappa" not in data:
                raise ValueError(f"{regime} regime config requires 'gamma' and 'kappa'")
        elif regime == "singular":
            if "kernel" not in data:
                raise ValueError("singular regime config requires a 'kernel' entry")
            if "gamma" not in data:
                raise ValueError("singular regime config requires 'gamma'")
        # anything else is rejected by name when the problem is built

        rate = data.get("rate", {})
        if rate.get("mode", "self") not in ("oracle", "self"):
            raise ValueError(f"rate mode must be 'oracle' or 'self', got {rate.get('mode')!r}")
        if rate.get("mode") == "oracle" and rate.get("oracle") not in RATE_ORACLES:
            raise ValueError(
                f"rate oracle must be one of {', '.join(RATE_ORACLES)}, got {rate.get('oracle')!r}"
            )
        return ExperimentConfig(copy.deepcopy(data))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    # typed accessors -------------------------------------------------------
    @property
    def regime(self) -> str:
        return self.raw["regime"]

    @property
    def driver(self) -> dict:
        return self.raw["driver"]

    @property
    def grid(self) -> Grid:
        g = self.raw["grid"]
        return Grid(float(g["horizon"]), int(g["n_steps"]))

    @property
    def outputs(self) -> dict:
        return self.raw.get("outputs", {})

    @property
    def prefix(self) -> str:
        return self.outputs.get("prefix", "experiment")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        if self.driver.get("kind") != "fbm":
            raise ValueError("seed override requires a random driver (kind 'fbm')")
        data = self.to_dict()
        data["driver"]["seed"] = int(seed)
        return ExperimentConfig(data)

    def with_steps(self, n_steps: int) -> "ExperimentConfig":
        data = self.to_dict()
        data["grid"]["n_steps"] = int(n_steps)
        return ExperimentConfig(data)


def _check_keys(d, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ValueError(f"config entry '{where}' must be a JSON object")
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown config key '{where}.{sorted(unknown)[0]}'")


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"config file {path} is not valid JSON: {e}") from e
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Builders: config -> objects
# ---------------------------------------------------------------------------


def _build_coefficient(entry: dict) -> Coefficient:
    _check_keys(entry, {"family", "params"}, "coefficient")
    family = entry.get("family")
    params = dict(entry.get("params", {}))
    if family == "constant":
        return constant_coefficient(**params)
    if family == "linear":
        return linear_coefficient(**params)
    if family == "trig":
        return trig_coefficient(**params)
    if family == "separable":
        phi = params.pop("phi", None)
        psi = params.pop("psi", None)
        if params:
            raise ValueError(f"unknown separable coefficient key '{sorted(params)[0]}'")
        if not isinstance(phi, dict) or not isinstance(psi, dict):
            raise ValueError("separable coefficient requires 'phi' and 'psi' objects with a 'name'")
        phi, psi = dict(phi), dict(psi)
        return separable_coefficient(
            scalar_func(phi.pop("name"), **phi), matrix_func(psi.pop("name"), **psi)
        )
    raise ValueError(
        f"unknown coefficient family {family!r} (expected constant, linear, separable or trig)"
    )


def _build_kernel(cfg: ExperimentConfig) -> KernelSpec:
    entry = cfg.raw["kernel"]
    _check_keys(entry, {"alpha", "psi", "psi_params"}, "kernel")
    for key in ("alpha", "psi"):
        if key not in entry:
            raise ValueError(f"kernel entry missing required key '{key}'")
    psi = matrix_func(entry["psi"], **entry.get("psi_params", {}))
    return KernelSpec(
        alpha=float(entry["alpha"]),
        psi=psi,
        gamma=float(cfg.raw["gamma"]),
        kappa=cfg.raw.get("kappa"),
    )


def _build_driver(cfg: ExperimentConfig) -> tuple[Path, LevyArea | None, dict]:
    """Driver path, its lift when the regime needs one, and the rng record."""
    d = cfg.driver
    grid = cfg.grid
    needs_lift = cfg.regime == "rough" or bool(cfg.outputs.get("write_lift"))
    if d["kind"] == "builtin":
        x = builtin_path(d["name"], grid, dim=int(d.get("dim", 1)))
        lift = levy_lift_piecewise_linear(x) if needs_lift else None
        rng = {"generator": None, "seed": None, "kind": "builtin", "name": d["name"]}
        return x, lift, rng

    refine = int(d.get("lift_refine", 1))
    if refine < 1:
        raise ValueError(f"driver lift_refine must be a positive integer, got {refine}")
    fine_grid = Grid(grid.horizon, grid.n_steps * refine)
    spec = FbmSpec(
        hurst=float(d["hurst"]),
        dim=int(d["dim"]),
        grid=fine_grid,
        seed=int(d["seed"]),
        method=d.get("method", "auto"),
    )
    fine, meta = generate_fbm_detailed(spec)
    rng = dict(meta)
    rng["kind"] = "fbm"
    rng["lift_refine"] = refine
    if needs_lift:
        x, lift = lift_from_subgrid(fine, refine)
    else:
        x, lift = fine.restrict(refine), None
    return x, lift, rng


def build_problem(cfg: ExperimentConfig) -> tuple[VolterraProblem, dict]:
    """Construct the Volterra problem an experiment config describes."""
    x, lift, rng = _build_driver(cfg)
    a = np.atleast_1d(np.asarray(cfg.raw["a"], dtype=float))
    meta = {k: rng[k] for k in ("hurst", "seed", "method") if k in rng}
    if cfg.regime == "singular":
        coeff = _build_kernel(cfg)
        problem = VolterraProblem("singular", a, coeff, x, driver_meta=meta or None)
    else:
        coeff = _build_coefficient(cfg.raw["coefficient"])
        problem = VolterraProblem(
            cfg.regime,
            a,
            coeff,
            x,
            gamma=float(cfg.raw["gamma"]),
            kappa=float(cfg.raw["kappa"]),
            lift=lift,
            driver_meta=meta or None,
        )
    return problem, rng


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _out_dir(args) -> str:
    if args.out is not None:
        return args.out
    return os.environ.get("ROUGHVOLTERRA_OUT", ".")


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _write_csv(path: str, header: str, table: np.ndarray) -> None:
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header, comments="")


def _driver_csv(path: str, x: Path) -> None:
    header = "t," + ",".join(f"x_{k}" for k in range(1, x.dim + 1))
    _write_csv(path, header, np.column_stack([x.grid.times, x.values]))


def _solution_csv(path: str, y: Path) -> None:
    header = "t," + ",".join(f"y_{k}" for k in range(1, y.values.shape[1] + 1))
    _write_csv(path, header, np.column_stack([y.grid.times, y.values]))


def _lift_csv(path: str, lift: LevyArea) -> None:
    """Adjacent-cell entries: cell index i, 1-based components (j, k)."""
    n_cells, dim, _ = lift.adjacent.shape
    i, j, k = np.meshgrid(
        np.arange(n_cells), np.arange(1, dim + 1), np.arange(1, dim + 1), indexing="ij"
    )
    table = np.column_stack(
        [i.ravel(), j.ravel(), k.ravel(), lift.adjacent.reshape(-1)]
    )
    _write_csv(path, "i,j,k,value", table)


def _window_dicts(report: SolverReport) -> list[dict]:
    return [
        {
            "start": w.start,
            "end": w.end,
            "t_start": w.t_start,
            "t_end": w.t_end,
            "converged": w.converged,
            "iterations": w.iterations,
            "final_residual": w.final_residual,
            "holder_norm": w.holder_norm,
            "holder_residual": w.holder_residual,
        }
        for w in report.windows
    ]


def _solver_report_json(
    cfg: ExperimentConfig, report: SolverReport, rng: dict, seconds: float
) -> dict:
    problem_gamma = report.config.get("gamma")
    problem_kappa = report.config.get("kappa")
    norm_exponent = problem_kappa if report.regime == "singular" else problem_gamma
    return {
        "config": cfg.to_dict(),
        "converged": report.converged,
        "windows": _window_dicts(report),
        "norms": {
            "exponent": norm_exponent,
            "solution_holder": path_holder_norm(report.solution, norm_exponent).value,
            "solution_sup": float(np.max(np.abs(report.solution.values))),
        },
        "errors": {
            "tolerance": report.tolerance,
            "max_iter": report.max_iter,
            "final_residual": report.windows[-1].final_residual if report.windows else None,
            "t_solved": report.t_solved,
            "solved_steps": report.solved_steps,
            "proven_horizon": report.proven_horizon,
            "extension_heuristic": report.extension_heuristic,
        },
        "timing": {"seconds": seconds},
        "rng": rng,
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    x, lift, rng = _build_driver(cfg)
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    prefix = os.path.join(out, cfg.prefix)
    _driver_csv(f"{prefix}_driver.csv", x)
    written = [f"{prefix}_driver.csv"]
    if cfg.outputs.get("write_lift"):
        if lift is None:
            lift = levy_lift_piecewise_linear(x)
        _lift_csv(f"{prefix}_lift.csv", lift)
        written.append(f"{prefix}_lift.csv")
    echo = cfg.to_dict()
    _write_json(f"{prefix}_config.json", {"config": echo, "rng": rng})
    written.append(f"{prefix}_config.json")
    for path in written:
        print(path)
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    problem, rng = build_problem(cfg)
    solver_opts = cfg.raw.get("solver", {})
    started = time.perf_counter()
    report = solve(
        problem,
        tol=solver_opts.get("tol"),
        max_iter=int(solver_opts.get("max_iter", 60)),
    )
    seconds = time.perf_counter() - started
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    prefix = os.path.join(out, cfg.prefix)
    _solution_csv(f"{prefix}_solution.csv", report.solution)
    _write_json(f"{prefix}_report.json", _solver_report_json(cfg, report, rng, seconds))
    print(f"{prefix}_solution.csv")
    print(f"{prefix}_report.json")
    if not report.converged:
        print(
            f"solver stopped at t = {report.t_solved} (step {report.solved_steps}); "
            "partial outputs written",
            file=sys.stderr,
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


@dataclass(frozen=True)
class RateReport:
    """Refinement study: resolutions, errors, fitted log-log slope."""

    mode: str
    resolutions: tuple[int, ...]
    error_resolutions: tuple[int, ...]
    errors: tuple[float, ...]
    slope: float
    lsq_residual: float
    benchmark: float | None
    converged: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.resolutions) < 3:
            raise ValueError(f"rate study needs at least 3 resolutions, got {len(self.resolutions)}")
        if not np.isfinite(self.slope):
            raise ValueError(f"fitted slope is not finite: {self.slope}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "resolutions": list(self.resolutions),
            "error_resolutions": list(self.error_resolutions),
            "errors": list(self.errors),
            "slope": self.slope,
            "lsq_residual": self.lsq_residual,
            "benchmark": self.benchmark,
            "converged": list(self.converged),
        }


_ORACLE_VALUES = {
    "exp_of_sine": lambda cfg, t: float(np.exp(np.sin(t))),
    "exponential": lambda cfg, t: float(np.exp(t)),
    "quadratic_ramp": lambda cfg, t: float(np.asarray(cfg.raw["a"], dtype=float).reshape(-1)[0] + 0.5 * t * t),
    "power_kernel": lambda cfg, t: float(
        np.asarray(cfg.raw["a"], dtype=float).reshape(-1)[0]
        + t ** (1.0 - cfg.raw["kernel"]["alpha"]) / (1.0 - cfg.raw["kernel"]["alpha"])
    ),
}


def _rate_resolutions(cfg: ExperimentConfig, refinements: int) -> list[int]:
    base = cfg.grid.n_steps
    return [base * (1 << k) for k in range(refinements)]


def _solve_rate_ladder(cfg: ExperimentConfig, resolutions: list[int]):
    """Solve at every resolution, sharing one fbm master sample.

    Random drivers are generated once on the finest grid and restricted
    down, so coarser runs see the same signal; builtin drivers are
    analytic and regenerate consistently at any resolution.
    """
    reports: list[SolverReport] = []
    rng: dict = {}
    if cfg.driver["kind"] == "fbm":
        finest = cfg.with_steps(resolutions[-1])
        refine = int(cfg.driver.get("lift_refine", 1))
        fine_grid = Grid(finest.grid.horizon, finest.grid.n_steps * refine)
        spec = FbmSpec(
            hurst=float(cfg.driver["hurst"]),
            dim=int(cfg.driver["dim"]),
            grid=fine_grid,
            seed=int(cfg.driver["seed"]),
            method=cfg.driver.get("method", "auto"),
        )
        master, meta = generate_fbm_detailed(spec)
        rng = dict(meta)
        rng["kind"] = "fbm"
        rng["master_n_steps"] = fine_grid.n_steps
        driver_meta = {k: rng[k] for k in ("hurst", "seed", "method")}
        for n in resolutions:
            sub = cfg.with_steps(n)
            factor = fine_grid.n_steps // n
            if sub.regime == "rough":
                x, lift = lift_from_subgrid(master, factor)
            else:
                x, lift = master.restrict(factor), None
            a = np.atleast_1d(np.asarray(sub.raw["a"], dtype=float))
            if sub.regime == "singular":
                problem = VolterraProblem("singular", a, _build_kernel(sub), x, driver_meta=driver_meta)
            else:
                problem = VolterraProblem(
                    sub.regime,
                    a,
                    _build_coefficient(sub.raw["coefficient"]),
                    x,
                    gamma=float(sub.raw["gamma"]),
                    kappa=float(sub.raw["kappa"]),
                    lift=lift,
                    driver_meta=driver_meta,
                )
            reports.append(_solve_with_opts(sub, problem))
            if not reports[-1].converged:
                break
    else:
        for n in resolutions:
            sub = cfg.with_steps(n)
            problem, rng = build_problem(sub)
            reports.append(_solve_with_opts(sub, problem))
            if not reports[-1].converged:
                break
    return reports, rng


def _solve_with_opts(cfg: ExperimentConfig, problem: VolterraProblem) -> SolverReport:
    opts = cfg.raw.get("solver", {})
    return solve(problem, tol=opts.get("tol"), max_iter=int(opts.get("max_iter", 60)))


def cmd_rate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    refinements = args.refinements
    if refinements < 3:
        raise ValueError(f"refinements must be at least 3, got {refinements}")
    rate_cfg = cfg.raw.get("rate", {})
    mode = rate_cfg.get("mode", "self")
    resolutions = _rate_resolutions(cfg, refinements)

    started = time.perf_counter()
    reports, rng = _solve_rate_ladder(cfg, resolutions)
    seconds = time.perf_counter() - started
    solved = resolutions[: len(reports)]
    aborted = bool(reports) and not reports[-1].converged

    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    prefix = os.path.join(out, cfg.prefix)

    if aborted or len(reports) < 3:
        partial = {
            "config": cfg.to_dict(),
            "mode": mode,
            "resolutions": solved,
            "converged": [r.converged for r in reports],
            "aborted": True,
            "timing": {"seconds": seconds},
            "rng": rng,
        }
        _write_json(f"{prefix}_rate.json", partial)
        print(f"{prefix}_rate.json")
        print("rate study aborted: a solve did not converge; partial table written", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    horizon = cfg.grid.horizon
    if mode == "oracle":
        oracle = _ORACLE_VALUES[rate_cfg["oracle"]]
        target = oracle(cfg, horizon)
        errors = [float(abs(r.solution.values[-1, 0] - target)) for r in reports]
        error_resolutions = solved
        benchmark = rate_cfg.get("benchmark")
        if benchmark is None and cfg.regime == "singular":
            benchmark = float(cfg.raw["gamma"]) - float(cfg.raw["kernel"]["alpha"])
    else:
        errors = []
        for coarse_n, coarse, fine in zip(solved, reports, reports[1:]):
            step = fine.solution.grid.n_steps // coarse_n
            errors.append(
                float(
                    np.max(
                        np.abs(coarse.solution.values - fine.solution.values[::step])
                    )
                )
            )
        error_resolutions = solved[:-1]
        benchmark = rate_cfg.get("benchmark")

    fit, residuals, *_ = np.polyfit(
        np.log2(error_resolutions), np.log2(errors), 1, full=True
    )
    lsq = float(np.sqrt(residuals[0] / len(errors))) if len(residuals) else 0.0
    rate = RateReport(
        mode=mode,
        resolutions=tuple(solved),
        error_resolutions=tuple(error_resolutions),
        errors=tuple(errors),
        slope=float(-fit[0]),
        lsq_residual=lsq,
        benchmark=benchmark,
        converged=tuple(r.converged for r in reports),
    )
    payload = {"config": cfg.to_dict(), **rate.to_dict(), "timing": {"seconds": seconds}, "rng": rng}
    _write_json(f"{prefix}_rate.json", payload)
    print(f"{prefix}_rate.json")
    return EXIT_OK


def cmd_check(args) -> int:
    results = run_checks(args.suite, fault=args.inject_fault)
    report = checks_report(results)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"checks_{args.suite}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    return EXIT_OK if report["passed"] else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughvolterra",
        description="Volterra-equation experiments driven by Hölder-rough signals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory (default: $ROUGHVOLTERRA_OUT or .)")
        p.add_argument("--seed", type=int, default=None, help="override the fbm driver seed")

    p_gen = sub.add_parser("gen", help="generate the driver (and lift) files")
    add_common(p_gen)
    p_gen.set_defaults(fn=cmd_gen)

    p_solve = sub.add_parser("solve", help="run the configured solve")
    add_common(p_solve)
    p_solve.set_defaults(fn=cmd_solve)

    p_rate = sub.add_parser("rate", help="refinement study across dyadic resolutions")
    add_common(p_rate)
    p_rate.add_argument("--refinements", type=int, default=3, help="number of resolutions (>= 3)")
    p_rate.set_defaults(fn=cmd_rate)

    p_check = sub.add_parser("check", help="run the invariant suites")
    p_check.add_argument("--suite", default="all", choices=("all",) + SUITES)
    p_check.add_argument("--out", default=None, help="also write the JSON report here")
    p_check.add_argument(
        "--inject-fault",
        default=None,
        choices=FAULT_MODES,
        help="deliberately corrupt one identity (testing hook)",
    )
    p_check.set_defaults(fn=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
