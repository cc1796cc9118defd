"""Windowed fixed-point solvers for Volterra equations in three regimes.

The solution of y_t = a + int_0^t sigma(t, u, y_u) dx_u is constructed as
the fixed point of the Picard map

    (Gamma y)_m = a + I(t_m, [0, m)),

where I is the regime's integral operator: first-order compensated sums
for drivers above Hölder exponent 1/2 ('young'), the same sums against a
weakly singular kernel (t - u)^(-alpha) psi(y) ('singular'), and
second-order sums driven by a Lévy-area lift for exponents in (1/3, 1/2]
('rough').

Iteration runs window by window.  Each window restarts from the constant
extension of the previously accepted endpoint, accepts when the sup-norm
update drops below tolerance, halves its length when the iteration fails
to settle, and grows by half after success (capped at half the horizon).
A window that fails at one grid cell ends the solve; the report then
carries the partial solution up to the last accepted time, which for the
rough regime is a legitimate outcome rather than an error: only local
solvability is guaranteed there, and the report marks everything past the
first window as heuristic continuation.

All reported norms are discrete-grid quantities measured over dyadic time
lags, hence lower bounds on their continuum counterparts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .algebra import Grid, Path
from .coefficients import Coefficient
from .rough import LevyArea
from .singular import KernelSpec

__all__ = [
    "VolterraProblem",
    "WindowRecord",
    "SolverReport",
    "validate_problem",
    "solve",
    "solve_young",
    "solve_singular",
    "solve_rough",
    "picard_residual",
    "residual_holder_diagnostic",
    "DEFAULT_TOL_SMOOTH",
    "DEFAULT_TOL_FBM",
    "DEFAULT_MAX_ITER",
]

Regime = Literal["young", "singular", "rough"]

DEFAULT_TOL_SMOOTH = 1e-10
DEFAULT_TOL_FBM = 1e-8
DEFAULT_MAX_ITER = 60


@dataclass
class VolterraProblem:
    """One Volterra equation: regime, initial value, field, driver, exponents.

    ``coefficient`` is a `Coefficient` for the young and rough regimes and
    a `KernelSpec` for the singular one (the kernel carries its own
    exponents, so ``gamma``/``kappa`` may then be omitted).  ``gamma`` is
    the driver's Hölder exponent; ``kappa`` the state-regularity exponent
    the contraction estimates run at.  ``driver_meta`` optionally echoes
    how the driver was generated (seed, hurst, method) into reports and
    picks the default tolerance.
    """

    regime: Regime
    a: np.ndarray
    coefficient: Coefficient | KernelSpec
    driver: Path
    gamma: float | None = None
    kappa: float | None = None
    lift: LevyArea | None = None
    driver_meta: dict | None = None

    def __post_init__(self) -> None:
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if self.regime == "singular" and isinstance(self.coefficient, KernelSpec):
            if self.gamma is None:
                self.gamma = self.coefficient.gamma
            if self.kappa is None:
                self.kappa = self.coefficient.kappa
        validate_problem(self)

    @property
    def d_dim(self) -> int:
        return self.coefficient.d_dim

    @property
    def n_dim(self) -> int:
        return self.coefficient.n_dim

    @property
    def grid(self) -> Grid:
        return self.driver.grid

    def config(self) -> dict:
        """Plain-data echo of the problem for reports and reproduction."""
        if isinstance(self.coefficient, KernelSpec):
            field_desc = {
                "kind": "kernel",
                "alpha": self.coefficient.alpha,
                "psi": self.coefficient.psi.name,
            }
        else:
            field_desc = {"kind": "coefficient", "name": self.coefficient.name}
        return {
            "regime": self.regime,
            "a": self.a.tolist(),
            "field": field_desc,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "horizon": self.grid.horizon,
            "n_steps": self.grid.n_steps,
            "d_dim": self.d_dim,
            "n_dim": self.n_dim,
            "lift": self.lift is not None,
            "driver_meta": dict(self.driver_meta) if self.driver_meta else None,
        }


def validate_problem(p: VolterraProblem) -> None:
    """Check regime-specific solvability constraints; raise ValueError naming the violated one."""
    if p.regime not in ("young", "singular", "rough"):
        raise ValueError(f"unknown regime '{p.regime}' (expected young, singular or rough)")
    if p.driver.values.ndim != 2:
        raise ValueError("driver must be a vector path with shape (n_steps + 1, n)")
    if not np.all(np.isfinite(p.a)):
        raise ValueError("initial value must be finite")

    if p.regime == "singular":
        if not isinstance(p.coefficient, KernelSpec):
            raise ValueError("singular regime requires a KernelSpec coefficient")
        # solvability constraints live on the KernelSpec itself
    else:
        if not isinstance(p.coefficient, Coefficient):
            raise ValueError(f"{p.regime} regime requires a Coefficient, got {type(p.coefficient).__name__}")
        if p.gamma is None or p.kappa is None:
            raise ValueError(f"{p.regime} regime requires explicit gamma and kappa exponents")

    if p.regime == "young":
        if not (0.5 < p.gamma <= 1.0):
            raise ValueError(f"young regime requires gamma in (1/2, 1], got {p.gamma}")
        if not (p.kappa * (1.0 + p.gamma) > 1.0):
            raise ValueError(
                f"young regime requires kappa (1 + gamma) > 1, got kappa={p.kappa}, gamma={p.gamma}"
            )
    elif p.regime == "rough":
        if not (1.0 / 3.0 < p.gamma <= 0.5):
            raise ValueError(f"rough regime requires gamma in (1/3, 1/2], got {p.gamma}")
        if not (p.gamma * (p.kappa + 2.0) > 1.0):
            raise ValueError(
                f"rough regime requires gamma (kappa + 2) > 1, got kappa={p.kappa}, gamma={p.gamma}"
            )
        if p.lift is None:
            raise ValueError("rough regime requires a Lévy-area lift for the driver")
        if p.lift.grid != p.grid or p.lift.dim != p.driver.dim:
            raise ValueError("lift does not match the driver")

    if p.a.shape != (p.d_dim,):
        raise ValueError(f"initial value has shape {p.a.shape}, the field expects ({p.d_dim},)")
    if p.driver.dim != p.n_dim:
        raise ValueError(
            f"driver has dimension {p.driver.dim} but the field expects {p.n_dim}"
        )


@dataclass(frozen=True)
class WindowRecord:
    """One continuation window: indices, iteration trace and diagnostics."""

    start: int
    end: int
    t_start: float
    t_end: float
    converged: bool
    iterations: int
    residuals: tuple[float, ...]
    holder_norm: float
    holder_residual: float

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("inf")


@dataclass(frozen=True)
class SolverReport:
    """Solution with its construction trace.

    ``solution`` always spans the full grid; when ``converged`` is false
    only the prefix up to ``solved_steps`` holds fixed-point values and
    the tail is the constant extension of the last accepted point.
    ``proven_horizon`` is the horizon backed by a genuine contraction
    window; for the rough regime anything beyond the first window is a
    heuristic extension and ``extension_heuristic`` says whether the
    solve used one.
    """

    regime: Regime
    solution: Path
    yprime: Path | None
    windows: tuple[WindowRecord, ...]
    converged: bool
    t_solved: float
    solved_steps: int
    tolerance: float
    max_iter: int
    proven_horizon: float
    extension_heuristic: bool
    config: dict = field(default_factory=dict)


def picard_residual(y_old: Path, y_new: Path) -> float:
    """Sup-norm distance between consecutive Picard iterates."""
    if y_old.grid != y_new.grid:
        raise ValueError("iterates must share one grid")
    if y_old.value_shape != y_new.value_shape:
        raise ValueError("iterates must share one value shape")
    return float(np.max(np.abs(y_new.values - y_old.values)))


def residual_holder_diagnostic(y_old: Path, y_new: Path, gamma: float) -> float:
    """Dyadic-lag gamma-Hölder norm of the update difference (secondary diagnostic)."""
    if y_old.grid != y_new.grid:
        raise ValueError("iterates must share one grid")
    diff = y_new.values - y_old.values
    return _segment_holder(y_old.grid.times, diff, 0, y_old.grid.n_steps, gamma)


def _segment_holder(times: np.ndarray, values: np.ndarray, i0: int, i1: int, mu: float) -> float:
    """Hölder-mu norm of a value array over [i0, i1], dyadic lags only."""
    width = i1 - i0
    if width <= 0:
        return 0.0
    seg = values[i0 : i1 + 1]
    flat = seg.reshape(seg.shape[0], -1)
    best = 0.0
    lag = 1
    # overflowed iterates reach this diagnostic on the partial-solve path;
    # their norm is legitimately inf, not an arithmetic error
    with np.errstate(over="ignore", invalid="ignore"):
        while lag <= width:
            mags = np.linalg.norm(flat[lag:] - flat[:-lag], axis=1)
            span = float(times[i0 + lag] - times[i0])
            best = max(best, float(np.max(mags)) / span**mu)
            lag *= 2
    return best


def _default_tol(p: VolterraProblem) -> float:
    if p.driver_meta and "hurst" in p.driver_meta:
        return DEFAULT_TOL_FBM
    return DEFAULT_TOL_SMOOTH


# ---------------------------------------------------------------------------
# Regime-specific Picard maps.  Each factory returns (history, sweep):
#   history(start, end, y, yp) precomputes, for every target index m in
#     (start, end], the contribution of the frozen cells [0, start] at the
#     frozen outer time t_m (these do not move during the window);
#   sweep(y, yp, start, end, hist) applies one Picard update in place of
#     the window values and returns (new_y, new_yp).
# Cell l of the discrete operator reads the state at the cell's left
# point, so cells with l <= start are frozen once the solution is accepted
# up to start.
# ---------------------------------------------------------------------------


def _young_maps(p: VolterraProblem):
    sigma = p.coefficient
    times = p.grid.times
    dx = p.driver.cells()
    a = p.a

    def row_sum(m: int, lo: int, hi: int, y: np.ndarray) -> np.ndarray:
        if hi <= lo:
            return np.zeros_like(a)
        rows = sigma.eval_many(float(times[m]), times[lo:hi], y[lo:hi])
        return np.einsum("ldn,ln->d", rows, dx[lo:hi])

    def history(start, end, y, yp):
        return np.stack([row_sum(m, 0, min(start + 1, m), y) for m in range(start + 1, end + 1)])

    def sweep(y, yp, start, end, hist):
        out = y.copy()
        for idx, m in enumerate(range(start + 1, end + 1)):
            out[m] = a + hist[idx] + row_sum(m, start + 1, m, y)
        return out, yp

    return history, sweep


def _singular_maps(p: VolterraProblem):
    kernel = p.coefficient
    times = p.grid.times
    dx = p.driver.cells()
    a = p.a

    def row_sum(m: int, lo: int, hi: int, y: np.ndarray) -> np.ndarray:
        if hi <= lo:
            return np.zeros_like(a)
        weights = (times[m] - times[lo:hi]) ** -kernel.alpha
        psi = kernel.psi.value(y[lo:hi])
        return np.einsum("l,ldn,ln->d", weights, psi, dx[lo:hi])

    def history(start, end, y, yp):
        return np.stack([row_sum(m, 0, min(start + 1, m), y) for m in range(start + 1, end + 1)])

    def sweep(y, yp, start, end, hist):
        out = y.copy()
        for idx, m in enumerate(range(start + 1, end + 1)):
            out[m] = a + hist[idx] + row_sum(m, start + 1, m, y)
        return out, yp

    return history, sweep


def _rough_maps(p: VolterraProblem):
    sigma = p.coefficient
    times = p.grid.times
    dx = p.driver.cells()
    adj = p.lift.adjacent
    a = p.a

    def row_sum(m: int, lo: int, hi: int, y: np.ndarray, yp: np.ndarray) -> np.ndarray:
        # second-order compensated cells: sigma row against the driver
        # increment plus the chain-rule derivative against the lift cell
        if hi <= lo:
            return np.zeros_like(a)
        t_m = float(times[m])
        rows = sigma.eval_many(t_m, times[lo:hi], y[lo:hi])
        jacs = sigma.d3_many(t_m, times[lo:hi], y[lo:hi])
        zp = np.einsum("ldnc,lca->ldna", jacs, yp[lo:hi])
        return np.einsum("ldn,ln->d", rows, dx[lo:hi]) + np.einsum("ldba,lab->d", zp, adj[lo:hi])

    def history(start, end, y, yp):
        return np.stack(
            [row_sum(m, 0, min(start + 1, m), y, yp) for m in range(start + 1, end + 1)]
        )

    def sweep(y, yp, start, end, hist):
        out = y.copy()
        for idx, m in enumerate(range(start + 1, end + 1)):
            out[m] = a + hist[idx] + row_sum(m, start + 1, m, y, yp)
        new_yp = yp.copy()
        new_yp[start + 1 : end + 1] = sigma.diagonal_many(
            times[start + 1 : end + 1], out[start + 1 : end + 1]
        )
        return out, new_yp

    return history, sweep


def _run_windowed(
    p: VolterraProblem,
    tol: float,
    max_iter: int,
    maps,
    initial_window: int | None = None,
    initial_guess: np.ndarray | None = None,
) -> SolverReport:
    if not (tol > 0):
        raise ValueError(f"tolerance must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    history, sweep = maps(p)
    grid = p.grid
    n = grid.n_steps
    times = grid.times
    norm_exponent = p.kappa if p.regime == "singular" else p.gamma

    y = np.tile(p.a, (n + 1, 1))
    if p.regime == "rough":
        yp = p.coefficient.diagonal_many(times, y)
    else:
        yp = None

    if initial_guess is not None:
        initial_guess = np.asarray(initial_guess, dtype=float)
        if initial_guess.shape != y.shape:
            raise ValueError(
                f"initial guess must have shape {y.shape}, got {initial_guess.shape}"
            )

    windows: list[WindowRecord] = []
    start = 0
    window = max(n // 4, 1) if initial_window is None else initial_window
    if not (1 <= window <= n):
        raise ValueError(f"initial window must lie in [1, {n}] cells, got {window}")
    cap = max(n // 2, 1)
    converged = True
    first_window_end: int | None = None
    first_attempt = True

    while start < n:
        end = min(start + window, n)
        hist = history(start, end, y, yp)
        y_try = y.copy()
        if first_attempt and initial_guess is not None:
            y_try[start + 1 : end + 1] = initial_guess[start + 1 : end + 1]
        else:
            y_try[start + 1 : end + 1] = y[start]
        first_attempt = False
        yp_try = yp
        if yp is not None:
            yp_try = yp.copy()
            yp_try[start + 1 : end + 1] = p.coefficient.diagonal_many(
                times[start + 1 : end + 1], y_try[start + 1 : end + 1]
            )
        residuals: list[float] = []
        ok = False
        iterations = 0
        for iterations in range(1, max_iter + 1):
            y_next, yp_next = sweep(y_try, yp_try, start, end, hist)
            res = float(np.max(np.abs(y_next[start : end + 1] - y_try[start : end + 1])))
            residuals.append(res)
            if not np.isfinite(res):
                break
            y_try, yp_try = y_next, yp_next
            if res < tol:
                ok = True
                break
        holder_res = _segment_holder(
            times, y_try - y, start, end, norm_exponent
        )
        if ok:
            y, yp = y_try, yp_try
            windows.append(
                WindowRecord(
                    start=start,
                    end=end,
                    t_start=float(times[start]),
                    t_end=float(times[end]),
                    converged=True,
                    iterations=iterations,
                    residuals=tuple(residuals),
                    holder_norm=_segment_holder(times, y, start, end, norm_exponent),
                    holder_residual=holder_res,
                )
            )
            if first_window_end is None:
                first_window_end = end
            start = end
            window = min(max(int(window * 1.5), 1), cap)
        elif window > 1:
            window = window // 2
        else:
            converged = False
            windows.append(
                WindowRecord(
                    start=start,
                    end=end,
                    t_start=float(times[start]),
                    t_end=float(times[end]),
                    converged=False,
                    iterations=iterations,
                    residuals=tuple(residuals),
                    holder_norm=_segment_holder(times, y, start, end, norm_exponent),
                    holder_residual=holder_res,
                )
            )
            break

    solved_steps = start
    # tail past the solved horizon: constant extension, not solution values
    y[solved_steps + 1 :] = y[solved_steps]
    if yp is not None:
        yp[solved_steps + 1 :] = yp[solved_steps]

    if p.regime == "rough":
        proven = float(times[first_window_end]) if first_window_end is not None else 0.0
        heuristic = solved_steps > (first_window_end or 0)
    else:
        proven = float(times[solved_steps])
        heuristic = False

    cfg = p.config()
    cfg["tolerance"] = tol
    cfg["max_iter"] = max_iter
    return SolverReport(
        regime=p.regime,
        solution=Path(grid, y),
        yprime=Path(grid, yp) if yp is not None else None,
        windows=tuple(windows),
        converged=converged,
        t_solved=float(times[solved_steps]),
        solved_steps=solved_steps,
        tolerance=tol,
        max_iter=max_iter,
        proven_horizon=proven,
        extension_heuristic=heuristic,
        config=cfg,
    )


def solve_young(
    p: VolterraProblem,
    tol: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    initial_window: int | None = None,
    initial_guess: np.ndarray | None = None,
) -> SolverReport:
    """First-order regime: drivers above Hölder exponent 1/2."""
    if p.regime != "young":
        raise ValueError(f"solve_young got a problem of regime '{p.regime}'")
    return _run_windowed(
        p, tol if tol is not None else _default_tol(p), max_iter, _young_maps,
        initial_window=initial_window, initial_guess=initial_guess,
    )


def solve_singular(
    p: VolterraProblem,
    tol: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    initial_window: int | None = None,
    initial_guess: np.ndarray | None = None,
) -> SolverReport:
    """Weakly singular kernel (t - u)^(-alpha) psi(y) against the driver."""
    if p.regime != "singular":
        raise ValueError(f"solve_singular got a problem of regime '{p.regime}'")
    return _run_windowed(
        p, tol if tol is not None else _default_tol(p), max_iter, _singular_maps,
        initial_window=initial_window, initial_guess=initial_guess,
    )


def solve_rough(
    p: VolterraProblem,
    tol: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    initial_window: int | None = None,
    initial_guess: np.ndarray | None = None,
) -> SolverReport:
    """Second-order regime via the driver's Lévy-area lift; local contract.

    Continuation past the first window is heuristic (flagged in the
    report); stopping early with a partial horizon is a legitimate
    outcome for this regime.
    """
    if p.regime != "rough":
        raise ValueError(f"solve_rough got a problem of regime '{p.regime}'")
    return _run_windowed(
        p, tol if tol is not None else _default_tol(p), max_iter, _rough_maps,
        initial_window=initial_window, initial_guess=initial_guess,
    )


_SOLVERS = {"young": solve_young, "singular": solve_singular, "rough": solve_rough}


def solve(
    p: VolterraProblem,
    tol: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    initial_window: int | None = None,
    initial_guess: np.ndarray | None = None,
) -> SolverReport:
    """Dispatch to the regime's solver."""
    return _SOLVERS[p.regime](
        p, tol=tol, max_iter=max_iter, initial_window=initial_window, initial_guess=initial_guess
    )
