"""Increment calculus on uniform dyadic grids.

A path sampled on a grid gives rise to increments: functions of one grid
index (the path itself), two indices (differences, integral candidates), or
three (the defect that measures how far a two-index object is from being a
difference).  The coboundary ``delta`` moves up one level,

    (delta1 f)(s, t)    = f(t) - f(s),
    (delta2 g)(s, u, t) = g(s, t) - g(s, u) - g(u, t),

and composing the two gives zero.  A two-index object with vanishing
``delta2`` is called additive; it is exactly the increment of a path.

The sewing construction goes the other way: an almost-additive germ
``g(s, t)`` whose defect vanishes faster than ``|t - s|`` is split into an
additive part (the compensated Riemann sums of its cell values, realised
here by prefix sums over the finest grid) and a small remainder.  The
remainder is bounded by a universal constant times the size of the defect,
measured in a two-exponent Hölder norm over split points; the constant is
``sewing_constant(mu)``.

All suprema are discrete: they range over grid index pairs or triples.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "Path",
    "Increment2",
    "Increment3",
    "HolderNorm",
    "SewingRegularityWarning",
    "delta1",
    "delta2",
    "holder_norm",
    "path_holder_norm",
    "split_holder_norm",
    "sup_norm",
    "sew",
    "lambda_of",
    "sewing_constant",
    "zero_increment2",
]


class SewingRegularityWarning(UserWarning):
    """The defect of a germ decays too slowly for compensation to converge."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, horizon] with a power-of-two number of steps.

    The power-of-two constraint keeps every dyadic refinement level of the
    interval available, which the level-by-level summation schemes rely on.
    """

    horizon: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if not _is_power_of_two(self.n_steps):
            raise ValueError(f"n_steps must be a power of two, got {self.n_steps}")

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(0.0, self.horizon, self.n_steps + 1)
        t.flags.writeable = False
        return t

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def refine(self, factor: int) -> "Grid":
        if not _is_power_of_two(factor):
            raise ValueError(f"refinement factor must be a power of two, got {factor}")
        return Grid(self.horizon, self.n_steps * factor)


@dataclass(frozen=True)
class Path:
    """Grid samples of a path, immutable after construction.

    ``values`` has shape ``(n_steps + 1, ...)``; the leading axis runs over
    grid times and the trailing axes carry the value (a d-vector for state
    paths, a d x n matrix for integrands or derivative processes).
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.ndim < 2:
            raise ValueError("path values must have shape (n_steps + 1, ...) with at least one value axis")
        if v.shape[0] != self.grid.n_steps + 1:
            raise ValueError(
                f"path has {v.shape[0]} samples but the grid has {self.grid.n_steps + 1} points"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.values.shape[1:]

    def cells(self) -> np.ndarray:
        """Per-cell forward differences, shape (n_steps, ...)."""
        return np.diff(self.values, axis=0)

    def restrict(self, factor: int) -> "Path":
        """Subsample onto the coarser grid with ``n_steps / factor`` steps."""
        if not _is_power_of_two(factor) or factor > self.grid.n_steps:
            raise ValueError(f"bad restriction factor {factor} for {self.grid.n_steps} steps")
        coarse = Grid(self.grid.horizon, self.grid.n_steps // factor)
        return Path(coarse, self.values[::factor])


@dataclass
class Increment2:
    """A two-index increment: values attached to grid pairs (i, j), i <= j.

    ``fn`` evaluates index pairs and must accept integer arrays that
    broadcast against each other, returning an array of shape
    ``broadcast(i, j).shape + value_shape``.  Increments built by this
    module (path differences, integral germs, sewn sums) all satisfy that
    contract, which is what lets norms and diagnostics run vectorised.

    ``prefix`` is set when the increment is additive by construction:
    ``fn(i, j) == prefix[j] - prefix[i]``.  Such increments are exact fixed
    points of the sewing map.
    """

    grid: Grid
    fn: Callable[..., np.ndarray]
    value_shape: tuple[int, ...]
    prefix: np.ndarray | None = None
    _dense: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, i: int, j: int) -> np.ndarray:
        if not (0 <= i <= j <= self.grid.n_steps):
            raise ValueError(f"index pair ({i}, {j}) outside 0 <= i <= j <= {self.grid.n_steps}")
        return np.asarray(self.fn(i, j), dtype=float)

    def cells(self) -> np.ndarray:
        """Values on adjacent pairs (k, k+1), shape (n_steps, ...)."""
        n = self.grid.n_steps
        k = np.arange(n)
        return np.asarray(self.fn(k, k + 1), dtype=float)

    def lag(self, w: int) -> np.ndarray:
        """Values on all pairs (i, i + w), shape (n_steps + 1 - w, ...)."""
        n = self.grid.n_steps
        i = np.arange(n + 1 - w)
        return np.asarray(self.fn(i, i + w), dtype=float)

    def dense(self, cap: int = 4096) -> np.ndarray:
        """Materialise all pairs into an array of shape (N+1, N+1, ...).

        Entries with j < i are zero.  Refuses grids beyond ``cap`` steps;
        the lazy evaluation rule is the primary representation.
        """
        if self.grid.n_steps > cap:
            raise ValueError(f"dense cache refused for n_steps={self.grid.n_steps} > {cap}")
        if self._dense is None:
            n = self.grid.n_steps
            out = np.zeros((n + 1, n + 1) + self.value_shape)
            for i in range(n + 1):
                js = np.arange(i, n + 1)
                out[i, i:] = self.fn(i, js)
            self._dense = out
        return self._dense


@dataclass
class Increment3:
    """A three-index increment on grid triples (i, j, k), i <= j <= k.

    Same broadcasting contract as `Increment2.fn`, with three index arrays.
    """

    grid: Grid
    fn: Callable[..., np.ndarray]
    value_shape: tuple[int, ...]

    def __call__(self, i: int, j: int, k: int) -> np.ndarray:
        if not (0 <= i <= j <= k <= self.grid.n_steps):
            raise ValueError(f"index triple ({i}, {j}, {k}) is not ordered within the grid")
        return np.asarray(self.fn(i, j, k), dtype=float)


@dataclass(frozen=True)
class HolderNorm:
    """A discrete Hölder-ratio supremum together with where it was attained."""

    exponent: float
    value: float
    arg_pair: tuple[int, int]
    arg_times: tuple[float, float]


def zero_increment2(grid: Grid, value_shape: tuple[int, ...] = (1,)) -> Increment2:
    zero = np.zeros(value_shape)

    def fn(i, j):
        batch = np.broadcast(np.asarray(i), np.asarray(j)).shape
        return np.broadcast_to(zero, batch + value_shape)

    n = grid.n_steps
    prefix = np.zeros((n + 1,) + value_shape)
    return Increment2(grid, fn, value_shape, prefix=prefix)


def delta1(f: Path) -> Increment2:
    """Forward difference of a path: (i, j) -> f_j - f_i.

    The result is additive by construction and carries the path values as
    its prefix representation.
    """
    vals = f.values

    def fn(i, j):
        return vals[j] - vals[i]

    return Increment2(f.grid, fn, f.value_shape, prefix=vals)


def delta2(h: Increment2) -> Increment3:
    """Defect of a two-index increment: (i, j, k) -> h_ik - h_ij - h_jk.

    Vanishes identically when ``h`` is a path difference; composing with
    `delta1` therefore gives zero.
    """

    def fn(i, j, k):
        return h.fn(i, k) - h.fn(i, j) - h.fn(j, k)

    return Increment3(h.grid, fn, h.value_shape)


def _mags(vals: np.ndarray, value_ndim: int) -> np.ndarray:
    """Euclidean magnitude over the trailing value axes.

    Values near the float ceiling (e.g. the finite prefix of a diverging
    Picard iteration) overflow when squared; the resulting inf is the
    correct magnitude, not an arithmetic error.
    """
    vals = np.asarray(vals, dtype=float)
    if value_ndim == 0:
        return np.abs(vals)
    tail = tuple(range(vals.ndim - value_ndim, vals.ndim))
    with np.errstate(over="ignore"):
        return np.sqrt(np.sum(vals * vals, axis=tail))


def holder_norm(g: Increment2, mu: float) -> HolderNorm:
    """Discrete Hölder norm: sup over i < j of |g_ij| / (t_j - t_i)^mu.

    Runs over every grid pair (row-blocked so memory stays linear in the
    grid size).  Zero increments report value 0 at the first pair.
    """
    if not (mu > 0):
        raise ValueError(f"exponent must be positive, got {mu}")
    n = g.grid.n_steps
    t = g.grid.times
    vndim = len(g.value_shape)
    best = -1.0
    arg = (0, min(1, n))
    for i in range(n):
        js = np.arange(i + 1, n + 1)
        mags = _mags(g.fn(i, js), vndim)
        ratios = mags / (t[js] - t[i]) ** mu
        k = int(np.argmax(ratios))
        if ratios[k] > best:
            best = float(ratios[k])
            arg = (i, int(js[k]))
    if best < 0:
        best = 0.0
    return HolderNorm(mu, best, arg, (float(t[arg[0]]), float(t[arg[1]])))


def path_holder_norm(p: Path, mu: float) -> HolderNorm:
    """Hölder norm of a path's increments."""
    return holder_norm(delta1(p), mu)


def sup_norm(p: Path) -> float:
    """Largest pointwise magnitude along the path."""
    return float(np.max(_mags(p.values, len(p.value_shape))))


def split_holder_norm(
    h: Increment3,
    rho_left: float,
    rho_right: float,
    max_exhaustive: int = 256,
) -> float:
    """Two-exponent norm of a three-index increment.

    Computes ``sup |h(i, j, k)| / ((t_j - t_i)^rho_left (t_k - t_j)^rho_right)``
    over strictly increasing triples.  The supremum is exhaustive up to
    ``max_exhaustive`` grid steps; beyond that only dyadically strided
    triples are visited, which keeps the cost near-quadratic while still
    sweeping every scale pair.
    """
    n = h.grid.n_steps
    t = h.grid.times
    vndim = len(h.value_shape)
    best = 0.0

    def scan(i: int, js: np.ndarray, ks: np.ndarray) -> float:
        dtj = t[js][:, None] - t[i]
        dtk = t[ks][None, :] - t[js][:, None]
        valid = dtk > 0
        if not np.any(valid):
            return 0.0
        vals = h.fn(i, js[:, None], ks[None, :])
        mags = _mags(vals, vndim)
        weights = np.where(valid, dtj**rho_left * np.where(valid, dtk, 1.0) ** rho_right, np.inf)
        return float(np.max(mags / weights))

    if n <= max_exhaustive:
        for i in range(n - 1):
            js = np.arange(i + 1, n)
            ks = np.arange(i + 2, n + 1)
            best = max(best, scan(i, js, ks))
    else:
        strides = [1 << m for m in range((n - 1).bit_length())]
        for i in range(n - 1):
            js = np.unique(np.concatenate([[i + s for s in strides if i + s < n]]))
            ks = np.arange(i + 2, n + 1)
            best = max(best, scan(i, np.asarray(js), ks))
    return best


def _cell_prefix(cells: np.ndarray) -> np.ndarray:
    """Prefix sums of cell values with a leading zero row."""
    zero = np.zeros((1,) + cells.shape[1:])
    return np.concatenate([zero, np.cumsum(cells, axis=0)], axis=0)


def _defect_exponent_estimate(g: Increment2) -> float | None:
    """Fitted decay exponent of max |delta2 g| over dyadic triple scales.

    Returns None when the defect is numerically zero (additive input) or
    there are too few scales to fit.
    """
    n = g.grid.n_steps
    t = g.grid.times
    d2 = delta2(g)
    vndim = len(g.value_shape)
    scales = []
    maxima = []
    w = 1
    while 2 * w <= n:
        i = np.arange(0, n - 2 * w + 1)
        vals = d2.fn(i, i + w, i + 2 * w)
        maxima.append(float(np.max(_mags(vals, vndim))))
        scales.append(2 * w * (t[1] - t[0]))
        w *= 2
    if len(scales) < 3:
        return None
    maxima_arr = np.asarray(maxima)
    top = float(np.max(maxima_arr))
    if top <= 1e-14 * max(1.0, float(np.max(_mags(g.cells(), vndim)))):
        return None
    keep = maxima_arr > 1e-300
    if int(np.sum(keep)) < 3:
        return None
    slope = np.polyfit(np.log(np.asarray(scales)[keep]), np.log(maxima_arr[keep]), 1)[0]
    return float(slope)


def sew(g: Increment2, mu: float, diagnostics: bool = True) -> Increment2:
    """Additive part of an almost-additive germ.

    The output at (i, j) is the sum of the germ's finest-grid cell values
    over the cells between i and j, realised by prefix sums so the result
    is additive by construction.  Additive inputs (those carrying a prefix
    representation, e.g. anything produced by `delta1` or by `sew` itself)
    are returned unchanged: they are exact fixed points.

    ``mu`` is the regularity the caller expects of the germ's remainder
    (must exceed 1 for the compensation to converge).  When ``diagnostics``
    is on, the decay of the germ's defect across dyadic scales is measured
    and a `SewingRegularityWarning` is emitted if the fitted exponent
    suggests the defect shrinks no faster than the interval length.
    """
    if not (mu > 0):
        raise ValueError(f"exponent must be positive, got {mu}")
    if g.prefix is not None:
        return g
    if diagnostics:
        if mu <= 1:
            warnings.warn(
                f"sewing requested at exponent mu={mu} <= 1; compensated sums need mu > 1",
                SewingRegularityWarning,
                stacklevel=2,
            )
        est = _defect_exponent_estimate(g)
        if est is not None and est <= 1.0:
            warnings.warn(
                f"germ defect decays with fitted exponent {est:.3f} <= 1; "
                "the compensated sums may not converge under refinement",
                SewingRegularityWarning,
                stacklevel=2,
            )
    prefix = _cell_prefix(g.cells())

    def fn(i, j):
        return prefix[j] - prefix[i]

    return Increment2(g.grid, fn, g.value_shape, prefix=prefix)


def lambda_of(g: Increment2, mu: float, diagnostics: bool = True) -> Increment2:
    """Compensation remainder: the germ minus its additive part.

    For an additive germ the result is identically zero.  Otherwise the
    remainder measures how far the germ is from the telescoping sums of its
    own cells; its Hölder-mu norm is controlled by ``sewing_constant(mu)``
    times the two-exponent norm of the germ's defect.
    """
    if g.prefix is not None:
        return zero_increment2(g.grid, g.value_shape)
    sewn = sew(g, mu, diagnostics=diagnostics)
    prefix = sewn.prefix

    def fn(i, j):
        return g.fn(i, j) - (prefix[j] - prefix[i])

    return Increment2(g.grid, fn, g.value_shape)


def sewing_constant(mu: float, rel_tol: float = 1e-12) -> float:
    """Universal bound constant 2 + 2^mu * zeta(mu) for the sewing remainder.

    The zeta value is summed directly with an Euler-Maclaurin tail
    correction; terms are added until the first neglected correction,
    bounded via the integral test, drops below ``rel_tol`` relative to the
    partial sum.  Defined for mu > 1 only.
    """
    if not (mu > 1):
        raise ValueError(f"sewing constant requires mu > 1, got {mu}")
    total = 0.0
    k = 0
    while True:
        k += 1
        total += k**-mu
        # remaining tail after adding the integral and half-term corrections
        next_correction = mu * k ** (-mu - 1) / 12.0
        if next_correction < rel_tol * total and k >= 8:
            break
        if k > 5_000_000:
            break
    zeta = total + k ** (1 - mu) / (mu - 1) - 0.5 * k**-mu + mu * k ** (-mu - 1) / 12.0
    return 2.0 + 2.0**mu * zeta
