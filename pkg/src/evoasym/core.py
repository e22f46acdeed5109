"""State vectors, time grids, sampled curves and tail statistics.

Everything downstream works on finite samples of curves ``[0, inf) -> R^d``.
A :class:`SampledCurve` carries its own interpolation rule so that any two
consumers (means, defects, distances) see exactly the same function.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, InsufficientDataError, InvalidInputError

__all__ = [
    "Interpolation",
    "TimeGrid",
    "SampledCurve",
    "TailStats",
    "as_state",
    "norm",
    "shift_curve",
    "tail_stats",
    "integrate_curve",
    "write_table",
    "write_curve_csv",
    "read_curve_csv",
    "SNAP_RTOL",
]

# Query times closer than this (relative) to a grid point use the stored sample.
SNAP_RTOL = 1e-12


def _snap_tol(t):
    return SNAP_RTOL * np.maximum(1.0, np.abs(t))


class Interpolation(str, Enum):
    LINEAR = "piecewise-linear"
    CONSTANT = "piecewise-constant-left"


def as_state(x, dim: int | None = None) -> np.ndarray:
    """Validate ``x`` as a finite state vector and return a float64 copy."""
    arr = np.array(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"state vector must be 1-d and nonempty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"state vector has non-finite coordinates: {arr}")
    if dim is not None and arr.size != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {arr.size}")
    return arr


def norm(x) -> float:
    """Euclidean norm of a state vector."""
    return float(np.linalg.norm(as_state(x)))


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing, nonnegative sample times."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1)
        if pts.size == 0:
            raise InvalidInputError("time grid must be nonempty")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("time grid has non-finite points")
        if pts[0] < 0:
            raise InvalidInputError(f"time grid must start at t >= 0, got {pts[0]}")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise InvalidInputError("time grid must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, start: float, stop: float, step: float) -> "TimeGrid":
        """Grid ``start + k*step`` up to ``stop``; ``stop`` is always included."""
        if step <= 0:
            raise InvalidInputError(f"grid step must be positive, got {step}")
        if stop < start:
            raise InvalidInputError(f"grid stop {stop} precedes start {start}")
        n = int(math.floor((stop - start) / step + 1e-9))
        pts = start + step * np.arange(n + 1)
        if stop - pts[-1] > 1e-9 * step:
            pts = np.append(pts, stop)
        else:
            pts[-1] = stop
        return cls(pts)

    @property
    def start(self) -> float:
        return float(self.points[0])

    @property
    def stop(self) -> float:
        return float(self.points[-1])

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """A locally bounded curve known on a finite grid.

    Evaluation between grid points follows ``interpolation``; evaluation
    outside ``[grid.start, grid.stop]`` raises :class:`InvalidInputError`.
    Queries within ``SNAP_RTOL`` of a grid point return the stored sample
    exactly.
    """

    grid: TimeGrid
    values: np.ndarray
    interpolation: Interpolation = Interpolation.LINEAR

    def __post_init__(self):
        if not isinstance(self.grid, TimeGrid):
            object.__setattr__(self, "grid", TimeGrid(self.grid))
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.ndim != 2 or vals.shape[0] != len(self.grid):
            raise InvalidInputError(
                f"values shape {vals.shape} does not match grid of length {len(self.grid)}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("curve values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))

    @classmethod
    def from_function(cls, grid, f, interpolation=Interpolation.LINEAR) -> "SampledCurve":
        if not isinstance(grid, TimeGrid):
            grid = TimeGrid(grid)
        vals = np.array([np.atleast_1d(np.asarray(f(t), dtype=float)) for t in grid.points])
        return cls(grid, vals, interpolation)

    @classmethod
    def constant(cls, grid, value, interpolation=Interpolation.LINEAR) -> "SampledCurve":
        if not isinstance(grid, TimeGrid):
            grid = TimeGrid(grid)
        v = as_state(value)
        return cls(grid, np.tile(v, (len(grid), 1)), interpolation)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    @property
    def span(self) -> tuple[float, float]:
        return self.grid.start, self.grid.stop

    def covers(self, a: float, b: float) -> bool:
        lo, hi = self.span
        return a >= lo - _snap_tol(lo) and b <= hi + _snap_tol(hi)

    def _check_span(self, t: np.ndarray):
        lo, hi = self.span
        if np.any(t < lo - _snap_tol(lo)) or np.any(t > hi + _snap_tol(hi)):
            bad = t[(t < lo - _snap_tol(lo)) | (t > hi + _snap_tol(hi))][0]
            raise InvalidInputError(f"time {bad} outside curve span [{lo}, {hi}]")

    def _locate(self, t: np.ndarray):
        """Segment index ``i`` with ``t_i <= t < t_{i+1}`` and snapped grid index or -1."""
        pts = self.grid.points
        n = pts.size
        j = np.clip(np.searchsorted(pts, t), 0, n - 1)
        jm = np.clip(j - 1, 0, n - 1)
        near = np.where(np.abs(pts[jm] - t) < np.abs(pts[j] - t), jm, j)
        snapped = np.where(np.abs(pts[near] - t) <= _snap_tol(t), near, -1)
        i = np.clip(np.searchsorted(pts, t, side="right") - 1, 0, max(n - 2, 0))
        return i, snapped

    def snap(self, t) -> np.ndarray:
        """Replace query times that are within tolerance of a grid point by that point."""
        t = np.asarray(t, dtype=float)
        _, snapped = self._locate(np.atleast_1d(t))
        out = np.where(snapped >= 0, self.grid.points[np.maximum(snapped, 0)], np.atleast_1d(t))
        return out.reshape(t.shape)

    def evaluate(self, t) -> np.ndarray:
        """Values at the query times, shape ``(len(t), d)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        self._check_span(t)
        pts, vals = self.grid.points, self.values
        if pts.size == 1:
            return np.repeat(vals[:1], t.size, axis=0)
        i, snapped = self._locate(t)
        if self.interpolation is Interpolation.CONSTANT:
            out = vals[i].copy()
        else:
            w = ((t - pts[i]) / (pts[i + 1] - pts[i]))[:, None]
            out = (1.0 - w) * vals[i] + w * vals[i + 1]
        hit = snapped >= 0
        out[hit] = vals[snapped[hit]]
        return out

    def __call__(self, t) -> np.ndarray:
        if np.ndim(t) == 0:
            return self.evaluate(t)[0]
        return self.evaluate(t)

    @cached_property
    def _cumulative(self) -> np.ndarray:
        pts, vals = self.grid.points, self.values
        dt = np.diff(pts)[:, None]
        if self.interpolation is Interpolation.CONSTANT:
            seg = dt * vals[:-1]
        else:
            seg = dt * 0.5 * (vals[:-1] + vals[1:])
        out = np.zeros_like(vals)
        np.cumsum(seg, axis=0, out=out[1:])
        return out

    def antiderivative(self, x) -> np.ndarray:
        """``int_{grid.start}^x v`` at each query point, exact for the interpolation."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self._check_span(x)
        pts, vals, cum = self.grid.points, self.values, self._cumulative
        if pts.size == 1:
            return np.zeros((x.size, self.dim))
        i, snapped = self._locate(x)
        dx = (x - pts[i])[:, None]
        if self.interpolation is Interpolation.CONSTANT:
            out = cum[i] + dx * vals[i]
        else:
            w = dx / (pts[i + 1] - pts[i])[:, None]
            vx = (1.0 - w) * vals[i] + w * vals[i + 1]
            out = cum[i] + dx * 0.5 * (vals[i] + vx)
        hit = snapped >= 0
        out[hit] = cum[snapped[hit]]
        return out

    def with_values(self, values) -> "SampledCurve":
        return SampledCurve(self.grid, values, self.interpolation)


@dataclass(frozen=True)
class TailStats:
    window_start: float
    window_end: float
    inf_value: float
    sup_value: float
    count: int

    @property
    def oscillation(self) -> float:
        return self.sup_value - self.inf_value


def shift_curve(v: SampledCurve, h: float) -> SampledCurve:
    """The translated curve ``w(t) = v(t + h)``."""
    if h < 0:
        raise InvalidInputError(f"shift must be nonnegative, got {h}")
    if h == 0:
        return v
    lo, hi = v.span
    if h > hi + _snap_tol(hi):
        raise InvalidInputError(f"shift {h} exceeds curve span end {hi}")
    pts = v.grid.points
    keep = pts >= h - _snap_tol(h)
    new_t = pts[keep] - h
    new_v = v.values[keep]
    if abs(new_t[0]) <= _snap_tol(h):
        new_t[0] = 0.0
    elif h >= lo and new_t[0] > 0:
        new_t = np.concatenate([[0.0], new_t])
        new_v = np.vstack([v(h)[None, :], new_v])
    return SampledCurve(TimeGrid(new_t), new_v, v.interpolation)


def tail_stats(samples: Iterable[tuple[float, float]], window_start: float,
               window_end: float | None = None) -> TailStats:
    """Inf and sup of scalar samples whose time lies in the window."""
    arr = np.array(list(samples), dtype=float).reshape(-1, 2)
    t, y = arr[:, 0], arr[:, 1]
    mask = t >= window_start
    if window_end is not None:
        mask &= t <= window_end
    if mask.sum() < 2:
        raise InsufficientDataError(
            f"need at least 2 samples in window [{window_start}, {window_end}], got {int(mask.sum())}"
        )
    tt, yy = t[mask], y[mask]
    return TailStats(float(window_start), float(window_end if window_end is not None else tt[-1]),
                     float(yy.min()), float(yy.max()), int(mask.sum()))


def integrate_curve(v: SampledCurve, a: float, b: float) -> np.ndarray:
    """Exact integral of the interpolated curve over ``[a, b]``."""
    if not (0 <= a <= b):
        raise InvalidInputError(f"need 0 <= a <= b, got a={a}, b={b}")
    if not v.covers(a, b):
        raise InvalidInputError(f"[{a}, {b}] not inside curve span {v.span}")
    if a == b:
        return np.zeros(v.dim)
    F = v.antiderivative([a, b])
    return F[1] - F[0]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_table(path, header: Sequence[str], rows, comments: Sequence[str] = ()) -> None:
    """Write a CSV table with optional ``#`` comment lines above the header."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) if isinstance(x, (float, int, np.floating, np.integer))
                    and not isinstance(x, bool) else x for x in row])
    Path(path).write_text(buf.getvalue())


def write_curve_csv(curve: SampledCurve, path, comments: Sequence[str] = ()) -> None:
    header = ["t"] + [f"x{i}" for i in range(curve.dim)]
    rows = (np.concatenate([[t], v]) for t, v in zip(curve.times, curve.values))
    write_table(path, header, ([float(x) for x in r] for r in rows), comments)


def read_curve_csv(path, interpolation=Interpolation.LINEAR) -> SampledCurve:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    if not header or header[0] != "t":
        raise InvalidInputError(f"{path}: expected header starting with 't', got {header}")
    data = np.array([[float(x) for x in row] for row in reader], dtype=float)
    if data.size == 0:
        raise InvalidInputError(f"{path}: no data rows")
    return SampledCurve(TimeGrid(data[:, 0]), data[:, 1:], interpolation)
