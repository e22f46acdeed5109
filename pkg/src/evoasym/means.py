"""Time-indexed probability measures and the means they induce.

Every supported density is piecewise constant with explicit breakpoints and
every curve is piecewise linear or piecewise constant, so all integrals are
evaluated exactly through the curve antiderivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .asymptotics import defect_profile, h_grid, is_almost_orbit
from .core import Interpolation, SampledCurve, TimeGrid, write_table
from .errors import InsufficientDataError, InvalidInputError
from .systems import EvolutionSystem

__all__ = [
    "MeasureKind",
    "MeasureFamily",
    "MeanTrace",
    "MassTable",
    "AlmostConvergenceProfile",
    "HypothesisVerdict",
    "HypothesisReport",
    "block_alpha",
    "block_indicator_curve",
    "mean",
    "shifted_mean",
    "mean_trace",
    "average_inheritance_trace",
    "almost_convergence_profile",
    "vanishing_mass_check",
    "hypothesis_h_falsify",
    "hypothesis_hu_falsify",
]


class MeasureKind(str, Enum):
    DIRAC = "dirac"
    CESARO = "cesaro"
    WINDOW = "window"
    BLOCK = "block"


def block_alpha(t):
    """``alpha(t) = |[0,t] intersected with the union of [2k, 2k+1)|``."""
    t = np.asarray(t, dtype=float)
    k = np.floor(t / 2.0)
    out = k + np.minimum(t - 2.0 * k, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MeasureFamily:
    """A family ``t -> mu_t``; ``width`` is used by the window kind only."""

    kind: MeasureKind
    width: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MeasureKind(self.kind))
        if self.kind is MeasureKind.WINDOW:
            if self.width is None or not self.width > 0:
                raise InvalidInputError("window family needs width > 0")
            object.__setattr__(self, "width", float(self.width))
        elif self.width is not None:
            raise InvalidInputError(f"{self.kind.value} family takes no width")

    @classmethod
    def dirac(cls):
        return cls(MeasureKind.DIRAC)

    @classmethod
    def cesaro(cls):
        return cls(MeasureKind.CESARO)

    @classmethod
    def window(cls, width: float):
        return cls(MeasureKind.WINDOW, width)

    @classmethod
    def block(cls):
        return cls(MeasureKind.BLOCK)

    def pieces(self, t: float):
        """``(a, b, normaliser)``: density ``1/normaliser`` on each ``[a_i, b_i]``."""
        if self.kind is MeasureKind.DIRAC:
            raise InvalidInputError("dirac family has no density")
        if not t > 0:
            raise InvalidInputError(f"{self.kind.value} measure needs t > 0, got {t}")
        t = float(t)
        if self.kind is MeasureKind.CESARO:
            return np.array([0.0]), np.array([t]), t
        if self.kind is MeasureKind.WINDOW:
            lo = max(0.0, t - self.width)
            return np.array([lo]), np.array([t]), t - lo
        # block: integer breakpoints, so nothing straddles a block edge
        a = np.arange(0.0, t, 2.0)
        b = np.minimum(a + 1.0, t)
        return a, b, float(np.sum(b - a))

    def mass(self, p: float, t: float) -> float:
        """``mu_t([0, p])`` in closed form."""
        if self.kind is MeasureKind.DIRAC:
            return 1.0 if t <= p else 0.0
        if not t > 0:
            raise InvalidInputError(f"{self.kind.value} measure needs t > 0, got {t}")
        if self.kind is MeasureKind.CESARO:
            return min(p, t) / t
        if self.kind is MeasureKind.WINDOW:
            lo = max(0.0, t - self.width)
            return max(0.0, min(p, t) - lo) / (t - lo)
        return block_alpha(min(p, t)) / block_alpha(t)

    def __str__(self):
        return self.kind.value if self.width is None else f"{self.kind.value}(w={self.width:g})"


def block_indicator_curve(t_max: float) -> SampledCurve:
    """``n(xi) = sum_k chi_[2k, 2k+1)(xi)`` on ``[0, ceil(t_max)]``."""
    n = int(np.ceil(t_max))
    if n < 1:
        raise InvalidInputError("t_max must be positive")
    grid = TimeGrid(np.arange(n + 1, dtype=float))
    vals = (np.arange(n + 1) % 2 == 0).astype(float)[:, None]
    return SampledCurve(grid, vals, Interpolation.CONSTANT)


def _integral(fam: MeasureFamily, v: SampledCurve, t: float, offset: float, lo: float) -> np.ndarray:
    """``int_{eta >= lo} v(eta + offset) dmu_t(eta)``."""
    if fam.kind is MeasureKind.DIRAC:
        if t < lo:
            return np.zeros(v.dim)
        return v(t + offset)
    a, b, norm = fam.pieces(t)
    a = np.maximum(a, lo)
    keep = b > a
    a, b = a[keep], b[keep]
    if a.size == 0:
        return np.zeros(v.dim)
    if not v.covers(a[0] + offset, b[-1] + offset):
        raise InvalidInputError(
            f"measure support [{a[0] + offset}, {b[-1] + offset}] exceeds curve span {v.span}"
        )
    F = v.antiderivative
    return np.sum(F(b + offset) - F(a + offset), axis=0) / norm


def shifted_mean(fam: MeasureFamily, v: SampledCurve, t: float, h: float) -> np.ndarray:
    """``mu_t(v_h) = int v(h + xi) dmu_t(xi)``."""
    if h < 0:
        raise InvalidInputError("shift h must be nonnegative")
    return _integral(fam, v, float(t), float(h), 0.0)


def mean(fam: MeasureFamily, v: SampledCurve, t: float) -> np.ndarray:
    """``mu_t(v) = int v dmu_t``; for the Dirac family this is ``v(t)``."""
    return shifted_mean(fam, v, t, 0.0)


@dataclass
class MeanTrace:
    times: np.ndarray
    values: np.ndarray
    shifts: np.ndarray | None = None
    shifted: np.ndarray | None = None
    cauchy_spread: float | None = None
    cauchy_ok: bool | None = None

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        header = ["t"] + [f"m{i}" for i in range(self.values.shape[1])]
        rows = (np.concatenate([[t], m]) for t, m in zip(self.times, self.values))
        write_table(path, header, rows, comments)


def mean_trace(fam: MeasureFamily, v: SampledCurve, t_grid, h_list=None) -> MeanTrace:
    ts = np.asarray(getattr(t_grid, "points", t_grid), dtype=float).reshape(-1)
    vals = np.array([mean(fam, v, t) for t in ts])
    if h_list is None:
        return MeanTrace(ts, vals)
    hs = np.asarray(h_list, dtype=float).reshape(-1)
    sh = np.array([[shifted_mean(fam, v, t, h) for h in hs] for t in ts])
    return MeanTrace(ts, vals, hs, sh)


def average_inheritance_trace(fam: MeasureFamily, sys: EvolutionSystem, u: SampledCurve, t_grid,
                              H: float, h_res: float, tol: float, tail_start: float) -> MeanTrace:
    """Trace of ``mu_t(u)`` for an almost-orbit ``u`` of ``sys``.

    The almost-orbit precondition is checked here with ``defect_profile`` on
    the tail points of ``t_grid`` that leave room for the horizon ``H``. The
    Cauchy diagnostic is the largest pairwise distance between tail means.
    """
    ts = np.asarray(getattr(t_grid, "points", t_grid), dtype=float).reshape(-1)
    dts = ts[(ts >= tail_start) & (ts + H <= u.span[1])]
    if dts.size < 3:
        raise InsufficientDataError("need >= 3 tail times with t + H inside the curve span")
    verdict = is_almost_orbit(defect_profile(u, sys, dts, H, h_res), tol, tail_start)
    if not verdict.ok:
        raise InvalidInputError(
            f"curve is not an almost-orbit at tol={tol} (max tail defect {verdict.max_tail:.3e})"
        )
    trace = mean_trace(fam, u, ts)
    tail = trace.values[ts >= tail_start]
    if tail.shape[0] >= 2:
        diff = tail[:, None, :] - tail[None, :, :]
        trace.cauchy_spread = float(np.max(np.linalg.norm(diff, axis=2)))
        trace.cauchy_ok = trace.cauchy_spread <= tol
    return trace


@dataclass
class AlmostConvergenceProfile:
    candidate_limit: np.ndarray
    times: np.ndarray
    deviation: np.ndarray
    H_max: float
    h_res: float
    supported: bool | None = None

    def samples(self) -> list[tuple[float, float]]:
        return [(float(t), float(d)) for t, d in zip(self.times, self.deviation)]

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        comments = [f"H_max={self.H_max!r} h_res={self.h_res!r}", *comments]
        write_table(path, ["t", "deviation"], zip(self.times, self.deviation), comments)


def almost_convergence_profile(fam: MeasureFamily, v: SampledCurve, t_grid, H_max: float,
                               h_res: float, tol: float | None = None,
                               tail_start: float | None = None) -> AlmostConvergenceProfile:
    """``max_h |mu_t(v_h) - L|`` over ``h`` in ``grid(0..H_max)``, ``L = mu_T(v)``.

    When ``tol`` and ``tail_start`` are given, ``supported`` is true iff every
    tail deviation is at most ``tol``.
    """
    ts = np.asarray(getattr(t_grid, "points", t_grid), dtype=float).reshape(-1)
    if ts.size == 0:
        raise InvalidInputError("empty t_grid")
    hs = h_grid(H_max, h_res)
    L = mean(fam, v, ts.max())
    dev = np.array([
        max(float(np.linalg.norm(shifted_mean(fam, v, t, h) - L)) for h in hs) for t in ts
    ])
    prof = AlmostConvergenceProfile(L, ts, dev, float(H_max), float(h_res))
    if tol is not None and tail_start is not None:
        tail = dev[ts >= tail_start]
        if tail.size == 0:
            raise InsufficientDataError(f"no t >= {tail_start} in t_grid")
        prof.supported = bool(np.all(tail <= tol))
    return prof


@dataclass
class MassTable:
    p_values: np.ndarray
    t_values: np.ndarray
    masses: np.ndarray  # masses[i, j] = mu_{t_j}([0, p_i])

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        rows = ((p, t, self.masses[i, j]) for i, p in enumerate(self.p_values)
                for j, t in enumerate(self.t_values))
        write_table(path, ["p", "t", "mass"], rows, comments)


def vanishing_mass_check(fam: MeasureFamily, p_list, t_list) -> MassTable:
    ps = np.asarray(p_list, dtype=float).reshape(-1)
    ts = np.asarray(t_list, dtype=float).reshape(-1)
    m = np.array([[fam.mass(p, t) for t in ts] for p in ps])
    return MassTable(ps, ts, m)


class HypothesisVerdict(str, Enum):
    VIOLATED = "violated"
    CONSISTENT = "consistent"
    INCONCLUSIVE = "inconclusive"


@dataclass
class HypothesisReport:
    """Falsification attempt; ``consistent`` never proves the hypothesis."""

    name: str
    times: np.ndarray
    K_values: np.ndarray
    means: np.ndarray          # (m, d) unshifted mu_t(g)
    shifted: np.ndarray        # (m, nK, d) int g(xi) dmu_t(xi + K)
    deviations: np.ndarray     # (m, nK)
    limit: np.ndarray
    cauchy_spread: float
    tail_start: float
    tol: float
    verdict: HypothesisVerdict

    @property
    def max_deviation(self) -> np.ndarray:
        return self.deviations.max(axis=1)

    def summary(self) -> str:
        return (f"{self.name}: verdict={self.verdict.value} tol={self.tol!r} "
                f"tail=[{self.tail_start!r}, {float(self.times.max())!r}] cauchy_spread={self.cauchy_spread:.3e}")

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        rows = ((t, K, self.deviations[i, j]) for i, t in enumerate(self.times)
                for j, K in enumerate(self.K_values))
        write_table(path, ["t", "K", "deviation"], rows, [*comments, self.summary()])


def _shift_integral(fam: MeasureFamily, g: SampledCurve, t: float, K: float) -> np.ndarray:
    # int_0^inf g(xi) dmu_t(xi + K) = int_{eta >= K} g(eta - K) dmu_t(eta)
    return _integral(fam, g, t, -K, K)


def _falsify(name, fam, g, K_values, t_list, tol, reduce_max: bool) -> HypothesisReport:
    ts = np.sort(np.asarray(t_list, dtype=float).reshape(-1))
    Ks = np.asarray(K_values, dtype=float).reshape(-1)
    if ts.size == 0 or Ks.size == 0:
        raise InvalidInputError("t_list and K values must be nonempty")
    if np.any(Ks < 0):
        raise InvalidInputError("shifts K must be nonnegative")
    means = np.array([mean(fam, g, t) for t in ts])
    shifted = np.array([[_shift_integral(fam, g, t, K) for K in Ks] for t in ts])
    L = means[-1]
    dev = np.linalg.norm(shifted - L[None, None, :], axis=2)
    # tail and Cauchy diagnostic: the top decade of t values
    tail_start = ts[-1] / 10.0
    tail = ts >= tail_start
    tm = means[tail]
    spread = float(np.max(np.linalg.norm(tm[:, None, :] - tm[None, :, :], axis=2)))
    if tail.sum() < 2 or spread > tol:
        verdict = HypothesisVerdict.INCONCLUSIVE
    else:
        td = dev[tail]
        if reduce_max:
            stays_above = np.all(td.max(axis=1) > tol)
        else:
            stays_above = np.any(np.all(td > tol, axis=0))
        verdict = HypothesisVerdict.VIOLATED if stays_above else HypothesisVerdict.CONSISTENT
    return HypothesisReport(name, ts, Ks, means, shifted, dev, L, spread, float(tail_start),
                            float(tol), verdict)


def hypothesis_h_falsify(fam: MeasureFamily, g: SampledCurve, K_list, t_list, tol: float) -> HypothesisReport:
    """Look for a shift ``K`` whose shifted integrals stay away from ``L``.

    ``L`` is the mean at the largest ``t``; if the means spread by more than
    ``tol`` over the top decade of ``t_list`` the verdict is inconclusive.
    Violated means some ``K`` keeps its deviation above ``tol`` at every tail
    time.
    """
    return _falsify("H", fam, g, K_list, t_list, tol, reduce_max=False)


def hypothesis_hu_falsify(fam: MeasureFamily, g: SampledCurve, K: float, k_res: float, t_list,
                          tol: float) -> HypothesisReport:
    """Uniform variant: the deviation at each ``t`` is the max over ``k`` in ``grid(0..K)``."""
    if K < 0:
        raise InvalidInputError("K must be nonnegative")
    ks = np.array([0.0]) if K == 0 else h_grid(K, k_res)
    return _falsify("H_u", fam, g, ks, t_list, tol, reduce_max=True)
