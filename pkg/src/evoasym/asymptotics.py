"""Almost-orbit defects and the asymptotic checks built on them.

The supremum over ``h >= 0`` in the almost-orbit defect is truncated to a
grid on ``[0, H]``; ``H`` and the grid resolution are mandatory arguments
and are stored on every profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import SampledCurve, TimeGrid, as_state, tail_stats, write_table
from .errors import DimensionMismatchError, InsufficientDataError, InvalidInputError
from .operators import Forcing
from .systems import EvolutionSystem, SCESProfile, orbit

__all__ = [
    "DefectProfile",
    "AlmostOrbitVerdict",
    "AAEVerdict",
    "AAEReport",
    "ASPClass",
    "ASPReport",
    "DistanceCheck",
    "Prop21Result",
    "OmegaTrace",
    "h_grid",
    "defect_profile",
    "is_almost_orbit",
    "aae_check",
    "perturb_to_almost_orbit",
    "asp_scan",
    "asp_midpoint_test",
    "sces_consequence_check",
    "prop21_inequality_check",
    "cluster_points",
    "omega_invariance_check",
    "modulus_of_continuity",
]

STATIONARY_TOL = 1e-12
TREND_SLACK = 0.1
PROP21_SLACK = 1e-6


def h_grid(H: float, h_res: float) -> np.ndarray:
    """Shifts ``0, h_res, 2 h_res, ..., H`` (``H`` always included)."""
    if not H > 0:
        raise InvalidInputError(f"horizon H must be positive, got {H}")
    if not h_res > 0:
        raise InvalidInputError(f"h_res must be positive, got {h_res}")
    return TimeGrid.uniform(0.0, H, h_res).points


def _times(t_grid) -> np.ndarray:
    pts = t_grid.points if isinstance(t_grid, TimeGrid) else np.asarray(t_grid, dtype=float)
    pts = np.atleast_1d(pts).astype(float)
    if pts.size == 0 or np.any(np.diff(pts) <= 0) or pts[0] < 0:
        raise InvalidInputError("t_grid must be nonempty, nonnegative and strictly increasing")
    return pts


@dataclass
class DefectProfile:
    """``psi(t) = max_{h in grid(0..H)} |u(t+h) - U(t+h,t) u(t)|``."""

    times: np.ndarray
    values: np.ndarray
    argmax_h: np.ndarray
    horizon: float
    h_res: float

    def samples(self) -> list[tuple[float, float]]:
        return [(float(t), float(v)) for t, v in zip(self.times, self.values)]

    def at(self, t: float) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(t)
        return float(self.values[i])

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        comments = [f"H={self.horizon!r} h_res={self.h_res!r}", *comments]
        write_table(path, ["t", "psi"], zip(self.times, self.values), comments)


def defect_profile(u: SampledCurve, sys: EvolutionSystem, t_grid, H: float,
                   h_res: float) -> DefectProfile:
    """Almost-orbit defect of ``u`` with respect to ``sys`` on ``t_grid``."""
    ts = _times(t_grid)
    hs = h_grid(H, h_res)
    if sys.dimension is not None and u.dim != sys.dimension:
        raise DimensionMismatchError(f"curve dimension {u.dim} != system dimension {sys.dimension}")
    if not u.covers(ts[0], ts[-1] + hs[-1]):
        raise InvalidInputError(
            f"curve span {u.span} does not cover [{ts[0]}, {ts[-1] + hs[-1]}] needed for H={H}"
        )
    vals = np.empty(ts.size)
    arg = np.empty(ts.size)
    for i, t in enumerate(ts):
        t0 = float(u.snap(t))
        query = u.snap(t0 + hs)
        moved = sys.transport(t0, u(t0), query)
        gaps = np.linalg.norm(u.evaluate(query) - moved, axis=1)
        j = int(np.argmax(gaps))  # first maximiser: ties go to the smallest h
        vals[i], arg[i] = gaps[j], hs[j]
    return DefectProfile(ts, vals, arg, float(H), float(h_res))


@dataclass(frozen=True)
class AlmostOrbitVerdict:
    ok: bool
    below_tol: bool
    nonincreasing: bool
    max_tail: float
    worst_increase: float
    slope: float
    n_tail: int
    tol: float
    tail_start: float


def _decay_verdict(times, values, tol, tail_start) -> AlmostOrbitVerdict:
    mask = times >= tail_start
    if mask.sum() < 3:
        raise InsufficientDataError(f"need >= 3 samples at t >= {tail_start}, got {int(mask.sum())}")
    tt, vv = times[mask], values[mask]
    inc = float(np.max(np.diff(vv)))
    below = bool(np.all(vv <= tol))
    # Decay test: no step-to-step increase beyond 10% of the tolerance.
    nonincr = inc <= TREND_SLACK * tol
    slope = float(np.polyfit(tt, vv, 1)[0])
    return AlmostOrbitVerdict(below and nonincr, below, nonincr, float(vv.max()), inc, slope,
                              int(mask.sum()), float(tol), float(tail_start))


def is_almost_orbit(profile: DefectProfile, tol: float, tail_start: float) -> AlmostOrbitVerdict:
    """Tail values all ``<= tol`` and no tail increase above ``0.1 * tol``."""
    return _decay_verdict(profile.times, profile.values, tol, tail_start)


class AAEVerdict(str, Enum):
    SUPPORTED = "aae-supported"
    FORWARD_ONLY = "forward-only"
    BACKWARD_ONLY = "backward-only"
    UNSUPPORTED = "unsupported"


@dataclass
class AAEReport:
    """``forward``: orbits of V as almost-orbits of U; ``backward``: the reverse."""

    forward: DefectProfile
    backward: DefectProfile
    forward_check: AlmostOrbitVerdict
    backward_check: AlmostOrbitVerdict
    verdict: AAEVerdict
    tol: float
    tail_start: float

    def summary(self) -> str:
        lines = [
            f"verdict: {self.verdict.value}",
            f"tol: {self.tol!r}  tail_start: {self.tail_start!r}",
            f"H: {self.forward.horizon!r}  h_res: {self.forward.h_res!r}",
        ]
        for name, chk in (("forward", self.forward_check), ("backward", self.backward_check)):
            lines.append(
                f"{name}: ok={chk.ok} max_tail={chk.max_tail:.6e} "
                f"worst_increase={chk.worst_increase:.6e} slope={chk.slope:.6e}"
            )
        return "\n".join(lines) + "\n"

    def write(self, directory, stem: str, comments: Sequence[str] = ()) -> list[Path]:
        d = Path(directory)
        paths = [d / f"{stem}.forward.csv", d / f"{stem}.backward.csv", d / f"{stem}.txt"]
        self.forward.to_csv(paths[0], comments)
        self.backward.to_csv(paths[1], comments)
        paths[2].write_text(self.summary())
        return paths


def _dedupe(times: np.ndarray) -> np.ndarray:
    times = np.sort(times)
    keep = np.ones(times.size, bool)
    keep[1:] = np.diff(times) > 1e-12 * np.maximum(1.0, times[1:])
    return times[keep]


def _max_profile(profiles: list[DefectProfile]) -> DefectProfile:
    stack = np.vstack([p.values for p in profiles])
    which = np.argmax(stack, axis=0)
    args = np.vstack([p.argmax_h for p in profiles])[which, np.arange(stack.shape[1])]
    p0 = profiles[0]
    return DefectProfile(p0.times, stack.max(axis=0), args, p0.horizon, p0.h_res)


def aae_check(U: EvolutionSystem, V: EvolutionSystem, seeds, t_grid, H: float, h_res: float,
              tol: float, tail_start: float) -> AAEReport:
    """Test whether orbits of each system are almost-orbits of the other.

    Orbits are sampled exactly at every time the defect needs, so no
    interpolation error enters the profiles.
    """
    if U.dimension is not None and V.dimension is not None and U.dimension != V.dimension:
        raise DimensionMismatchError(f"systems have dimensions {U.dimension} and {V.dimension}")
    ts = _times(t_grid)
    hs = h_grid(H, h_res)
    if not seeds:
        raise InvalidInputError("aae_check needs at least one seed")

    def direction(cand: EvolutionSystem, ref: EvolutionSystem) -> DefectProfile:
        profiles = []
        for t0, x0 in seeds:
            if ts[0] < t0:
                raise InvalidInputError(f"t_grid starts before seed time {t0}")
            grid = TimeGrid(_dedupe((ts[:, None] + hs[None, :]).ravel()))
            u = orbit(cand, float(t0), as_state(x0, cand.dimension or ref.dimension), grid)
            profiles.append(defect_profile(u, ref, ts, H, h_res))
        return _max_profile(profiles)

    fwd = direction(V, U)
    bwd = direction(U, V)
    fc = is_almost_orbit(fwd, tol, tail_start)
    bc = is_almost_orbit(bwd, tol, tail_start)
    verdict = {
        (True, True): AAEVerdict.SUPPORTED,
        (True, False): AAEVerdict.FORWARD_ONLY,
        (False, True): AAEVerdict.BACKWARD_ONLY,
        (False, False): AAEVerdict.UNSUPPORTED,
    }[(fc.ok, bc.ok)]
    return AAEReport(fwd, bwd, fc, bc, verdict, float(tol), float(tail_start))


def perturb_to_almost_orbit(u: SampledCurve, perturbation) -> SampledCurve:
    """``v(t) = u(t) + p(t)`` on the grid of ``u``.

    ``perturbation`` is a :class:`Forcing` (zero, power decay or a sampled
    curve) or a :class:`SampledCurve`.
    """
    if isinstance(perturbation, SampledCurve):
        perturbation = Forcing.custom(perturbation, l1_integrable=False)
    if perturbation.dim is not None and perturbation.dim != u.dim:
        raise DimensionMismatchError(f"perturbation dimension {perturbation.dim} != curve dimension {u.dim}")
    if perturbation.curve is not None and not perturbation.curve.covers(*u.span):
        raise InvalidInputError(f"perturbation span {perturbation.curve.span} does not cover {u.span}")
    return u.with_values(u.values + perturbation.sample(u.times))


class ASPClass(str, Enum):
    STATIONARY = "stationary"
    ALMOST_STATIONARY = "almost-stationary"
    NEITHER = "neither"


@dataclass
class ASPReport:
    point: np.ndarray
    defect_at: list[tuple[float, float]]
    classification: ASPClass
    decay: AlmostOrbitVerdict

    @property
    def is_stationary(self) -> bool:
        return self.classification is ASPClass.STATIONARY

    @property
    def is_almost_stationary(self) -> bool:
        return self.classification is not ASPClass.NEITHER


def _point_defects(sys: EvolutionSystem, x: np.ndarray, ts: np.ndarray, hs: np.ndarray) -> np.ndarray:
    out = np.empty(ts.size)
    for i, t in enumerate(ts):
        moved = sys.transport(float(t), x, t + hs)
        out[i] = float(np.max(np.linalg.norm(moved - x, axis=1)))
    return out


def asp_scan(sys: EvolutionSystem, points, t_grid, H: float, h_res: float, tol: float,
             tail_start: float) -> list[ASPReport]:
    """Classify each point as stationary, almost-stationary or neither.

    Stationary means the defect ``max_h |U(t+h,t)x - x|`` is ``<= 1e-12`` at
    every ``t`` in ``t_grid``; almost-stationary means it passes the same
    decay test as :func:`is_almost_orbit` on ``t >= tail_start``.
    """
    ts = _times(t_grid)
    hs = h_grid(H, h_res)
    reports = []
    for p in points:
        x = as_state(p, sys.dimension)
        d = _point_defects(sys, x, ts, hs)
        decay = _decay_verdict(ts, d, tol, tail_start)
        if np.all(d <= STATIONARY_TOL):
            cls = ASPClass.STATIONARY
        elif decay.ok:
            cls = ASPClass.ALMOST_STATIONARY
        else:
            cls = ASPClass.NEITHER
        reports.append(ASPReport(x, [(float(t), float(v)) for t, v in zip(ts, d)], cls, decay))
    return reports


def asp_midpoint_test(sys: EvolutionSystem, x1, x2, lambdas, t_grid, H: float, h_res: float,
                      tol: float, tail_start: float) -> bool:
    """Whether every ``lam*x1 + (1-lam)*x2`` is almost-stationary."""
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    if lam.size == 0 or np.any((lam < 0) | (lam > 1)):
        raise InvalidInputError("lambdas must be a nonempty list in [0, 1]")
    x1, x2 = as_state(x1, sys.dimension), as_state(x2, sys.dimension)
    if x1.size != x2.size:
        raise DimensionMismatchError("endpoints differ in dimension")
    ends = asp_scan(sys, [x1, x2], t_grid, H, h_res, tol, tail_start)
    if not all(r.is_almost_stationary for r in ends):
        raise InvalidInputError("endpoints are not both almost-stationary at these thresholds")
    mids = asp_scan(sys, [l * x1 + (1 - l) * x2 for l in lam], t_grid, H, h_res, tol, tail_start)
    return all(r.is_almost_stationary for r in mids)


@dataclass
class DistanceCheck:
    ok: bool
    times: np.ndarray
    distances: np.ndarray
    tail_start: float
    tol: float

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        write_table(path, ["t", "distance"], zip(self.times, self.distances), comments)


def _distance_trace(u1: SampledCurve, u2: SampledCurve, lo: float = -np.inf, hi: float = np.inf):
    if u1.dim != u2.dim:
        raise DimensionMismatchError(f"curves have dimensions {u1.dim} and {u2.dim}")
    a = max(u1.span[0], u2.span[0], lo)
    b = min(u1.span[1], u2.span[1], hi)
    if a > b:
        raise InsufficientDataError("curves do not overlap on the requested window")
    ts = _dedupe(np.concatenate([u1.times, u2.times]))
    ts = ts[(ts >= a) & (ts <= b)]
    return ts, np.linalg.norm(u1.evaluate(ts) - u2.evaluate(ts), axis=1)


def sces_consequence_check(sces: SCESProfile, u1: SampledCurve, u2: SampledCurve,
                           tail_start: float, tol: float,
                           verdicts: tuple[AlmostOrbitVerdict, AlmostOrbitVerdict]) -> DistanceCheck:
    """``|u1(t) - u2(t)| <= tol`` for all sampled ``t >= tail_start``.

    ``verdicts`` are the :func:`is_almost_orbit` results for ``u1`` and
    ``u2``; both must pass, and ``sces`` must look strongly contracting.
    """
    if not sces.sces_plausible:
        raise InvalidInputError("system is not profiled as strongly contracting")
    if not all(v.ok for v in verdicts):
        raise InvalidInputError("both curves must pass is_almost_orbit")
    ts, dist = _distance_trace(u1, u2)
    tail = dist[ts >= tail_start]
    if tail.size == 0:
        raise InsufficientDataError(f"no samples at t >= {tail_start}")
    return DistanceCheck(bool(np.all(tail <= tol)), ts, dist, float(tail_start), float(tol))


@dataclass(frozen=True)
class Prop21Result:
    ok: bool
    sup: float
    inf: float
    oscillation: float
    window: tuple[float, float]
    M: float


def prop21_inequality_check(u1: SampledCurve, u2: SampledCurve, M: float, tail_start: float,
                            tail_end: float | None = None) -> Prop21Result:
    """Finite-window form of ``limsup |u1-u2| <= M liminf |u1-u2|``.

    Passes when the window sup is at most ``M`` times the window inf plus
    ``1e-6``. The oscillation ``sup - inf`` is reported as well; for
    contracting systems it should be small.
    """
    if M < 0:
        raise InvalidInputError("M must be nonnegative")
    ts, dist = _distance_trace(u1, u2, tail_start, np.inf if tail_end is None else tail_end)
    st = tail_stats(zip(ts, dist), tail_start, tail_end)
    ok = st.sup_value <= M * st.inf_value + PROP21_SLACK
    return Prop21Result(bool(ok), st.sup_value, st.inf_value, st.oscillation,
                        (st.window_start, st.window_end), float(M))


def cluster_points(u: SampledCurve, tail_start: float, eps: float) -> list[np.ndarray]:
    """Leader clustering of tail samples in sample order.

    A sample farther than ``eps`` from every existing centre becomes a new
    centre. Deterministic given the curve.
    """
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    mask = u.times >= tail_start
    if mask.sum() < 10:
        raise InsufficientDataError(f"need >= 10 tail samples, got {int(mask.sum())}")
    centres: list[np.ndarray] = []
    for x in u.values[mask]:
        if centres and np.min(np.linalg.norm(np.asarray(centres) - x, axis=1)) <= eps:
            continue
        centres.append(x.copy())
    return centres


@dataclass
class OmegaTrace:
    s: np.ndarray
    t: np.ndarray
    transported: np.ndarray
    fixed: np.ndarray | None

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        fixed = self.fixed if self.fixed is not None else np.full(self.s.size, np.nan)
        rows = ((i, s, t, a, b) for i, (s, t, a, b)
                in enumerate(zip(self.s, self.t, self.transported, fixed)))
        write_table(path, ["n", "s", "t", "transported", "fixed"], rows, comments)


def omega_invariance_check(sys: EvolutionSystem, u: SampledCurve, x_star, s_times,
                           gap_growth: bool, tol: float) -> OmegaTrace:
    """Traces ``|U(t_n,s_n) u(s_n) - x*|`` and ``|U(t_n,s_n) x* - x*|``.

    ``t_n = s_{n + phi(n)}`` with ``phi(n) = n + 1`` (0-based, so the gaps
    grow) when ``gap_growth``, otherwise ``phi(n) = 1``. The second trace is
    only computed for systems with a Lipschitz claim.
    """
    x_star = as_state(x_star, u.dim)
    s = np.asarray(s_times, dtype=float).reshape(-1)
    if s.size < 2 or np.any(np.diff(s) <= 0):
        raise InvalidInputError("s_times must be strictly increasing with >= 2 entries")
    if np.linalg.norm(u(s[-1]) - x_star) > tol:
        raise InvalidInputError(f"u(s_n) does not approach x_star within tol={tol}")
    idx_s, idx_t = [], []
    for n in range(s.size):
        m = n + (n + 1 if gap_growth else 1)
        if m >= s.size:
            break
        idx_s.append(n)
        idx_t.append(m)
    if not idx_s:
        raise InsufficientDataError("s_times too short to build any (s_n, t_n) pair")
    ss, tt = s[idx_s], s[idx_t]
    tr = np.array([np.linalg.norm(sys.evolve(t, a, u(a)) - x_star) for a, t in zip(ss, tt)])
    fixed = None
    if sys.claimed_M is not None:
        fixed = np.array([np.linalg.norm(sys.evolve(t, a, x_star) - x_star) for a, t in zip(ss, tt)])
    return OmegaTrace(ss, tt, tr, fixed)


def modulus_of_continuity(u: SampledCurve, delta_list, tail_start: float) -> list[tuple[float, float]]:
    """``sup |u(t) - u(s)|`` over tail grid pairs with ``|t - s| <= delta``."""
    deltas = np.asarray(delta_list, dtype=float).reshape(-1)
    if deltas.size == 0 or np.any(deltas <= 0):
        raise InvalidInputError("deltas must be positive")
    mask = u.times >= tail_start
    ts, vs = u.times[mask], u.values[mask]
    if ts.size < 2:
        raise InsufficientDataError(f"need >= 2 samples at t >= {tail_start}")
    if np.max(np.diff(ts)) > deltas.min() * (1 + 1e-12):
        raise InvalidInputError(
            f"grid spacing {np.max(np.diff(ts)):.3g} coarser than smallest delta {deltas.min():.3g}"
        )
    dmax = deltas.max()
    best = np.zeros(deltas.size)
    for k in range(1, ts.size):
        gap = ts[k:] - ts[:-k]
        ok = gap <= dmax * (1 + 1e-12)
        if not ok.any():
            break
        dist = np.linalg.norm(vs[k:] - vs[:-k], axis=1)
        for j, dl in enumerate(deltas):
            sel = gap <= dl * (1 + 1e-12)
            if sel.any():
                best[j] = max(best[j], float(dist[sel].max()))
    return [(float(d), float(m)) for d, m in zip(deltas, best)]
