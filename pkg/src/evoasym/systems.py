"""Evolution systems ``U(t, s)`` on R^d.

Three families are provided:

* closed-form systems (exact formulas, used as oracles);
* implicit-Euler flows of ``-u' in A u + f(t)`` on an absolute grid
  ``k * h_int``;
* products of resolvents ``(I + lam_n A)^{-1}`` switched on at the partial
  sums ``sigma_n`` of a step sequence.

Flows and products are both "stepped": ``U(t, s)`` applies the steps whose
switching times lie in ``(s, t]``. Because the step sequence depends only on
absolute time, ``U(t, s) U(s, r) x`` and ``U(t, r) x`` execute the very same
floating-point operations, so the evolution law holds bitwise.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .core import Interpolation, SampledCurve, TimeGrid, as_state
from .errors import DimensionMismatchError, InvalidInputError
from .operators import Forcing, OperatorSpec, affine_parts, resolvent_map

__all__ = [
    "EvolutionSystem",
    "ClosedFormSystem",
    "FlowSystem",
    "ProductSystem",
    "StepSequence",
    "ProductSystemSpec",
    "SCESProfile",
    "make_flow_system",
    "make_exponential_system",
    "make_product_system",
    "make_closed_form_system",
    "evolve",
    "orbit",
    "lipschitz_estimate",
    "sces_profile",
]


class EvolutionSystem:
    """Base class: an evaluator ``(t, s, x) -> U(t, s) x`` plus metadata."""

    dimension: int | None = None
    claimed_M: float | None = None
    autonomous: bool = False
    description: str = ""

    def _evolve(self, t: float, s: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _state(self, x) -> np.ndarray:
        return as_state(x, self.dimension)

    def evolve(self, t: float, s: float, x) -> np.ndarray:
        if s < 0 or t < s:
            raise InvalidInputError(f"need t >= s >= 0, got t={t}, s={s}")
        x = self._state(x)
        if t == s:
            return x
        return self._evolve(float(t), float(s), x)

    def transport(self, s: float, x, times) -> np.ndarray:
        """``U(times[i], s) x`` for nondecreasing ``times >= s``, computed incrementally."""
        times = np.asarray(times, dtype=float).reshape(-1)
        x = self._state(x)
        if times.size and (times[0] < s or np.any(np.diff(times) < 0)):
            raise InvalidInputError("transport times must be nondecreasing and >= s")
        out = np.empty((times.size, x.size))
        cur, prev = x, float(s)
        for i, t in enumerate(times):
            if t != prev:
                cur = self._evolve(float(t), prev, cur)
                prev = float(t)
            out[i] = cur
        return out

    def __repr__(self):
        return f"<{type(self).__name__} {self.description}>"


class ClosedForm(str, Enum):
    SHIFT_EXP = "shift-exp"
    LINEAR_DECAY = "linear-decay"
    ROTATION = "rotation"


class ClosedFormSystem(EvolutionSystem):
    """Exact evaluators.

    ``shift-exp``: ``x + e^{-s} - e^{-t}`` on R (contracting, nonautonomous).
    ``linear-decay``: ``e^{-rate (t-s)} x`` on R^d.
    ``rotation``: the flow of ``-u' = omega R u`` with ``R = [[0,-1],[1,0]]``,
    i.e. a clockwise rotation by ``omega (t-s)`` on R^2.
    """

    def __init__(self, formula: ClosedForm, rate: float = 1.0, omega: float = 1.0):
        self.formula = ClosedForm(formula)
        self.rate = float(rate)
        self.omega = float(omega)
        self.claimed_M = 1.0
        if self.formula is ClosedForm.SHIFT_EXP:
            self.dimension, self.autonomous = 1, False
            self.description = "U(t,s)x = x + exp(-s) - exp(-t)"
        elif self.formula is ClosedForm.LINEAR_DECAY:
            if not self.rate > 0:
                raise InvalidInputError(f"linear-decay rate must be positive, got {rate}")
            self.dimension, self.autonomous = None, True
            self.description = f"U(t,s)x = exp(-{self.rate:g}(t-s)) x"
        else:
            self.dimension, self.autonomous = 2, True
            self.description = f"rotation by {self.omega:g}(t-s)"

    def _evolve(self, t, s, x):
        if self.formula is ClosedForm.SHIFT_EXP:
            return x + math.exp(-s) - math.exp(-t)
        if self.formula is ClosedForm.LINEAR_DECAY:
            return math.exp(-self.rate * (t - s)) * x
        a = self.omega * (t - s)
        c, sn = math.cos(a), math.sin(a)
        return np.array([c * x[0] + sn * x[1], -sn * x[0] + c * x[1]])


class _SteppedSystem(EvolutionSystem):
    """``U(t, s)`` applies steps ``index(s)+1 .. index(t)`` in order."""

    def index(self, t: float) -> int:
        raise NotImplementedError

    def _stepper(self):
        """Return ``step(n, x)``."""
        raise NotImplementedError

    def _evolve(self, t, s, x):
        step = self._stepper()
        for n in range(self.index(s) + 1, self.index(t) + 1):
            x = step(n, x)
        return x

    def transport(self, s, x, times):
        times = np.asarray(times, dtype=float).reshape(-1)
        x = self._state(x)
        if s < 0:
            raise InvalidInputError(f"need s >= 0, got {s}")
        if times.size and (times[0] < s or np.any(np.diff(times) < 0)):
            raise InvalidInputError("transport times must be nondecreasing and >= s")
        step = self._stepper()
        out = np.empty((times.size, x.size))
        n = self.index(s)
        for i, t in enumerate(times):
            m = self.index(t)
            for k in range(n + 1, m + 1):
                x = step(k, x)
            n = max(n, m)
            out[i] = x
        return out


class FlowSystem(_SteppedSystem):
    """Implicit Euler for ``-u' in A u + f(t)`` on the anchors ``k * h_int``.

    The step attached to anchor ``k`` is ``u <- J_h(u - h f((k-1) h))`` with
    ``J_h = (I + h A)^{-1}``; ``U(t, s)`` applies the anchors in ``(s, t]``.
    """

    def __init__(self, op: OperatorSpec, forcing: Forcing, h_int: float, description: str = ""):
        if not h_int > 0:
            raise InvalidInputError(f"h_int must be positive, got {h_int}")
        if forcing.dim is not None and forcing.dim != op.dim:
            raise DimensionMismatchError(f"forcing dimension {forcing.dim} != operator dimension {op.dim}")
        self.op = op
        self.forcing = forcing
        self.h_int = float(h_int)
        self.dimension = op.dim
        # Forcing cancels in differences of solutions, so it does not affect the Lipschitz constant.
        self.claimed_M = 1.0 if op.monotone else None
        self.autonomous = forcing.is_zero
        self.description = description or f"implicit-Euler flow of {op.kind.value}, h_int={self.h_int:g}"

    def index(self, t):
        h = self.h_int
        k = int(math.floor(t / h))
        while (k + 1) * h <= t:
            k += 1
        while k > 0 and k * h > t:
            k -= 1
        return k

    def _stepper(self):
        h = self.h_int
        J = resolvent_map(self.op, h)
        if self.forcing.is_zero:
            return lambda n, x: J(x)
        f = self.forcing
        return lambda n, x: J(x - h * f((n - 1) * h))


class StepKind(str, Enum):
    POWER = "power"
    CONSTANT = "constant"
    EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class StepSequence:
    """Positive step sizes ``lam_n``, ``n = 0, 1, ...``.

    ``power``: ``c (n+1)^{-alpha}``; ``constant``: ``c``; ``explicit``: a
    finite list. Infinite kinds are truncated at ``n_max`` indices.
    """

    kind: StepKind
    c: float = 1.0
    alpha: float = 0.0
    values: np.ndarray | None = None
    n_max: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "kind", StepKind(self.kind))
        if self.kind is StepKind.EXPLICIT:
            vals = np.array(self.values, dtype=float).reshape(-1)
            if vals.size == 0 or not np.all(vals > 0) or not np.all(np.isfinite(vals)):
                raise InvalidInputError("explicit steps must be a nonempty list of positive numbers")
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)
        else:
            if not self.c > 0:
                raise InvalidInputError(f"step scale c must be positive, got {self.c}")
            if self.alpha < 0:
                raise InvalidInputError(f"alpha must be >= 0, got {self.alpha}")
            if self.n_max < 1:
                raise InvalidInputError("n_max must be >= 1")

    @classmethod
    def power(cls, c: float, alpha: float, n_max: int = 1_000_000) -> "StepSequence":
        return cls(StepKind.POWER, c=float(c), alpha=float(alpha), n_max=int(n_max))

    @classmethod
    def constant(cls, c: float, n_max: int = 1_000_000) -> "StepSequence":
        return cls(StepKind.CONSTANT, c=float(c), n_max=int(n_max))

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "StepSequence":
        return cls(StepKind.EXPLICIT, values=np.asarray(values, dtype=float))

    @property
    def length(self) -> int:
        return self.values.size if self.kind is StepKind.EXPLICIT else self.n_max

    @property
    def in_l1(self) -> bool:
        if self.kind is StepKind.EXPLICIT:
            return True
        return self.kind is StepKind.POWER and self.alpha > 1

    @property
    def in_l2(self) -> bool:
        if self.kind is StepKind.EXPLICIT:
            return True
        return self.kind is StepKind.POWER and self.alpha > 0.5

    def lambdas(self, start: int, stop: int) -> np.ndarray:
        stop = min(stop, self.length)
        n = np.arange(start, stop, dtype=float)
        if self.kind is StepKind.EXPLICIT:
            return self.values[start:stop].copy()
        if self.kind is StepKind.CONSTANT:
            return np.full(n.size, self.c)
        return self.c * (n + 1.0) ** (-self.alpha)


_CHUNK = 1 << 15


@dataclass(eq=False)
class ProductSystemSpec:
    """Step sequence plus operator; ``sigma_n = lam_0 + ... + lam_n``.

    ``nu(t) = max{n : sigma_n <= t}`` (``-1`` before ``sigma_0``). When the
    index budget ``steps.length`` is exhausted below ``t``: summable
    sequences saturate (the remaining tail is treated as already applied),
    non-summable ones raise :class:`InvalidInputError`.
    """

    steps: StepSequence
    op: OperatorSpec
    _lam: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _sigma: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def _extend(self, upto_index: int | None = None, upto_time: float | None = None):
        with self._lock:
            while self._sigma.size < self.steps.length:
                if upto_index is not None and self._sigma.size > upto_index:
                    return
                if upto_time is not None and self._sigma.size and self._sigma[-1] > upto_time:
                    return
                start = self._sigma.size
                lam = self.steps.lambdas(start, start + _CHUNK)
                prev = self._sigma[-1] if start else 0.0
                # Sequential running sum from the previous chunk end: chunking does not alter sigma.
                sig = np.cumsum(np.concatenate([[prev], lam]))[1:]
                self._lam = np.concatenate([self._lam, lam])
                self._sigma = np.concatenate([self._sigma, sig])

    def lam(self, n: int) -> float:
        self._extend(upto_index=n)
        return float(self._lam[n])

    def sigma(self, n: int) -> float:
        self._extend(upto_index=n)
        return float(self._sigma[n])

    def sigmas(self, count: int) -> np.ndarray:
        self._extend(upto_index=count - 1)
        return self._sigma[:count].copy()

    def nu(self, t: float) -> int:
        self._extend(upto_time=t)
        sig = self._sigma
        if sig.size and sig[-1] <= t:
            if self.steps.in_l1:
                return sig.size - 1
            raise InvalidInputError(
                f"time {t} beyond sigma_{sig.size - 1} = {sig[-1]:.6g}; raise n_max"
            )
        return int(np.searchsorted(sig, t, side="right")) - 1


class ProductSystem(_SteppedSystem):
    """``U(t, s) = prod_{n = nu(s)+1}^{nu(t)} (I + lam_n A)^{-1}``."""

    def __init__(self, spec: ProductSystemSpec, description: str = ""):
        self.spec = spec
        self.dimension = spec.op.dim
        self.claimed_M = 1.0 if spec.op.monotone else None
        self.autonomous = False
        self.description = description or (
            f"resolvent product of {spec.op.kind.value}, steps {spec.steps.kind.value}"
            f"(c={spec.steps.c:g}, alpha={spec.steps.alpha:g})"
        )
        self._affine = affine_parts(spec.op)
        self._M = np.empty((0, self.dimension, self.dimension))
        self._c = np.empty((0, self.dimension))
        self._lock = threading.Lock()

    def index(self, t):
        return self.spec.nu(t)

    def _affine_upto(self, n: int):
        with self._lock:
            while self._M.shape[0] <= n:
                start = self._M.shape[0]
                stop = min(start + _CHUNK, self.spec.steps.length)
                self.spec._extend(upto_index=stop - 1)
                lam = self.spec._lam[start:stop]
                A, b = self._affine
                d = self.dimension
                M = np.linalg.inv(np.eye(d)[None] + lam[:, None, None] * A[None])
                c = -lam[:, None] * np.einsum("nij,j->ni", M, b)
                self._M = np.concatenate([self._M, M])
                self._c = np.concatenate([self._c, c])
            return self._M, self._c

    def _stepper(self):
        if self._affine is not None:
            def step(n, x):
                M, c = self._M, self._c
                if n >= M.shape[0]:
                    M, c = self._affine_upto(n)
                return M[n] @ x + c[n]
            return step
        spec = self.spec
        return lambda n, x: resolvent_map(spec.op, spec.lam(n))(x)


def make_flow_system(op: OperatorSpec, forcing: Forcing, h_int: float) -> FlowSystem:
    """Implicit-Euler flow of ``-u' in op(u) + forcing(t)``."""
    return FlowSystem(op, forcing, h_int)


def make_exponential_system(op: OperatorSpec, h_int: float) -> FlowSystem:
    """Resolvent products with uniform step ``h_int`` (exponential formula)."""
    return FlowSystem(op, Forcing.zero(), h_int,
                      description=f"exponential formula (I + {h_int:g} A)^(-n), A {op.kind.value}")


def make_product_system(spec: ProductSystemSpec) -> ProductSystem:
    return ProductSystem(spec)


def make_closed_form_system(formula_id: str, **params) -> ClosedFormSystem:
    try:
        formula = ClosedForm(formula_id)
    except ValueError:
        raise InvalidInputError(f"unknown closed-form formula {formula_id!r}") from None
    allowed = {ClosedForm.SHIFT_EXP: set(), ClosedForm.LINEAR_DECAY: {"rate"},
               ClosedForm.ROTATION: {"omega"}}[formula]
    extra = set(params) - allowed
    if extra:
        raise InvalidInputError(f"unexpected parameters for {formula_id}: {sorted(extra)}")
    return ClosedFormSystem(formula, **params)


def evolve(sys: EvolutionSystem, t: float, s: float, x) -> np.ndarray:
    return sys.evolve(t, s, x)


def orbit(sys: EvolutionSystem, t0: float, x0, grid: TimeGrid,
          interpolation=Interpolation.LINEAR) -> SampledCurve:
    """The orbit ``t -> U(t, t0) x0`` sampled on ``grid`` (all points ``>= t0``)."""
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(grid)
    if grid.start < t0:
        raise InvalidInputError(f"grid starts at {grid.start} < t0 = {t0}")
    return SampledCurve(grid, sys.transport(t0, x0, grid.points), interpolation)


def _dim_for(sys: EvolutionSystem, dim: int | None) -> int:
    if sys.dimension is not None:
        if dim is not None and dim != sys.dimension:
            raise DimensionMismatchError(f"system has dimension {sys.dimension}, got {dim}")
        return sys.dimension
    return 1 if dim is None else int(dim)


def lipschitz_estimate(sys: EvolutionSystem, pairs: int, t_range: tuple[float, float],
                       seed: int, dim: int | None = None) -> float:
    """Largest observed ``|U(t,s)x - U(t,s)y| / |x - y|``; a lower bound on ``M``."""
    if pairs < 1:
        raise InvalidInputError("pairs must be >= 1")
    lo, hi = map(float, t_range)
    if not 0 <= lo <= hi:
        raise InvalidInputError(f"bad t_range {t_range}")
    d = _dim_for(sys, dim)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(pairs):
        s = lo + (hi - lo) * rng.random()
        t = s + (hi - s) * rng.random()
        x, y = rng.standard_normal(d), rng.standard_normal(d)
        num = np.linalg.norm(sys.evolve(t, s, x) - sys.evolve(t, s, y))
        best = max(best, float(num / np.linalg.norm(x - y)))
    return best


@dataclass
class SCESProfile:
    """Empirical contraction factors ``M(t, s)`` from random pairs."""

    samples: list[tuple[float, float, float]]
    pair_count: int
    threshold: float

    def factor(self, t: float, s: float) -> float:
        for tt, ss, m in self.samples:
            if tt == t and ss == s:
                return m
        raise KeyError((t, s))

    @property
    def sces_plausible(self) -> bool:
        by_s: dict[float, list[tuple[float, float]]] = {}
        for t, s, m in self.samples:
            by_s.setdefault(s, []).append((t, m))
        return all(max(rows)[1] < self.threshold for rows in by_s.values())


def sces_profile(sys: EvolutionSystem, t_list, s_list, pairs: int, seed: int,
                 threshold: float = 1e-3, dim: int | None = None) -> SCESProfile:
    """``M(t, s)`` for every ``s`` in ``s_list`` and every ``t >= s`` in ``t_list``."""
    if pairs < 1:
        raise InvalidInputError("pairs must be >= 1")
    d = _dim_for(sys, dim)
    rng = np.random.default_rng(seed)
    t_sorted = np.sort(np.asarray(t_list, dtype=float))
    samples = []
    for s in map(float, s_list):
        ts = t_sorted[t_sorted >= s]
        if ts.size == 0:
            raise InvalidInputError(f"no t >= s = {s} in t_list")
        best = np.zeros(ts.size)
        for _ in range(pairs):
            x, y = rng.standard_normal(d), rng.standard_normal(d)
            ux, uy = sys.transport(s, x, ts), sys.transport(s, y, ts)
            ratio = np.linalg.norm(ux - uy, axis=1) / np.linalg.norm(x - y)
            best = np.maximum(best, ratio)
        samples.extend((float(t), s, float(m)) for t, m in zip(ts, best))
    return SCESProfile(samples, pairs, float(threshold))
