"""Monotone operators on R^d and their resolvents.

Multivalued operators (the l1 subdifferential, the normal cone of a box) are
handled through their resolvents, which are always single valued. ``apply``
is deliberately partial: it refuses points where the operator is not a
singleton.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .core import SampledCurve, as_state
from .errors import (DimensionMismatchError, InvalidInputError, MultivaluedError,
                     NoConvergenceError)

__all__ = [
    "OpKind",
    "OperatorSpec",
    "Forcing",
    "apply",
    "resolvent",
    "resolvent_map",
    "affine_parts",
    "monotonicity_probe",
    "soft_threshold",
]

PSD_TOL = 1e-10
INNER_TOL = 1e-12
INNER_MAXITER = 10_000


class OpKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "subgradient-quadratic"
    L1 = "subgradient-l1"
    BOX = "projection-indicator"
    SKEW = "skew"
    SUM = "sum"


def _min_sym_eig(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())


def _square(A, name) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidInputError(f"{name} must be a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Declarative description of a monotone operator.

    Use the classmethod constructors rather than the raw initializer; they
    enforce the per-kind invariants.
    """

    kind: OpKind
    dim: int
    matrix: np.ndarray | None = None
    shift: np.ndarray | None = None
    weight: float | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    terms: tuple["OperatorSpec", ...] = ()
    monotone: bool = True
    _maps: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def linear(cls, A, check_monotone: bool = True) -> "OperatorSpec":
        """``x -> A x``. With ``check_monotone`` the symmetric part must be PSD."""
        A = _square(A, "A")
        mono = _min_sym_eig(A) >= -PSD_TOL
        if check_monotone and not mono:
            raise InvalidInputError(
                f"linear operator is not monotone: min eigenvalue of sym part {_min_sym_eig(A):.3e}"
            )
        return cls(OpKind.LINEAR, A.shape[0], matrix=A, monotone=mono)

    @classmethod
    def identity(cls, dim: int) -> "OperatorSpec":
        return cls.linear(np.eye(dim))

    @classmethod
    def skew(cls, R) -> "OperatorSpec":
        R = _square(R, "R")
        if not np.array_equal(R.T, -R):
            raise InvalidInputError("skew operator requires R^T == -R exactly")
        return cls(OpKind.SKEW, R.shape[0], matrix=R)

    @classmethod
    def quadratic(cls, Q, b=None) -> "OperatorSpec":
        """Gradient of ``x^T Q x / 2 + b^T x``."""
        Q = _square(Q, "Q")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise InvalidInputError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        if _min_sym_eig(Q) < -PSD_TOL:
            raise InvalidInputError(f"Q is not PSD: min eigenvalue {_min_sym_eig(Q):.3e}")
        b = np.zeros(Q.shape[0]) if b is None else as_state(b, Q.shape[0])
        return cls(OpKind.QUADRATIC, Q.shape[0], matrix=Q, shift=b)

    @classmethod
    def l1(cls, weight: float, dim: int) -> "OperatorSpec":
        """Subdifferential of ``weight * ||x||_1``."""
        if not weight > 0:
            raise InvalidInputError(f"l1 weight must be positive, got {weight}")
        return cls(OpKind.L1, int(dim), weight=float(weight))

    @classmethod
    def box(cls, lo, hi) -> "OperatorSpec":
        """Normal cone of the box ``lo <= x <= hi`` (bounds may be infinite)."""
        lo = np.array(lo, dtype=float).reshape(-1)
        hi = np.array(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidInputError("box bounds must be nonempty and of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise InvalidInputError("box bounds must satisfy lo <= hi")
        return cls(OpKind.BOX, lo.size, lo=lo, hi=hi)

    @classmethod
    def sum_of(cls, *terms: "OperatorSpec") -> "OperatorSpec":
        if not terms:
            raise InvalidInputError("sum needs at least one term")
        d = terms[0].dim
        if any(t.dim != d for t in terms):
            raise DimensionMismatchError("all summands must share dimension")
        op = cls(OpKind.SUM, d, terms=tuple(terms), monotone=all(t.monotone for t in terms))
        _split(op)  # fail early on an empty box intersection
        return op


def _leaves(op: OperatorSpec):
    if op.kind is OpKind.SUM:
        for t in op.terms:
            yield from _leaves(t)
    else:
        yield op


def affine_parts(op: OperatorSpec):
    """``(A, b)`` with ``op(x) = A x + b`` if ``op`` is affine, else ``None``."""
    A, b, w, box = _split(op)
    if w > 0 or box is not None:
        return None
    return A, b


def _split(op: OperatorSpec):
    """Decompose ``op`` into affine part ``(A, b)``, total l1 weight and box."""
    d = op.dim
    A = np.zeros((d, d))
    b = np.zeros(d)
    w = 0.0
    lo = np.full(d, -np.inf)
    hi = np.full(d, np.inf)
    has_box = False
    for leaf in _leaves(op):
        if leaf.kind in (OpKind.LINEAR, OpKind.SKEW):
            A = A + leaf.matrix
        elif leaf.kind is OpKind.QUADRATIC:
            A = A + leaf.matrix
            b = b + leaf.shift
        elif leaf.kind is OpKind.L1:
            w += leaf.weight
        elif leaf.kind is OpKind.BOX:
            lo = np.maximum(lo, leaf.lo)
            hi = np.minimum(hi, leaf.hi)
            has_box = True
    if has_box and np.any(lo > hi):
        raise InvalidInputError("sum of box indicators has empty domain")
    return A, b, w, ((lo, hi) if has_box else None)


def _check_dim(op: OperatorSpec, x) -> np.ndarray:
    return as_state(x, op.dim)


def apply(op: OperatorSpec, x) -> np.ndarray:
    """The unique element of ``op(x)``; raises where ``op`` is not a singleton."""
    x = _check_dim(op, x)
    k = op.kind
    if k in (OpKind.LINEAR, OpKind.SKEW):
        return op.matrix @ x
    if k is OpKind.QUADRATIC:
        return op.matrix @ x + op.shift
    if k is OpKind.L1:
        if np.any(x == 0):
            raise MultivaluedError("l1 subdifferential is multivalued at a zero coordinate")
        return op.weight * np.sign(x)
    if k is OpKind.BOX:
        if np.any(x < op.lo) or np.any(x > op.hi):
            raise MultivaluedError("box normal cone is empty outside the box")
        if np.any(x == op.lo) or np.any(x == op.hi):
            raise MultivaluedError("box normal cone is multivalued on the boundary")
        return np.zeros(op.dim)
    return sum((apply(t, x) for t in op.terms), np.zeros(op.dim))


def soft_threshold(x: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def _prox(x, tau_w, box):
    y = soft_threshold(x, tau_w) if tau_w > 0 else x
    if box is not None:
        y = np.clip(y, box[0], box[1])
    return y


def resolvent_map(op: OperatorSpec, lam: float) -> Callable[[np.ndarray], np.ndarray]:
    """The map ``x -> (I + lam*op)^{-1} x``.

    Affine operators are inverted once and cached per ``lam``; pure l1/box
    parts use the closed-form prox; mixed sums run Douglas-Rachford on the
    two strongly monotone halves of the inclusion.
    """
    if not lam > 0:
        raise InvalidInputError(f"resolvent parameter must be positive, got {lam}")
    lam = float(lam)
    cached = op._maps.get(lam)
    if cached is not None:
        return cached
    A, b, w, box = _split(op)
    d = op.dim
    affine = bool(np.any(A) or np.any(b))
    if w == 0 and box is None:
        M = np.linalg.inv(np.eye(d) + lam * A)
        c = -lam * (M @ b)

        def fmap(x):
            return M @ x + c
    elif not affine:
        def fmap(x):
            return _prox(x, lam * w, box)
    else:
        fmap = _douglas_rachford(A, b, w, box, lam)
    if len(op._maps) < 64:
        op._maps[lam] = fmap
    return fmap


def _douglas_rachford(A, b, w, box, lam):
    d = A.shape[0]
    # Step size balancing the affine half against the prox half.
    gamma = 1.0 / max(0.5, lam * np.linalg.norm(A, 2))
    scale = 1.0 + 0.5 * gamma
    P = np.linalg.inv(scale * np.eye(d) + gamma * lam * A)
    tau = gamma * lam * w / scale

    def fmap(x):
        z = x.copy()
        tol = INNER_TOL * (1.0 + np.linalg.norm(x))
        res = np.inf
        for _ in range(INNER_MAXITER):
            y = P @ (z + 0.5 * gamma * x - gamma * lam * b)
            v = _prox((2 * y - z + 0.5 * gamma * x) / scale, tau, box)
            z = z + v - y
            res = np.linalg.norm(v - y)
            if res <= tol:
                return v
        raise NoConvergenceError("sum resolvent did not converge", res)

    return fmap


def resolvent(op: OperatorSpec, lam: float, x) -> np.ndarray:
    """The unique ``y`` with ``x in y + lam*op(y)``."""
    return resolvent_map(op, lam)(_check_dim(op, x))


def _sample_point(op: OperatorSpec, rng: np.random.Generator) -> np.ndarray:
    *_, box = _split(op)
    x = rng.standard_normal(op.dim) * 2.0
    if box is not None:
        lo, hi = box
        fin = np.isfinite(lo) & np.isfinite(hi)
        x = np.where(fin, lo + (hi - lo) * rng.random(op.dim), x)
        x = np.where(~fin & np.isfinite(lo), lo + np.abs(x), x)
        x = np.where(~fin & np.isfinite(hi), hi - np.abs(x), x)
    return x


def monotonicity_probe(op: OperatorSpec, samples: int, seed: int) -> float:
    """Minimum of ``<op x - op y, x - y> / |x - y|^2`` over random pairs."""
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(samples):
        for _attempt in range(1000):
            x, y = _sample_point(op, rng), _sample_point(op, rng)
            if np.array_equal(x, y):
                continue
            try:
                ax, ay = apply(op, x), apply(op, y)
            except MultivaluedError:
                continue
            break
        else:
            raise InvalidInputError("could not sample single-valued points")
        diff = x - y
        best = min(best, float(np.dot(ax - ay, diff) / np.dot(diff, diff)))
    return best


class ForcingKind(str, Enum):
    ZERO = "zero"
    POWER_DECAY = "power-decay"
    CUSTOM = "custom-sampled"


@dataclass(frozen=True, eq=False)
class Forcing:
    """A time-dependent additive term ``f(t)``.

    ``power_decay`` is ``c (1+t)^{-p} e``; it is integrable on ``[0, inf)``
    exactly when ``p > 1`` (or ``c == 0``). For sampled forcings the
    integrability flag is whatever the caller asserts.
    """

    kind: ForcingKind
    c: float = 0.0
    p: float = 0.0
    direction: np.ndarray | None = None
    curve: SampledCurve | None = None
    l1_integrable: bool = True

    @classmethod
    def zero(cls) -> "Forcing":
        return cls(ForcingKind.ZERO)

    @classmethod
    def power_decay(cls, c: float, p: float, direction) -> "Forcing":
        e = as_state(direction)
        if c < 0 or not p > 0:
            raise InvalidInputError(f"power decay needs c >= 0 and p > 0, got c={c}, p={p}")
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise InvalidInputError("power decay direction must be a unit vector")
        return cls(ForcingKind.POWER_DECAY, float(c), float(p), e, l1_integrable=(p > 1 or c == 0))

    @classmethod
    def custom(cls, curve: SampledCurve, l1_integrable: bool) -> "Forcing":
        return cls(ForcingKind.CUSTOM, curve=curve, l1_integrable=bool(l1_integrable))

    @property
    def dim(self) -> int | None:
        if self.kind is ForcingKind.POWER_DECAY:
            return self.direction.size
        if self.kind is ForcingKind.CUSTOM:
            return self.curve.dim
        return None

    @property
    def is_zero(self) -> bool:
        return self.kind is ForcingKind.ZERO or (self.kind is ForcingKind.POWER_DECAY and self.c == 0)

    def __call__(self, t: float):
        if self.kind is ForcingKind.ZERO:
            return 0.0
        if self.kind is ForcingKind.POWER_DECAY:
            return self.c * (1.0 + t) ** (-self.p) * self.direction
        return self.curve(t)

    def sample(self, times) -> np.ndarray:
        """Values at many times, shape ``(len(times), d)`` (``d = 1`` for zero)."""
        times = np.asarray(times, dtype=float)
        if self.kind is ForcingKind.ZERO:
            return np.zeros((times.size, 1))
        if self.kind is ForcingKind.POWER_DECAY:
            return self.c * ((1.0 + times) ** (-self.p))[:, None] * self.direction[None, :]
        return self.curve.evaluate(times)
