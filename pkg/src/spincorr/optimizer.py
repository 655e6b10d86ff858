"""Search over coplanar CHSH settings.

Rotating all four analyzers together leaves every relative angle unchanged,
so ``a`` is pinned to 0 and the search runs over ``(a', b, b')``.  On a grid
whose step divides 2*pi every relative angle is a multiple of the step, which
lets the whole grid be evaluated from one table of the correlation function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, ValidationError

TWO_PI = 2.0 * math.pi
LOCAL_BOUND = 2.0
# float guard when counting grid points above the local bound
BOUND_TOL = 1e-9

CorrFn = Callable[[float], float]


def fold_angle(delta: float) -> float:
    """Map any angle difference onto the relative angle in [0, pi]."""
    d = math.fmod(abs(delta), TWO_PI)
    return TWO_PI - d if d > math.pi else d


def _eval(corr_fn: CorrFn, theta: float) -> float:
    v = float(corr_fn(theta))
    if not math.isfinite(v):
        raise EvaluationError(f"correlation function returned {v!r} at theta={theta!r}")
    return v


def chsh_value(corr_fn: CorrFn, a: float, ap: float, b: float, bp: float) -> float:
    p_ab = _eval(corr_fn, fold_angle(a - b))
    p_abp = _eval(corr_fn, fold_angle(a - bp))
    p_apbp = _eval(corr_fn, fold_angle(ap - bp))
    p_apb = _eval(corr_fn, fold_angle(ap - b))
    return abs(p_ab - p_abp) + abs(p_apbp + p_apb)


@dataclass(frozen=True)
class ChshConfiguration:
    a: float
    a_prime: float
    b: float
    b_prime: float
    m_value: float
    history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def angles(self) -> tuple[float, float, float, float]:
        return (self.a, self.a_prime, self.b, self.b_prime)

    @property
    def relative_angles(self) -> tuple[float, float, float, float]:
        """Relative angles of the pairs (a,b), (a,b'), (a',b'), (a',b)."""
        a, ap, b, bp = self.angles
        return (fold_angle(a - b), fold_angle(a - bp), fold_angle(ap - bp), fold_angle(ap - b))

    def as_dict(self) -> dict:
        return {
            "a_deg": math.degrees(self.a),
            "a_prime_deg": math.degrees(self.a_prime),
            "b_deg": math.degrees(self.b),
            "b_prime_deg": math.degrees(self.b_prime),
            "relative_deg": [math.degrees(t) for t in self.relative_angles],
            "M": self.m_value,
        }


def _grid_size(grid_step: float) -> int:
    if not (0.0 < grid_step <= math.radians(5.0) + 1e-15):
        raise ValidationError(f"grid_step must be in (0, 5 deg], got {grid_step!r} rad")
    return int(round(TWO_PI / grid_step))


def _table(corr_fn: CorrFn, k: int) -> np.ndarray:
    """corr at every grid relative angle j*2pi/k, j = 0..k-1, folded by symmetry."""
    step = TWO_PI / k
    half = np.array([_eval(corr_fn, min(j * step, math.pi)) for j in range(k // 2 + 1)])
    j = np.arange(k)
    return half[np.minimum(j, k - j)]


def _grid_slices(corr_fn: CorrFn, grid_step: float):
    """Yield ``(i, M[b, b'])`` for each a' index ``i``; a = 0."""
    k = _grid_size(grid_step)
    c = _table(corr_fn, k)
    idx = np.arange(k)
    # a = 0: P(a,b) = c[b], P(a,b') = c[b']
    first = np.abs(c[:, None] - c[None, :])
    for i in range(k):
        row = c[(i - idx) % k]  # P(a', x) for every grid x
        yield i, first + np.abs(row[None, :] + row[:, None])


def _grid_max(corr_fn: CorrFn, grid_step: float, threshold: float | None = None):
    """Best grid point; also counts points above ``threshold`` when given."""
    k = _grid_size(grid_step)
    step = TWO_PI / k
    best, arg, count = -math.inf, (0, 0, 0), 0
    for i, m in _grid_slices(corr_fn, grid_step):
        flat = int(np.argmax(m))
        v = float(m.flat[flat])
        # strict > keeps the lexicographically smallest (a', b, b') on ties
        if v > best:
            best, arg = v, (i, *divmod(flat, k))
        if threshold is not None:
            count += int(np.count_nonzero(m > threshold))
    i, jb, jbp = arg
    return best, (i * step, jb * step, jbp * step), count


def maximize_chsh(
    corr_fn: CorrFn,
    grid_step: float = math.radians(1.0),
    refine_tol: float = 1e-6,
    min_step: float = 1e-12,
) -> ChshConfiguration:
    """Grid search then coordinate descent with step halving.

    The grid is rounded so its step divides 2*pi.  Refinement polls +-h on
    each of a', b, b', accepts any improvement, and halves h once no move
    helps; it stops after three consecutive halvings that together gained
    less than ``refine_tol``, or when h drops below ``min_step``.
    """
    grid_best, (ap, b, bp), _ = _grid_max(corr_fn, grid_step)
    x = [ap, b, bp]
    best = chsh_value(corr_fn, 0.0, *x)
    history = [best]
    h = TWO_PI / _grid_size(grid_step) / 2
    quiet = 0
    while h >= min_step and quiet < 3:
        start = best
        moved = True
        while moved:
            moved = False
            for i in range(3):
                for sgn in (1.0, -1.0):
                    trial = list(x)
                    trial[i] = math.fmod(trial[i] + sgn * h, TWO_PI)
                    v = chsh_value(corr_fn, 0.0, *trial)
                    if v > best:
                        best, x, moved = v, trial, True
        history.append(best)
        quiet = quiet + 1 if best - start < refine_tol else 0
        h /= 2
    assert best >= grid_best - 1e-12
    return ChshConfiguration(0.0, x[0] % TWO_PI, x[1] % TWO_PI, x[2] % TWO_PI, best, tuple(history))


@dataclass(frozen=True)
class ViolationScan:
    count: int
    total: int
    extremal: ChshConfiguration

    @property
    def fraction(self) -> float:
        return self.count / self.total

    def as_dict(self) -> dict:
        return {"count": self.count, "total": self.total, "fraction": self.fraction, "extremal": self.extremal.as_dict()}


def violation_scan(corr_fn: CorrFn, grid_step: float = math.radians(1.0)) -> ViolationScan:
    """Count grid configurations with M above the local bound of 2."""
    k = _grid_size(grid_step)
    best, angles, count = _grid_max(corr_fn, grid_step, LOCAL_BOUND + BOUND_TOL)
    return ViolationScan(count, k**3, ChshConfiguration(0.0, *angles, best))
