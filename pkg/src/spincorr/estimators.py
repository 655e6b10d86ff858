"""Streaming correlation estimators, conservation audit and CHSH.

All sufficient statistics are integers in doubled units (``2m``), so
accumulation and merging are exact: merge order never changes a result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, ValidationError
from .models import ModelSpec, Setting, SpinMagnitude, analytic_corr, normalized_corr
from .simulate import EventBatch, simulate


@dataclass
class GroupStats:
    """Events with a fixed projection at A: count, sum and sum of squares of 2m_b."""

    n: int = 0
    sum_b: int = 0
    sumsq_b: int = 0

    def __add__(self, other: GroupStats) -> GroupStats:
        return GroupStats(self.n + other.n, self.sum_b + other.sum_b, self.sumsq_b + other.sumsq_b)


@dataclass
class AccumulatorState:
    setting_a: Setting
    setting_b: Setting
    spin: SpinMagnitude
    n: int = 0
    sum_prod2: int = 0  # sum of 2m_a * 2m_b
    sumsq_prod2: int = 0
    groups: dict[int, GroupStats] = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, setting_a, setting_b, spin, two_m_a, two_m_b) -> AccumulatorState:
        acc = cls(setting_a, setting_b, spin)
        acc.update(two_m_a, two_m_b)
        return acc

    @classmethod
    def from_batch(cls, batch: EventBatch) -> AccumulatorState:
        return cls.from_arrays(batch.setting_a, batch.setting_b, batch.spin, batch.two_m_a, batch.two_m_b)

    @property
    def sum_prod(self) -> float:
        """Running sum of m_a*m_b in hbar^2 units."""
        return self.sum_prod2 / 4

    @property
    def sum_prod_normalized(self) -> float:
        """Running sum of products in +-1 units (each projection divided by S)."""
        return self.sum_prod2 / self.spin.two_s**2

    def update(self, two_m_a, two_m_b) -> None:
        a = np.asarray(two_m_a, dtype=np.int64)
        b = np.asarray(two_m_b, dtype=np.int64)
        if a.shape != b.shape:
            raise ValidationError("outcome arrays differ in length")
        if a.size == 0:
            return
        prod = a * b
        self.n += int(a.size)
        self.sum_prod2 += int(prod.sum())
        self.sumsq_prod2 += int((prod * prod).sum())
        for m in np.unique(a).tolist():
            sel = b[a == m]
            g = GroupStats(int(sel.size), int(sel.sum()), int((sel * sel).sum()))
            self.groups[m] = self.groups.get(m, GroupStats()) + g

    def merge(self, other: AccumulatorState) -> AccumulatorState:
        if (self.setting_a, self.setting_b, self.spin) != (other.setting_a, other.setting_b, other.spin):
            raise ConfigurationError("cannot merge accumulators with different settings or spin")
        groups = dict(self.groups)
        for m, g in other.groups.items():
            groups[m] = groups.get(m, GroupStats()) + g
        return AccumulatorState(
            self.setting_a,
            self.setting_b,
            self.spin,
            self.n + other.n,
            self.sum_prod2 + other.sum_prod2,
            self.sumsq_prod2 + other.sumsq_prod2,
            dict(sorted(groups.items())),
        )

    __add__ = merge

    def __eq__(self, other):
        if not isinstance(other, AccumulatorState):
            return NotImplemented
        key = lambda s: (s.setting_a, s.setting_b, s.spin, s.n, s.sum_prod2, s.sumsq_prod2)
        nonempty = lambda s: {m: g for m, g in s.groups.items() if g.n}
        return key(self) == key(other) and nonempty(self) == nonempty(other)


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float  # hbar^2 units
    n: int
    se: float
    spin: SpinMagnitude

    @property
    def normalized(self) -> float:
        return normalized_corr(self.value, self.spin)

    @property
    def normalized_se(self) -> float:
        return normalized_corr(self.se, self.spin)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "se": self.se,
            "normalized": self.normalized,
            "normalized_se": self.normalized_se,
            "n": self.n,
        }


def _sample_var(n: int, s: int, ss: int, scale: int) -> float:
    # exact integer numerator, one float division
    if n < 2:
        return 0.0
    return (n * ss - s * s) / (n * (n - 1) * scale)


def plain_correlation(acc: AccumulatorState) -> CorrelationEstimate:
    if acc.n < 2:
        raise InsufficientDataError(f"plain correlation needs at least 2 events, got {acc.n}")
    var = _sample_var(acc.n, acc.sum_prod2, acc.sumsq_prod2, 16)
    return CorrelationEstimate(acc.sum_prod2 / (4 * acc.n), acc.n, math.sqrt(var / acc.n), acc.spin)


def grouped_correlation(acc: AccumulatorState) -> CorrelationEstimate:
    """Average over A-groups of ``m * mean(m_b | m_a = m)``, each group weighted 1/(2S+1).

    For spin 1/2 this is ``(mean(B|+) - mean(B|-)) / 2`` in +-1 units.  Group
    means use the realized counts, so it matches the plain estimator exactly
    only when every group holds the same number of events.
    """
    lattice = acc.spin.lattice()
    w = 1.0 / len(lattice)
    value = 0.0
    var = 0.0
    for m in lattice:
        g = acc.groups.get(m)
        if g is None or g.n == 0:
            raise InsufficientDataError(f"group m_a={m}/2 is empty")
        if m == 0:
            continue
        mean_b = g.sum_b / (2 * g.n)
        value += w * (m / 2) * mean_b
        var += (w * m / 2) ** 2 * _sample_var(g.n, g.sum_b, g.sumsq_b, 4) / g.n
    return CorrelationEstimate(value, acc.n, math.sqrt(var), acc.spin)


@dataclass(frozen=True)
class GroupResidual:
    two_m: int
    n: int
    value: float | None  # None for an empty group
    se: float | None


@dataclass(frozen=True)
class ConservationAudit:
    theta: float
    normalized: bool
    residuals: tuple[GroupResidual, ...]

    @property
    def max_abs(self) -> float | None:
        vals = [abs(r.value) for r in self.residuals if r.value is not None]
        return max(vals) if vals else None

    def residual(self, two_m: int) -> GroupResidual:
        for r in self.residuals:
            if r.two_m == two_m:
                return r
        raise KeyError(two_m)

    def consistent(self, z: float = 4.0, atol: float = 1e-12) -> bool:
        """All defined residuals lie within ``z`` standard errors of zero.

        ``atol`` absorbs rounding in groups whose outcome is deterministic (zero SE).
        """
        return all(abs(r.value) <= z * r.se + atol for r in self.residuals if r.value is not None)

    def as_dict(self) -> dict:
        return {
            "theta_rad": self.theta,
            "normalized": self.normalized,
            "max_abs_residual": self.max_abs,
            "groups": [
                {"two_m_a": r.two_m, "n": r.n, "residual": r.value, "se": r.se} for r in self.residuals
            ],
        }


def conservation_residual(acc: AccumulatorState, theta: float, normalized: bool = False) -> ConservationAudit:
    """Per-group ``mean(m_b | m_a = m) + m cos(theta)``.

    Residuals are in hbar units, or divided by S when ``normalized``.
    """
    c = math.cos(theta)
    scale = float(acc.spin.s) if normalized else 1.0
    out = []
    for m in acc.spin.lattice():
        g = acc.groups.get(m, GroupStats())
        if g.n == 0:
            out.append(GroupResidual(m, 0, None, None))
            continue
        r = g.sum_b / (2 * g.n) + (m / 2) * c
        se = math.sqrt(_sample_var(g.n, g.sum_b, g.sumsq_b, 4) / g.n)
        out.append(GroupResidual(m, g.n, r / scale, se / scale))
    return ConservationAudit(theta, normalized, tuple(out))


def chsh(p_ab: float, p_abp: float, p_apbp: float, p_apb: float, *, eps: float = 0.1) -> float:
    """``|P(a,b) - P(a,b')| + |P(a',b') + P(a',b)|`` for normalized correlations."""
    for p in (p_ab, p_abp, p_apbp, p_apb):
        if not math.isfinite(p) or abs(p) > 1.0 + eps:
            raise ValidationError(f"correlation {p!r} outside [-1-eps, 1+eps]")
    return abs(p_ab - p_abp) + abs(p_apbp + p_apb)


@dataclass(frozen=True)
class ChshEstimate:
    m: float
    se: float
    correlations: tuple[CorrelationEstimate, ...]

    def violates(self, z: float = 4.0) -> bool:
        """M exceeds the local bound 2 by more than ``z`` standard errors."""
        return self.m - 2.0 > z * self.se

    @property
    def verdict(self) -> str:
        return "violates" if self.violates() else "satisfies"

    def as_dict(self) -> dict:
        return {
            "M": self.m,
            "se": self.se,
            "verdict": self.verdict,
            "correlations": [c.as_dict() for c in self.correlations],
        }


def chsh_from_events(accs: Sequence[AccumulatorState]) -> ChshEstimate:
    """CHSH from accumulators ordered ``(a,b), (a,b'), (a',b'), (a',b)``."""
    if len(accs) != 4:
        raise ConfigurationError(f"need four accumulators, got {len(accs)}")
    ab, abp, apbp, apb = accs
    checks = [
        (ab.setting_a, abp.setting_a, "a"),
        (apbp.setting_a, apb.setting_a, "a'"),
        (ab.setting_b, apb.setting_b, "b"),
        (abp.setting_b, apbp.setting_b, "b'"),
    ]
    for x, y, name in checks:
        if x != y:
            raise ConfigurationError(f"setting {name} differs between accumulators")
    est = tuple(plain_correlation(acc) for acc in accs)
    m = chsh(*(e.normalized for e in est))
    se = math.sqrt(sum(e.normalized_se**2 for e in est))
    return ChshEstimate(m, se, est)


@dataclass(frozen=True)
class CurveRow:
    theta: float
    n: int
    estimate: float
    se: float
    analytic: float

    def as_dict(self) -> dict:
        return {"theta_rad": self.theta, "n": self.n, "estimate": self.estimate, "se": self.se, "analytic": self.analytic}


def correlation_curve(
    model: ModelSpec,
    thetas: Sequence[float],
    n_per_point: int,
    seed: int,
    *,
    normalized: bool = True,
    workers: int = 1,
) -> list[CurveRow]:
    """Simulate each grid angle (stream = grid index) and tabulate against the analytic curve."""
    rows = []
    a = Setting.from_angle(0.0)
    for i, theta in enumerate(thetas):
        if not 0.0 <= theta <= math.pi:
            raise ValidationError(f"grid angle {theta!r} outside [0, pi]")
        batch = simulate(model, a, Setting.from_angle(theta), n_per_point, seed, stream=i, workers=workers)
        est = plain_correlation(AccumulatorState.from_batch(batch))
        if normalized:
            value, se = est.normalized, est.normalized_se
        else:
            value, se = est.value, est.se
        rows.append(CurveRow(float(theta), n_per_point, value, se, analytic_corr(model, theta, normalized)))
    return rows

