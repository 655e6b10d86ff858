"""Settings, outcomes and the three sampling models.

Projections are stored doubled (``two_m = 2m``) so half-integer spins stay
exact.  Correlations are in units of hbar^2 unless a function says otherwise;
``normalized_corr`` maps them onto the +-1 convention.

Models
------
``QM_SINGLET_HALF``
    Spin-1/2 singlet, joint cell probabilities ``(1 - oa*ob*cos t) / 4``.
``LHV_LINEAR``
    Shared hidden unit vector ``h``; ``A = sign(a.h)``, ``B = -sign(b.h)``.
    Its correlation falls linearly from -1 at 0 to +1 at pi.
``CONSERVATION_SPIN``
    Spin-S source whose projection at A is uniform over the ``2S+1`` values
    and whose conditional at B has mean exactly ``-m_a cos t``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ValidationError

NORM_TOL = 1e-12


class Variant(str, enum.Enum):
    QM_SINGLET_HALF = "qm"
    LHV_LINEAR = "lhv"
    CONSERVATION_SPIN = "conservation"


class ConditionalKind(str, enum.Enum):
    """Support of the conservation-constrained conditional at B."""

    EXTREMAL = "extremal"
    ADJACENT = "adjacent"


@dataclass(frozen=True)
class Setting:
    """Analyzer direction.  ``angle`` is kept when built from a planar angle."""

    direction: tuple[float, float, float]
    angle: float | None = field(default=None, compare=True)

    def __post_init__(self):
        d = tuple(float(x) for x in self.direction)
        if len(d) != 3 or not all(math.isfinite(x) for x in d):
            raise ValidationError(f"setting direction must be 3 finite floats, got {self.direction!r}")
        norm = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"setting direction is not a unit vector (norm={norm!r})")
        object.__setattr__(self, "direction", d)

    @classmethod
    def from_angle(cls, theta: float) -> Setting:
        theta = float(theta)
        return cls((math.cos(theta), math.sin(theta), 0.0), theta)

    @property
    def planar_angle(self) -> float:
        """Angle in the x-y plane; raises for settings with a z component."""
        if self.angle is not None:
            return self.angle
        if abs(self.direction[2]) > NORM_TOL:
            raise ValidationError("setting is not coplanar with the x-y plane")
        return math.atan2(self.direction[1], self.direction[0])


@dataclass(frozen=True)
class SpinMagnitude:
    two_s: int = 1

    def __post_init__(self):
        if isinstance(self.two_s, bool) or int(self.two_s) != self.two_s or self.two_s < 1:
            raise ValidationError(f"two_s must be a positive integer, got {self.two_s!r}")
        object.__setattr__(self, "two_s", int(self.two_s))

    @property
    def s(self) -> Fraction:
        return Fraction(self.two_s, 2)

    def lattice(self) -> list[int]:
        """Doubled projections from +S down to -S in steps of 1."""
        return list(range(self.two_s, -self.two_s - 1, -2))

    def contains(self, two_m: int) -> bool:
        return abs(two_m) <= self.two_s and (two_m - self.two_s) % 2 == 0


HALF = SpinMagnitude(1)


@dataclass(frozen=True)
class Outcome:
    two_m: int

    @property
    def m(self) -> Fraction:
        return Fraction(self.two_m, 2)

    def check(self, spin: SpinMagnitude) -> Outcome:
        if not spin.contains(self.two_m):
            raise ValidationError(f"projection 2m={self.two_m} is not on the spin-{spin.s} lattice")
        return self


@dataclass(frozen=True)
class EventRecord:
    seq: int
    setting_a: Setting
    setting_b: Setting
    outcome_a: Outcome
    outcome_b: Outcome
    spin: SpinMagnitude = HALF

    def __post_init__(self):
        if self.seq < 0:
            raise ValidationError(f"seq must be non-negative, got {self.seq}")
        for o in (self.outcome_a, self.outcome_b):
            if not self.spin.contains(o.two_m):
                raise ValidationError(
                    f"event {self.seq}: projection 2m={o.two_m} is not on the spin-{self.spin.s} lattice"
                )
        # product bound |m_a m_b| <= S^2, checked in doubled units
        if abs(self.outcome_a.two_m * self.outcome_b.two_m) > self.spin.two_s**2:
            raise ValidationError(f"event {self.seq}: product outside [-S^2, S^2]")


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant
    spin: SpinMagnitude = HALF
    kind: ConditionalKind | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.variant is Variant.CONSERVATION_SPIN:
            object.__setattr__(self, "kind", ConditionalKind(self.kind or ConditionalKind.EXTREMAL))
        else:
            if self.spin.two_s != 1:
                raise ValidationError(f"{self.variant.value} model is defined for spin 1/2 only")
            if self.kind is not None:
                raise ValidationError("conditional kind applies to the conservation model only")

    @classmethod
    def qm(cls) -> ModelSpec:
        return cls(Variant.QM_SINGLET_HALF)

    @classmethod
    def lhv(cls) -> ModelSpec:
        return cls(Variant.LHV_LINEAR)

    @classmethod
    def conservation(cls, two_s: int = 1, kind: str | ConditionalKind = "extremal") -> ModelSpec:
        return cls(Variant.CONSERVATION_SPIN, SpinMagnitude(two_s), ConditionalKind(kind))

    @property
    def descriptor(self) -> str:
        if self.kind is None:
            return self.variant.value
        return f"{self.variant.value}:{self.kind.value}"

    @classmethod
    def from_descriptor(cls, text: str, two_s: int = 1) -> ModelSpec:
        variant, _, kind = text.strip().partition(":")
        try:
            v = Variant(variant)
        except ValueError:
            raise ValidationError(f"unknown model {variant!r}") from None
        if v is Variant.CONSERVATION_SPIN:
            return cls.conservation(two_s, kind or "extremal")
        if kind:
            raise ValidationError(f"model {variant!r} takes no conditional kind")
        return cls(v, SpinMagnitude(two_s))


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not (0.0 <= theta <= math.pi):
        raise ValidationError(f"theta must lie in [0, pi], got {theta!r}")
    return theta


def relative_angle(a: Setting, b: Setting) -> float:
    for s in (a, b):
        n = math.sqrt(sum(x * x for x in s.direction))
        if abs(n - 1.0) > NORM_TOL:
            raise ValidationError(f"setting direction is not a unit vector (norm={n!r})")
    dot = sum(x * y for x, y in zip(a.direction, b.direction))
    return math.acos(min(1.0, max(-1.0, dot)))


# -- spin-1/2 singlet ---------------------------------------------------------

def qm_joint_prob(theta: float, oa: int, ob: int) -> float:
    theta = _check_theta(theta)
    if oa not in (1, -1) or ob not in (1, -1):
        raise ValidationError(f"outcomes must be +-1, got ({oa}, {ob})")
    return (1.0 - oa * ob * math.cos(theta)) / 4.0


# cell order used by the batch sampler
_QM_CELLS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def sample_qm_pairs(theta: float, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` singlet pairs (+-1 units) by inverse CDF over the four cells."""
    theta = _check_theta(theta)
    probs = [qm_joint_prob(theta, oa, ob) for oa, ob in _QM_CELLS]
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(n), side="right")
    oa = np.array([c[0] for c in _QM_CELLS], dtype=np.int64)[idx]
    ob = np.array([c[1] for c in _QM_CELLS], dtype=np.int64)[idx]
    return oa, ob


def sample_qm_pair(theta: float, rng: np.random.Generator) -> tuple[int, int]:
    oa, ob = sample_qm_pairs(theta, 1, rng)
    return int(oa[0]), int(ob[0])


# -- local hidden variables ---------------------------------------------------

def lhv_linear_corr(theta: float) -> float:
    theta = _check_theta(theta)
    return -1.0 + 2.0 * theta / math.pi


def sample_lhv_pairs(
    a: Setting, b: Setting, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sign model over a uniform hidden direction; ties are redrawn."""
    va = np.asarray(a.direction)
    vb = np.asarray(b.direction)
    h = rng.standard_normal((n, 3))
    da, db = h @ va, h @ vb
    bad = np.flatnonzero((da == 0.0) | (db == 0.0))
    # a zero-norm draw also lands here since both dots vanish
    while bad.size:
        h2 = rng.standard_normal((bad.size, 3))
        da[bad], db[bad] = h2 @ va, h2 @ vb
        bad = bad[(da[bad] == 0.0) | (db[bad] == 0.0)]
    return np.sign(da).astype(np.int64), -np.sign(db).astype(np.int64)


def sample_lhv_pair(a: Setting, b: Setting, rng: np.random.Generator) -> tuple[int, int]:
    oa, ob = sample_lhv_pairs(a, b, 1, rng)
    return int(oa[0]), int(ob[0])


# -- conservation-constrained spin-S ------------------------------------------

def _two_point(m_a: Outcome, theta: float, spin: SpinMagnitude, kind: ConditionalKind):
    """Return (lo_2m, hi_2m, p_hi) with mean (in m units) equal to -m_a cos theta."""
    s = spin.two_s / 2.0
    target = -(m_a.two_m / 2.0) * math.cos(theta)
    if kind is ConditionalKind.EXTREMAL:
        return -spin.two_s, spin.two_s, min(1.0, max(0.0, 0.5 * (1.0 + target / s)))
    lo = -s + math.floor(target + s)
    if lo >= s:
        return spin.two_s, spin.two_s, 0.0
    # target + s can round up across a lattice point; the clamp costs < 1 ulp of mean
    return round(2 * lo), round(2 * lo) + 2, min(1.0, max(0.0, target - lo))


def conservation_conditional(
    m_a: Outcome, theta: float, spin: SpinMagnitude, kind: ConditionalKind | str = ConditionalKind.EXTREMAL
) -> dict[int, float]:
    """Distribution of ``2m_b`` over the whole lattice (zeros included)."""
    theta = _check_theta(theta)
    m_a.check(spin)
    lo, hi, p_hi = _two_point(m_a, theta, spin, ConditionalKind(kind))
    dist = dict.fromkeys(spin.lattice(), 0.0)
    dist[lo] += 1.0 - p_hi
    dist[hi] += p_hi
    return dist


def conservation_joint(
    theta: float, spin: SpinMagnitude, kind: ConditionalKind | str = ConditionalKind.EXTREMAL
) -> dict[tuple[int, int], float]:
    """Analytic joint law of the conservation sampler, keyed by (2m_a, 2m_b)."""
    lattice = spin.lattice()
    p_a = 1.0 / len(lattice)
    joint = {}
    for two_ma in lattice:
        cond = conservation_conditional(Outcome(two_ma), theta, spin, kind)
        for two_mb, p in cond.items():
            joint[two_ma, two_mb] = p_a * p
    return joint


def sample_conservation_pairs(
    theta: float, spin: SpinMagnitude, kind: ConditionalKind | str, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Doubled projections: uniform at A, two-point conditional at B."""
    theta = _check_theta(theta)
    kind = ConditionalKind(kind)
    lattice = np.array(spin.lattice(), dtype=np.int64)
    table = [_two_point(Outcome(int(m)), theta, spin, kind) for m in lattice]
    lo = np.array([t[0] for t in table], dtype=np.int64)
    hi = np.array([t[1] for t in table], dtype=np.int64)
    p_hi = np.array([t[2] for t in table])
    idx = rng.integers(0, lattice.size, size=n)
    u = rng.random(n)
    two_mb = np.where(u < p_hi[idx], hi[idx], lo[idx])
    return lattice[idx], two_mb


def sample_conservation_pair(
    theta: float, spin: SpinMagnitude, kind: ConditionalKind | str, rng: np.random.Generator
) -> tuple[Outcome, Outcome]:
    a, b = sample_conservation_pairs(theta, spin, kind, 1, rng)
    return Outcome(int(a[0])), Outcome(int(b[0]))


# -- analytic correlation functions -------------------------------------------

def spin_s_corr(spin: SpinMagnitude, theta: float) -> float:
    """-cos(theta) S(S+1)/3 in hbar^2 units."""
    theta = _check_theta(theta)
    s = spin.s
    return -math.cos(theta) * float(s * (s + 1) / 3)


def normalized_corr(value: float, spin: SpinMagnitude) -> float:
    return value / float(spin.s**2)


def analytic_corr(model: ModelSpec, theta: float, normalized: bool = False) -> float:
    """Model correlation at relative angle ``theta``."""
    if model.variant is Variant.QM_SINGLET_HALF:
        value = -math.cos(_check_theta(theta)) / 4.0
    elif model.variant is Variant.LHV_LINEAR:
        value = lhv_linear_corr(theta) / 4.0
    else:
        value = spin_s_corr(model.spin, theta)
    return normalized_corr(value, model.spin) if normalized else value


def sample_pairs(
    model: ModelSpec, a: Setting, b: Setting, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Doubled projections ``(2m_a, 2m_b)`` for ``n`` events of ``model``."""
    if model.variant is Variant.LHV_LINEAR:
        return sample_lhv_pairs(a, b, n, rng)
    theta = relative_angle(a, b)
    if model.variant is Variant.QM_SINGLET_HALF:
        return sample_qm_pairs(theta, n, rng)
    return sample_conservation_pairs(theta, model.spin, model.kind, n, rng)
