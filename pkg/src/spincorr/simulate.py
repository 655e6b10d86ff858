"""Seeded, order-independent event generation.

Events are produced in fixed blocks of ``BLOCK_SIZE``.  Block ``k`` of stream
``stream`` draws from a Philox generator keyed by
``SeedSequence(seed, spawn_key=(stream, k))``, so the event with sequence
number ``seq`` depends only on ``(seed, stream, seq // BLOCK_SIZE)`` and the
model parameters.  Workers may take blocks in any order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ValidationError
from .models import EventRecord, ModelSpec, Outcome, Setting, SpinMagnitude, sample_pairs

BLOCK_SIZE = 1 << 16


def block_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class EventBatch:
    """Columnar events sharing one setting pair."""

    seq: np.ndarray
    setting_a: Setting
    setting_b: Setting
    two_m_a: np.ndarray
    two_m_b: np.ndarray
    spin: SpinMagnitude

    def __len__(self) -> int:
        return int(self.seq.size)

    def records(self) -> Iterator[EventRecord]:
        for s, a, b in zip(self.seq.tolist(), self.two_m_a.tolist(), self.two_m_b.tolist()):
            yield EventRecord(s, self.setting_a, self.setting_b, Outcome(a), Outcome(b), self.spin)


def _block(model, a, b, seed, stream, k, n):
    start = k * BLOCK_SIZE
    size = min(BLOCK_SIZE, n - start)
    return sample_pairs(model, a, b, size, block_rng(seed, k, stream))


def simulate(
    model: ModelSpec,
    setting_a: Setting,
    setting_b: Setting,
    n: int,
    seed: int,
    *,
    stream: int = 0,
    workers: int = 1,
) -> EventBatch:
    """Generate ``n`` events with seq ``0..n-1``; output is independent of ``workers``."""
    if n < 0:
        raise ValidationError(f"event count must be non-negative, got {n}")
    nblocks = -(-n // BLOCK_SIZE)
    args = [(model, setting_a, setting_b, seed, stream, k, n) for k in range(nblocks)]
    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda p: _block(*p), args))
    else:
        parts = [_block(*p) for p in args]
    if parts:
        two_a = np.concatenate([p[0] for p in parts])
        two_b = np.concatenate([p[1] for p in parts])
    else:
        two_a = two_b = np.zeros(0, dtype=np.int64)
    return EventBatch(np.arange(n, dtype=np.int64), setting_a, setting_b, two_a, two_b, model.spin)


def simulate_angles(model: ModelSpec, theta_a: float, theta_b: float, n: int, seed: int, **kw) -> EventBatch:
    return simulate(model, Setting.from_angle(theta_a), Setting.from_angle(theta_b), n, seed, **kw)
