"""CSV event files.

Layout::

    # format: spincorr-events
    # version: 1
    # model: qm
    # two_s: 1
    # seed: 7
    # stream: 0
    # count: 2
    seq,theta_a_rad,theta_b_rad,outcome_a_2m,outcome_b_2m
    0,0,0.785398163397,1,-1
    1,0,0.785398163397,-1,1

Angles carry 12 significant digits; lines end in LF; rows are in ascending
seq.  The file is written to a temporary sibling first so the header count is
exact and a failed write never leaves a partial file behind.
"""

from __future__ import annotations

import os
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError, ValidationError
from .estimators import AccumulatorState
from .models import EventRecord, ModelSpec, Outcome, Setting, SpinMagnitude
from .simulate import EventBatch

FORMAT_NAME = "spincorr-events"
FORMAT_VERSION = 1
COLUMNS = ("seq", "theta_a_rad", "theta_b_rad", "outcome_a_2m", "outcome_b_2m")
_HEADER_KEYS = ("format", "version", "model", "two_s", "seed", "stream", "count")


@dataclass(frozen=True)
class EventFileHeader:
    model: ModelSpec
    seed: int
    count: int
    stream: int = 0
    version: int = FORMAT_VERSION

    @property
    def two_s(self) -> int:
        return self.model.spin.two_s

    def lines(self) -> list[str]:
        return [
            f"# format: {FORMAT_NAME}\n",
            f"# version: {self.version}\n",
            f"# model: {self.model.descriptor}\n",
            f"# two_s: {self.two_s}\n",
            f"# seed: {self.seed}\n",
            f"# stream: {self.stream}\n",
            f"# count: {self.count}\n",
        ]


def format_angle(theta: float) -> str:
    return f"{theta:.12g}"


def _rows(events: Iterable[EventRecord] | EventBatch, spin: SpinMagnitude) -> Iterator[str]:
    if isinstance(events, EventBatch):
        if events.spin != spin:
            raise ValidationError("event batch spin differs from the model spin")
        ta = format_angle(events.setting_a.planar_angle)
        tb = format_angle(events.setting_b.planar_angle)
        a, b = events.two_m_a, events.two_m_b
        bad = np.flatnonzero((np.abs(a) > spin.two_s) | ((a - spin.two_s) % 2 != 0)
                             | (np.abs(b) > spin.two_s) | ((b - spin.two_s) % 2 != 0))
        if bad.size:
            raise ValidationError(f"event {int(events.seq[bad[0]])}: projection off the spin lattice")
        prev = -1
        for s, x, y in zip(events.seq.tolist(), a.tolist(), b.tolist()):
            if s <= prev:
                raise ValidationError(f"event {s}: seq not ascending")
            prev = s
            yield f"{s},{ta},{tb},{x},{y}\n"
        return
    prev = -1
    for rec in events:
        if rec.spin != spin:
            raise ValidationError(f"event {rec.seq}: spin differs from the model spin")
        if rec.seq <= prev:
            raise ValidationError(f"event {rec.seq}: seq not ascending")
        prev = rec.seq
        yield (
            f"{rec.seq},{format_angle(rec.setting_a.planar_angle)},{format_angle(rec.setting_b.planar_angle)},"
            f"{rec.outcome_a.two_m},{rec.outcome_b.two_m}\n"
        )


def write_events(
    events: Iterable[EventRecord] | EventBatch,
    destination: str | os.PathLike,
    *,
    model: ModelSpec,
    seed: int,
    stream: int = 0,
) -> int:
    """Write events with a full header; returns the number of rows written."""
    dest = Path(destination)
    count = 0
    with tempfile.TemporaryFile("w+", newline="\n") as body:
        for line in _rows(events, model.spin):
            body.write(line)
            count += 1
        body.seek(0)
        header = EventFileHeader(model, int(seed), count, int(stream))
        fd, tmp = tempfile.mkstemp(dir=dest.parent or ".", prefix=dest.name + ".", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="\n") as out:
                out.writelines(header.lines())
                out.write(",".join(COLUMNS) + "\n")
                shutil.copyfileobj(body, out)
            os.replace(tmp, dest)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    return count


def _parse_header(lines: list[tuple[int, str]]) -> EventFileHeader:
    fields = {}
    for lineno, line in lines:
        key, sep, value = line[1:].partition(":")
        if not sep:
            raise DataError(f"line {lineno}: malformed header line")
        fields[key.strip()] = value.strip()
    missing = [k for k in _HEADER_KEYS if k not in fields]
    if missing:
        raise DataError(f"header is missing {', '.join(missing)}")
    if fields["format"] != FORMAT_NAME:
        raise DataError(f"not an event file (format {fields['format']!r})")
    try:
        version = int(fields["version"])
        two_s = int(fields["two_s"])
        seed, stream, count = int(fields["seed"]), int(fields["stream"]), int(fields["count"])
    except ValueError as exc:
        raise DataError(f"bad numeric header field: {exc}") from None
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported format version {version}")
    try:
        model = ModelSpec.from_descriptor(fields["model"], two_s)
    except ValidationError as exc:
        raise DataError(f"bad model header: {exc}") from None
    return EventFileHeader(model, seed, count, stream, version)


class _Reader:
    """Line-level parser shared by ``read_events`` and ``accumulate_file``."""

    def __init__(self, source):
        self.f = open(source, "r", newline="")
        head = []
        lineno = 0
        for line in self.f:
            lineno += 1
            if line.startswith("#"):
                head.append((lineno, line.rstrip("\r\n")))
                continue
            if line.rstrip("\r\n") != ",".join(COLUMNS):
                self.f.close()
                raise DataError(f"line {lineno}: expected column header {','.join(COLUMNS)!r}")
            break
        else:
            self.f.close()
            raise DataError("missing column header")
        try:
            self.header = _parse_header(head)
        except DataError:
            self.f.close()
            raise
        self.lineno = lineno
        self.spin = self.header.model.spin

    def rows(self) -> Iterator[tuple[int, float, float, int, int]]:
        """Validated ``(seq, theta_a, theta_b, 2m_a, 2m_b)`` tuples; checks the count at EOF."""
        n = 0
        spin = self.spin
        try:
            for line in self.f:
                self.lineno += 1
                parts = line.rstrip("\r\n").split(",")
                if len(parts) != 5:
                    raise DataError(f"line {self.lineno}: expected 5 fields, got {len(parts)}")
                try:
                    seq, ta, tb, a, b = int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3]), int(parts[4])
                except ValueError:
                    raise DataError(f"line {self.lineno}: unparsable row {line.strip()!r}") from None
                if not (spin.contains(a) and spin.contains(b)):
                    raise DataError(f"event {seq}: projection off the spin-{spin.s} lattice")
                n += 1
                yield seq, ta, tb, a, b
        finally:
            self.f.close()
        if n != self.header.count:
            raise DataError(f"header declares {self.header.count} events, body has {n}")


def read_events(source: str | os.PathLike) -> tuple[EventFileHeader, Iterator[EventRecord]]:
    """Return the header and a lazy iterator of records in file order."""
    reader = _Reader(source)

    def records():
        cache: dict[float, Setting] = {}
        for seq, ta, tb, a, b in reader.rows():
            for t in (ta, tb):
                if t not in cache:
                    cache[t] = Setting.from_angle(t)
            sa, sb = cache[ta], cache[tb]
            try:
                yield EventRecord(seq, sa, sb, Outcome(a), Outcome(b), reader.spin)
            except ValidationError as exc:
                raise DataError(str(exc)) from None

    return reader.header, records()


def accumulate_file(source: str | os.PathLike, chunk: int = 1 << 16) -> AccumulatorState:
    """Stream a single-setting-pair file into an accumulator in constant memory."""
    reader = _Reader(source)
    acc = None
    angles = None
    buf_a: list[int] = []
    buf_b: list[int] = []
    for seq, ta, tb, a, b in reader.rows():
        if angles is None:
            angles = (ta, tb)
            acc = AccumulatorState(Setting.from_angle(ta), Setting.from_angle(tb), reader.spin)
        elif (ta, tb) != angles:
            raise DataError(f"event {seq}: settings differ from the first row; one setting pair per file")
        buf_a.append(a)
        buf_b.append(b)
        if len(buf_a) >= chunk:
            acc.update(buf_a, buf_b)
            buf_a, buf_b = [], []
    if acc is None:
        raise DataError(f"{source}: no events to accumulate")
    acc.update(buf_a, buf_b)
    return acc


def read_header(source: str | os.PathLike) -> EventFileHeader:
    reader = _Reader(source)
    reader.f.close()
    return reader.header
