"""Input artifacts: orders, POI table, block map and calendar.

All four formats are line oriented UTF-8 text. Parsers accept any iterable of
lines (an open file works) and return immutable values.
"""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

log = logging.getLogger(__name__)

SLOTS_PER_DAY = 144
SLOT_SECONDS = 600
NULL = "NULL"
WORKDAY = "W"
HOLIDAY = "H"


class DataError(ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantError(RuntimeError):
    """An internal numerical invariant did not hold."""


@dataclass(frozen=True)
class TimeSlice:
    day: int
    slot: int

    def __post_init__(self):
        if not 0 <= self.slot < SLOTS_PER_DAY:
            raise ValueError(f"slot {self.slot} outside [0, {SLOTS_PER_DAY})")

    def __lt__(self, other: "TimeSlice") -> bool:
        return (self.day, self.slot) < (other.day, other.slot)

    def __le__(self, other: "TimeSlice") -> bool:
        return (self.day, self.slot) <= (other.day, other.slot)


@dataclass(frozen=True, slots=True)
class OrderRecord:
    order_id: str
    driver_id: Optional[str]
    passenger_id: str
    start_block: int
    dest_block: Optional[str]
    price: float
    timestamp: dt.datetime

    @property
    def answered(self) -> bool:
        return self.driver_id is not None


@dataclass(frozen=True)
class BlockMap:
    """Bijection between opaque block hashes and dense indices 0..B-1."""

    hashes: tuple[str, ...]

    def __post_init__(self):
        if not self.hashes:
            raise DataError("block map is empty")
        if len(set(self.hashes)) != len(self.hashes):
            raise DataError("block map has duplicate hashes")
        object.__setattr__(self, "_index", {h: i for i, h in enumerate(self.hashes)})

    def __len__(self) -> int:
        return len(self.hashes)

    def index(self, block_hash: str) -> int:
        try:
            return self._index[block_hash]
        except KeyError:
            raise DataError(f"unknown block hash {block_hash!r}") from None

    def __contains__(self, block_hash: str) -> bool:
        return block_hash in self._index

    def to_text(self) -> str:
        return "".join(f"{h}\t{i + 1}\n" for i, h in enumerate(self.hashes))


@dataclass(frozen=True)
class Calendar:
    """Day type (W or H) for each day ordinal counted from ``start``."""

    start: dt.date
    day_types: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.day_types)

    def is_holiday(self, day: int) -> bool:
        return self.day_types[day] == HOLIDAY

    def holiday_mask(self) -> np.ndarray:
        return np.array([t == HOLIDAY for t in self.day_types], dtype=bool)

    def weekday(self, day: int) -> int:
        return (self.start + dt.timedelta(days=int(day))).weekday()

    def date(self, day: int) -> dt.date:
        return self.start + dt.timedelta(days=int(day))

    def to_text(self) -> str:
        return "".join(f"{self.date(d).isoformat()}\t{t}\n" for d, t in enumerate(self.day_types))


@dataclass(frozen=True)
class PoiTable:
    """Per-block counts over the POI category universe.

    ``counts[b, p]`` is the number of POIs of category ``categories[p]`` in
    block ``b``. Categories are opaque labels, kept in lexicographic order.
    """

    categories: tuple[str, ...]
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[1] != len(self.categories):
            raise DataError(f"counts shape {counts.shape} does not match {len(self.categories)} categories")
        if len(set(self.categories)) != len(self.categories):
            raise DataError("duplicate POI category labels")
        if (counts < 0).any():
            raise DataError("negative POI count")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n_blocks(self) -> int:
        return self.counts.shape[0]

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PoiTable):
            return NotImplemented
        return self.categories == other.categories and np.array_equal(self.counts, other.counts)

    def to_text(self, blocks: BlockMap) -> str:
        lines = []
        for b, h in enumerate(blocks.hashes):
            tokens = [f"{self.categories[p]}:{c}" for p, c in enumerate(self.counts[b]) if c]
            lines.append(" ".join([h, *tokens]) + "\n")
        return "".join(lines)


@dataclass
class ParseStats:
    lines: int = 0
    skipped: int = 0
    errors: list[str] = field(default_factory=list)


def _lines(stream: Iterable[str]):
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if line.strip():
            yield lineno, line


def parse_blocks(stream: Iterable[str]) -> BlockMap:
    """Parse ``block_hash<TAB>1-based-index`` lines."""
    by_index: dict[int, str] = {}
    for lineno, line in _lines(stream):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError("expected 2 tab-separated fields", lineno)
        try:
            idx = int(parts[1])
        except ValueError:
            raise DataError(f"bad block index {parts[1]!r}", lineno) from None
        if idx in by_index:
            raise DataError(f"duplicate block index {idx}", lineno)
        by_index[idx] = parts[0]
    if sorted(by_index) != list(range(1, len(by_index) + 1)):
        raise DataError("block indices must be exactly 1..B")
    return BlockMap(tuple(by_index[i] for i in range(1, len(by_index) + 1)))


def parse_orders(stream: Iterable[str], blocks: BlockMap, strict: bool = True,
                 stats: Optional[ParseStats] = None) -> list[OrderRecord]:
    """Parse the tab-separated order log.

    In strict mode the first bad line raises ``DataError``; otherwise bad lines
    are skipped and tallied in ``stats``.
    """
    stats = stats if stats is not None else ParseStats()
    records = []
    for lineno, line in _lines(stream):
        stats.lines += 1
        try:
            records.append(_parse_order(line, lineno, blocks))
        except DataError as exc:
            if strict:
                raise
            stats.skipped += 1
            stats.errors.append(str(exc))
    if stats.skipped:
        log.warning("skipped %d of %d order lines", stats.skipped, stats.lines)
    return records


def _parse_order(line: str, lineno: int, blocks: BlockMap) -> OrderRecord:
    parts = line.split("\t")
    if len(parts) != 7:
        raise DataError(f"expected 7 tab-separated fields, got {len(parts)}", lineno)
    order_id, driver, passenger, start, dest, price, ts = parts
    if start not in blocks:
        raise DataError(f"unknown block hash {start!r}", lineno)
    try:
        price_val = float(price)
    except ValueError:
        raise DataError(f"bad price {price!r}", lineno) from None
    if not price_val >= 0:
        raise DataError(f"negative price {price!r}", lineno)
    try:
        # fromisoformat is much faster than strptime; the length/separator
        # check pins it to the exact "YYYY-MM-DD HH:MM:SS" layout
        if len(ts) != 19 or ts[10] != " ":
            raise ValueError
        when = dt.datetime.fromisoformat(ts)
    except ValueError:
        raise DataError(f"bad timestamp {ts!r}", lineno) from None
    return OrderRecord(
        order_id=order_id,
        driver_id=None if driver == NULL else driver,
        passenger_id=passenger,
        start_block=blocks.index(start),
        dest_block=None if dest == NULL else dest,
        price=price_val,
        timestamp=when,
    )


def format_order(rec: OrderRecord, blocks: BlockMap) -> str:
    return "\t".join([
        rec.order_id,
        rec.driver_id if rec.driver_id is not None else NULL,
        rec.passenger_id,
        blocks.hashes[rec.start_block],
        rec.dest_block if rec.dest_block is not None else NULL,
        f"{rec.price:.2f}",
        rec.timestamp.strftime("%Y-%m-%d %H:%M:%S"),
    ]) + "\n"


def parse_poi_table(stream: Iterable[str], blocks: Optional[BlockMap] = None) -> PoiTable:
    """Parse ``block_hash label:count ...`` lines into a dense table.

    With a block map, rows follow block index order and every registered block
    must be present (missing blocks get zero rows). Without one, rows follow
    the lexicographic order of the hashes.
    """
    rows: dict[str, dict[str, int]] = {}
    for lineno, line in _lines(stream):
        head, *tokens = line.split()
        if head in rows:
            raise DataError(f"duplicate block {head!r}", lineno)
        if blocks is not None and head not in blocks:
            raise DataError(f"unknown block hash {head!r}", lineno)
        row: dict[str, int] = {}
        for tok in tokens:
            label, sep, count = tok.rpartition(":")
            if not sep or not label:
                raise DataError(f"bad token {tok!r}", lineno)
            try:
                n = int(count)
            except ValueError:
                raise DataError(f"non-integer count in {tok!r}", lineno) from None
            if n < 0:
                raise DataError(f"negative count in {tok!r}", lineno)
            row[label] = row.get(label, 0) + n
        rows[head] = row

    order = list(blocks.hashes) if blocks is not None else sorted(rows)
    categories = tuple(sorted({lab for row in rows.values() for lab in row}))
    col = {lab: j for j, lab in enumerate(categories)}
    counts = np.zeros((len(order), len(categories)), dtype=np.int64)
    for i, h in enumerate(order):
        for lab, n in rows.get(h, {}).items():
            counts[i, col[lab]] = n
    return PoiTable(categories, counts)


def slice_of(timestamp: dt.datetime, dataset_start: dt.date) -> TimeSlice:
    origin = dt.datetime.combine(dataset_start, dt.time())
    if timestamp < origin:
        raise DataError(f"timestamp {timestamp} precedes dataset start {dataset_start}")
    delta = timestamp - origin
    return TimeSlice(delta.days, delta.seconds // SLOT_SECONDS)


def default_day_type(day: dt.date) -> str:
    return HOLIDAY if day.weekday() >= 5 else WORKDAY


def parse_calendar(stream: Iterable[str], start: dt.date, n_days: int) -> Calendar:
    """Parse ``YYYY-MM-DD<TAB>W|H`` overrides for the range [start, start+n_days).

    Days not listed default to W on Monday-Friday and H on weekends. Entries
    outside the range are ignored.
    """
    overrides: dict[dt.date, str] = {}
    for lineno, line in _lines(stream):
        parts = line.split()
        if len(parts) != 2:
            raise DataError("expected 'YYYY-MM-DD<TAB>W|H'", lineno)
        try:
            day = dt.date.fromisoformat(parts[0])
        except ValueError:
            raise DataError(f"bad date {parts[0]!r}", lineno) from None
        if parts[1] not in (WORKDAY, HOLIDAY):
            raise DataError(f"bad day flag {parts[1]!r}", lineno)
        overrides[day] = parts[1]
    days = [start + dt.timedelta(days=d) for d in range(n_days)]
    return Calendar(start, tuple(overrides.get(d, default_day_type(d)) for d in days))


def calendar_dates(stream: Iterable[str]) -> list[dt.date]:
    """Dates mentioned in a calendar file, used to infer the dataset range."""
    out = []
    for lineno, line in _lines(stream):
        try:
            out.append(dt.date.fromisoformat(line.split()[0]))
        except ValueError:
            raise DataError(f"bad date {line.split()[0]!r}", lineno) from None
    return out
