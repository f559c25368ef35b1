"""Supply-demand gap tensor and supervised item construction."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core_data import SLOT_SECONDS, SLOTS_PER_DAY, Calendar, DataError, OrderRecord, PoiTable

BASE_FEATURES = ("slot", "day_of_week", "holiday")
POI_PREFIX = "poi:"


@dataclass(frozen=True)
class GapTensor:
    """Invalid-order counts indexed ``[block, day, slot]``."""

    gaps: np.ndarray = field(repr=False)

    def __post_init__(self):
        gaps = np.asarray(self.gaps, dtype=np.int64)
        if gaps.ndim != 3 or gaps.shape[2] != SLOTS_PER_DAY:
            raise DataError(f"gap tensor must be B x D x {SLOTS_PER_DAY}, got {gaps.shape}")
        if (gaps < 0).any():
            raise DataError("negative gap count")
        gaps.setflags(write=False)
        object.__setattr__(self, "gaps", gaps)

    @property
    def n_blocks(self) -> int:
        return self.gaps.shape[0]

    @property
    def n_days(self) -> int:
        return self.gaps.shape[1]

    def __add__(self, other: "GapTensor") -> "GapTensor":
        return GapTensor(self.gaps + other.gaps)

    def to_csv(self) -> str:
        rows = ["block_index,day,slot,gap\n"]
        for b, d, s in zip(*np.nonzero(self.gaps)):
            rows.append(f"{b},{d},{s},{self.gaps[b, d, s]}\n")
        return "".join(rows)

    @classmethod
    def from_csv(cls, lines: Iterable[str], n_blocks: int, n_days: int) -> "GapTensor":
        gaps = np.zeros((n_blocks, n_days, SLOTS_PER_DAY), dtype=np.int64)
        it = iter(lines)
        next(it, None)
        for line in it:
            if line.strip():
                b, d, s, g = (int(v) for v in line.split(","))
                gaps[b, d, s] = g
        return cls(gaps)


@dataclass(frozen=True)
class FeatureConfig:
    lag_count: int = 3
    include_weather: bool = False
    include_traffic: bool = False
    selected_pois: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.lag_count <= SLOTS_PER_DAY:
            raise ValueError(f"lag_count must lie in [0, {SLOTS_PER_DAY}]")
        object.__setattr__(self, "selected_pois", tuple(int(p) for p in self.selected_pois))


@dataclass(frozen=True)
class Dataset:
    rows: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    feature_names: tuple[str, ...]
    keys: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.targets)
        if self.rows.shape != (n, len(self.feature_names)) or len(self.keys) != n:
            raise DataError("dataset rows, targets and keys disagree in length")
        if np.isnan(self.rows).any():
            raise DataError("NaN feature value")

    def __len__(self) -> int:
        return len(self.targets)

    def to_csv(self) -> str:
        out = [",".join([*self.feature_names, "target"]) + "\n"]
        for row, y in zip(self.rows, self.targets):
            out.append(",".join([*(repr(float(v)) for v in row), repr(float(y))]) + "\n")
        return "".join(out)


def order_cells(orders: Sequence[OrderRecord], start: dt.date) -> np.ndarray:
    """``(block, day, slot, answered)`` per order as an N x 4 integer array."""
    origin = dt.datetime.combine(start, dt.time())
    out = np.empty((len(orders), 4), dtype=np.int64)
    for i, rec in enumerate(orders):
        delta = rec.timestamp - origin
        out[i] = (rec.start_block, delta.days, delta.seconds // SLOT_SECONDS, rec.driver_id is not None)
    return out


def compute_gap_tensor(orders: Sequence[OrderRecord], n_blocks: int, n_days: int,
                       start: dt.date) -> GapTensor:
    """Count unanswered orders per (block, day, 10-minute slot)."""
    cells = order_cells(orders, start)
    if len(cells):
        bad = ((cells[:, 1] < 0) | (cells[:, 1] >= n_days)
               | (cells[:, 0] < 0) | (cells[:, 0] >= n_blocks))
        if bad.any():
            rec = orders[int(np.argmax(bad))]
            raise DataError(f"order {rec.order_id} at {rec.timestamp} lies outside "
                            f"{n_blocks} blocks x {n_days} days from {start}")
        invalid = cells[cells[:, 3] == 0]
    else:
        invalid = cells
    flat = (invalid[:, 0] * n_days + invalid[:, 1]) * SLOTS_PER_DAY + invalid[:, 2]
    counts = np.bincount(flat, minlength=n_blocks * n_days * SLOTS_PER_DAY)
    return GapTensor(counts.reshape(n_blocks, n_days, SLOTS_PER_DAY))


def build_items(gap: GapTensor, poi: PoiTable, cal: Calendar, cfg: FeatureConfig,
                day_range: tuple[int, int], weather: Optional[np.ndarray] = None,
                traffic: Optional[np.ndarray] = None) -> Dataset:
    """One item per (block, day, slot) in ``day_range``.

    Feature order: slot, day of week, holiday flag, gap lags t-1..t-L of the
    same block, one count per selected POI category, then weather and traffic
    columns when enabled and supplied. Lags cross day boundaries backwards;
    items whose lag window reaches before day 0 of the tensor are dropped.

    ``weather`` and ``traffic`` are D x 144 (city-wide) or B x D x 144 arrays.
    """
    d0, d1 = day_range
    if d1 <= d0:
        raise DataError(f"empty day range [{d0}, {d1})")
    if d0 < 0 or d1 > gap.n_days or d1 > len(cal):
        raise DataError(f"day range [{d0}, {d1}) outside the data")
    if poi.n_blocks != gap.n_blocks:
        raise DataError("POI table and gap tensor disagree on block count")
    for p in cfg.selected_pois:
        if not 0 <= p < poi.n_categories:
            raise DataError(f"selected POI index {p} out of range")

    B, L = gap.n_blocks, cfg.lag_count
    flat = gap.gaps.reshape(B, -1).astype(np.float64)
    t = np.arange(d0 * SLOTS_PER_DAY, d1 * SLOTS_PER_DAY)
    t = t[t >= L]
    days, slots = np.divmod(t, SLOTS_PER_DAY)
    holiday = cal.holiday_mask().astype(np.float64)
    dow = np.array([cal.weekday(d) for d in range(len(cal))], dtype=np.float64)

    names = list(BASE_FEATURES) + [f"lag_{j}" for j in range(1, L + 1)]
    names += [POI_PREFIX + poi.categories[p] for p in cfg.selected_pois]
    extras = []
    if cfg.include_weather and weather is not None:
        extras.append(("weather", np.asarray(weather, dtype=np.float64)))
    if cfg.include_traffic and traffic is not None:
        extras.append(("traffic", np.asarray(traffic, dtype=np.float64)))
    names += [n for n, _ in extras]

    n_t = len(t)
    rows = np.empty((B * n_t, len(names)), dtype=np.float64)
    for b in range(B):
        block = rows[b * n_t:(b + 1) * n_t]
        block[:, 0] = slots
        block[:, 1] = dow[days]
        block[:, 2] = holiday[days]
        for j in range(1, L + 1):
            block[:, 2 + j] = flat[b, t - j]
        col = 3 + L
        for p in cfg.selected_pois:
            block[:, col] = poi.counts[b, p]
            col += 1
        for _, arr in extras:
            series = arr[b] if arr.ndim == 3 else arr
            block[:, col] = series.reshape(-1)[t]
            col += 1
    targets = flat[:, t].reshape(-1)
    keys = np.column_stack([np.repeat(np.arange(B), n_t), np.tile(days, B), np.tile(slots, B)])
    return Dataset(rows, targets, tuple(names), keys)
