"""Synthetic city generator with planted influential POI categories.

Blocks belong to latent archetypes with distinct POI intensities. Planted
categories get archetype dependent counts (up to ~15 per block), the other
categories archetype independent Poisson noise with per-category means in
[0.5, 4]. Unanswered orders per (block, day, slot) are Poisson with mean

    base_rate * shape(slot) * (1 + poi_effect * load(block)) * holiday_scale^[holiday]

times lognormal rate noise with unit mean, where ``load`` is the block's
planted POI total divided by the largest such total. All randomness comes
from numpy's PCG64 bit generator seeded with ``SynthConfig.seed``.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core_data import (SLOT_SECONDS, SLOTS_PER_DAY, BlockMap, Calendar, OrderRecord, PoiTable,
                        default_day_type, format_order)

DEFAULT_START = dt.date(2016, 2, 23)


@dataclass(frozen=True)
class SynthConfig:
    blocks: int = 20
    days: int = 14
    categories: int = 60
    planted: int = 4
    base_rate: float = 2.0
    poi_effect: float = 0.5
    noise: float = 0.2
    holiday_scale: float = 0.6
    seed: int = 0
    archetypes: Optional[int] = None  # None: drawn from 3..5
    supply_rate: float = 1.5          # answered orders relative to base_rate
    start: str = DEFAULT_START.isoformat()

    def __post_init__(self):
        if self.planted > self.categories:
            raise ValueError(f"planted={self.planted} exceeds categories={self.categories}")
        if min(self.blocks, self.days, self.categories) < 1 or self.planted < 0:
            raise ValueError("blocks, days and categories must be positive")
        if min(self.base_rate, self.poi_effect, self.noise, self.holiday_scale, self.supply_rate) < 0:
            raise ValueError("rates must be non-negative")
        if self.archetypes is not None and not 1 <= self.archetypes <= self.blocks:
            raise ValueError("archetypes must lie in [1, blocks]")


@dataclass
class GroundTruth:
    planted_ids: list[int]
    block_cluster: np.ndarray
    expected_gap: np.ndarray = field(repr=False)  # B x 144 x 2 (workday, holiday)
    intensity: np.ndarray = field(repr=False)

    def to_json(self, cfg: SynthConfig, poi: PoiTable) -> str:
        return json.dumps({
            "planted_ids": self.planted_ids,
            "planted_labels": [poi.categories[j] for j in self.planted_ids],
            "archetypes": self.block_cluster.tolist(),
            "archetype_intensity": self.intensity.tolist(),
            "config": asdict(cfg),
        }, indent=1)


@dataclass
class SynthCity:
    orders: list[OrderRecord]
    blocks: BlockMap
    poi: PoiTable
    calendar: Calendar
    truth: GroundTruth
    config: SynthConfig


def time_shape() -> np.ndarray:
    """Daily demand shape with morning and evening rush-hour bumps, mean 1."""
    h = (np.arange(SLOTS_PER_DAY) + 0.5) / 6.0
    s = 0.25 + np.exp(-0.5 * ((h - 8.0) / 1.5) ** 2) + 1.2 * np.exp(-0.5 * ((h - 18.0) / 2.0) ** 2)
    return s / s.mean()


def _labels(n: int) -> list[str]:
    # cascading "top#sub" ids, ten subcategories per top level
    return sorted(f"{j // 10 + 1}#{j % 10 + 1}" for j in range(n))


def generate(cfg: SynthConfig = SynthConfig()) -> SynthCity:
    rng = np.random.default_rng(cfg.seed)
    B, D, P = cfg.blocks, cfg.days, cfg.categories
    start = dt.date.fromisoformat(cfg.start)

    n_arch = cfg.archetypes if cfg.archetypes is not None else int(rng.integers(3, 6))
    n_arch = min(n_arch, B)
    arch = np.concatenate([np.arange(n_arch), rng.integers(n_arch, size=B - n_arch)])
    arch = rng.permutation(arch)
    intensity = rng.permutation(np.linspace(0.0, 1.0, n_arch)) if n_arch > 1 else np.ones(1)

    planted = np.sort(rng.choice(P, size=cfg.planted, replace=False))
    counts = np.empty((B, P), dtype=np.int64)
    noise_mean = np.exp(rng.uniform(np.log(0.05), np.log(4.0), size=P))
    counts[:] = rng.poisson(np.broadcast_to(noise_mean, (B, P)))
    level = 1.0 + 14.0 * intensity[:, None] * rng.uniform(0.6, 1.4, size=(n_arch, cfg.planted))
    counts[:, planted] = rng.poisson(level[arch])
    # the POI file lists only nonzero counts; keep every category observable
    absent = np.flatnonzero(counts.sum(axis=0) == 0)
    counts[rng.integers(B, size=len(absent)), absent] = 1
    poi = PoiTable(tuple(_labels(P)), counts)

    load = counts[:, planted].sum(axis=1).astype(np.float64)
    load = load / load.mean() if load.max() > 0 else np.zeros(B)
    shape = time_shape()
    workday = cfg.base_rate * shape[None, :] * (1.0 + cfg.poi_effect * load[:, None])
    expected = np.stack([workday, workday * cfg.holiday_scale], axis=2)

    days = [start + dt.timedelta(days=d) for d in range(D)]
    cal = Calendar(start, tuple(default_day_type(d) for d in days))
    hol = cal.holiday_mask().astype(int)

    def lognormal(size):
        s = cfg.noise
        return np.exp(rng.normal(-0.5 * s * s, s, size=size)) if s > 0 else np.ones(size)

    # cells in (day, slot, block) order
    mean_gap = expected[:, :, hol].transpose(2, 1, 0)                      # D x 144 x B
    n_gap = rng.poisson(mean_gap * lognormal(mean_gap.shape))
    supply = cfg.supply_rate * cfg.base_rate * shape[None, :, None] * np.where(hol, cfg.holiday_scale, 1.0)[:, None, None]
    n_ok = rng.poisson(np.broadcast_to(supply, mean_gap.shape) * lognormal(mean_gap.shape))

    blocks = BlockMap(tuple(hashlib.md5(f"{cfg.seed}:{b}".encode()).hexdigest() for b in range(B)))
    orders = _emit_orders(rng, blocks, start, n_gap, n_ok)
    truth = GroundTruth(planted.tolist(), arch, expected, intensity)
    return SynthCity(orders, blocks, poi, cal, truth, cfg)


def _emit_orders(rng, blocks: BlockMap, start: dt.date, n_gap: np.ndarray, n_ok: np.ndarray) -> list[OrderRecord]:
    D, S, B = n_gap.shape
    per_cell = (n_gap + n_ok).ravel()
    total = int(per_cell.sum())
    cell = np.repeat(np.arange(per_cell.size), per_cell)
    # within a cell the first n_gap orders are the unanswered ones
    first = np.repeat(np.cumsum(per_cell) - per_cell, per_cell)
    answered = (np.arange(total) - first) >= np.repeat(n_gap.ravel(), per_cell)
    day, rem = np.divmod(cell, S * B)
    slot, block = np.divmod(rem, B)
    secs = day * 86400 + slot * SLOT_SECONDS + rng.integers(0, SLOT_SECONDS, size=total)
    drivers = rng.integers(0, 5000, size=total)
    passengers = rng.integers(0, 50000, size=total)
    dest = rng.integers(-1, B, size=total)  # -1 -> no destination recorded
    price = np.round(rng.uniform(5.0, 60.0, size=total), 2)

    origin = dt.datetime.combine(start, dt.time())
    td = dt.timedelta
    hashes = blocks.hashes
    return [
        OrderRecord(
            order_id=f"o{i:08d}",
            driver_id=f"d{drivers[i]}" if answered[i] else None,
            passenger_id=f"p{passengers[i]}",
            start_block=int(block[i]),
            dest_block=hashes[dest[i]] if dest[i] >= 0 else None,
            price=float(price[i]),
            timestamp=origin + td(seconds=int(secs[i])),
        )
        for i in range(total)
    ]


def write_city(city: SynthCity, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "orders.tsv": "".join(format_order(r, city.blocks) for r in city.orders),
        "poi.txt": city.poi.to_text(city.blocks),
        "blocks.tsv": city.blocks.to_text(),
        "calendar.tsv": city.calendar.to_text(),
        "truth.json": city.truth.to_json(city.config, city.poi) + "\n",
    }
    paths = []
    for name, text in files.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths
