"""End-to-end runs: ingest, gaps, clustering, POI selection, boosting, evaluation."""
from __future__ import annotations

import contextlib
import csv
import datetime as dt
import fcntl
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .boosting import BoostParams, GbdtModel, train_dataset
from .clustering import Clustering, block_profiles, cluster_blocks
from .core_data import (BlockMap, Calendar, DataError, OrderRecord, ParseStats, PoiTable,
                        calendar_dates, parse_blocks, parse_calendar, parse_orders, parse_poi_table)
from .gaps import Dataset, FeatureConfig, GapTensor, build_items, compute_gap_tensor
from .metrics import EvalReport, average_reports, evaluate
from .selection import (PoiRanking, gain_rank, ppce_rank, random_select, select_top, similarity_report,
                        tier_select)
from .synth import SynthConfig, generate

log = logging.getLogger(__name__)

METHODS = ("ppce", "gain", "random", "none")
LEDGER_FIELDS = ("config_hash", "method", "n", "tier", "seed", "selected", "mae", "rmse", "accuracy",
                 "precision", "recall", "f1", "n_items")


@dataclass
class RunConfig:
    data_dir: Optional[str] = None
    synth: Optional[SynthConfig] = None
    lag_count: int = 3
    k: int = 5
    max_iter: int = 300
    tol: float = 1e-9
    standardize: bool = False
    single_regime: bool = False
    method: str = "ppce"
    n: int = 4
    tier: str = "max"
    first_pc_only: bool = False
    boost: BoostParams = field(default_factory=BoostParams)
    hit_tolerance: float = 1.0
    shortage_threshold: float = 1.0
    train_days: Optional[int] = None
    seed: int = 0
    repeat: int = 1
    best: int = 1
    out_dir: Optional[str] = None
    ledger: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.tier not in ("max", "med", "min"):
            raise ValueError("tier must be max, med or min")
        if self.data_dir is None and self.synth is None:
            raise ValueError("either a data directory or a synthetic config is required")
        if self.data_dir is not None and not Path(self.data_dir).is_dir():
            raise DataError(f"data directory {self.data_dir} does not exist")
        if not 1 <= self.best <= self.repeat:
            raise ValueError("need 1 <= best <= repeat")

    def config_hash(self) -> str:
        doc = asdict(self)
        doc.pop("out_dir")
        doc.pop("ledger")
        blob = json.dumps(doc, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Inputs:
    orders: list[OrderRecord]
    blocks: BlockMap
    poi: PoiTable
    calendar: Calendar
    stats: ParseStats = field(default_factory=ParseStats)

    @property
    def start(self) -> dt.date:
        return self.calendar.start

    @property
    def n_days(self) -> int:
        return len(self.calendar)


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        self.stage, self.cause = stage, cause
        super().__init__(f"[{stage}] {cause}")


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def load_inputs(data_dir: Path | str, strict: bool = True) -> Inputs:
    """Read orders.tsv, poi.txt, blocks.tsv and calendar.tsv from a directory.

    The dataset range spans from the earliest to the latest date seen in the
    calendar or the order timestamps.
    """
    d = Path(data_dir)
    for name in ("orders.tsv", "poi.txt", "blocks.tsv"):
        if not (d / name).is_file():
            raise DataError(f"missing input file {d / name}")
    with open(d / "blocks.tsv", encoding="utf-8") as fh:
        blocks = parse_blocks(fh)
    stats = ParseStats()
    with open(d / "orders.tsv", encoding="utf-8") as fh:
        orders = parse_orders(fh, blocks, strict=strict, stats=stats)
    with open(d / "poi.txt", encoding="utf-8") as fh:
        poi = parse_poi_table(fh, blocks)
    cal_path = d / "calendar.tsv"
    cal_text = cal_path.read_text(encoding="utf-8").splitlines() if cal_path.is_file() else []
    dates = calendar_dates(cal_text) + [r.timestamp.date() for r in orders]
    if not dates:
        raise DataError("cannot infer the dataset range: no calendar entries and no orders")
    start, end = min(dates), max(dates)
    cal = parse_calendar(cal_text, start, (end - start).days + 1)
    return Inputs(orders, blocks, poi, cal, stats)


def synth_inputs(cfg: SynthConfig) -> Inputs:
    city = generate(cfg)
    return Inputs(city.orders, city.blocks, city.poi, city.calendar)


def resolve_inputs(cfg: RunConfig) -> Inputs:
    with stage("ingest"):
        if cfg.data_dir is not None:
            return load_inputs(cfg.data_dir)
        return synth_inputs(cfg.synth)


def default_train_days(n_days: int) -> int:
    return max(1, n_days - max(1, round(n_days * 0.25)))


@dataclass
class Prepared:
    """Inputs plus the quantities shared by every run on the same split."""

    inputs: Inputs
    gap: GapTensor
    train_days: int
    clustering: Optional[Clustering] = None

    @property
    def test_range(self) -> tuple[int, int]:
        return self.train_days, self.inputs.n_days


def prepare(cfg: RunConfig, inputs: Optional[Inputs] = None) -> Prepared:
    inputs = inputs if inputs is not None else resolve_inputs(cfg)
    with stage("gap"):
        gap = compute_gap_tensor(inputs.orders, len(inputs.blocks), inputs.n_days, inputs.start)
    train_days = cfg.train_days if cfg.train_days is not None else default_train_days(inputs.n_days)
    if not 1 <= train_days < inputs.n_days:
        raise StageError("split", DataError(f"train_days={train_days} leaves no test days of {inputs.n_days}"))
    return Prepared(inputs, gap, train_days)


def cluster_train(cfg: RunConfig, prep: Prepared) -> Clustering:
    """Cluster blocks on gap profiles of the training days only."""
    if prep.clustering is None:
        with stage("cluster"):
            profiles = block_profiles(prep.gap, prep.inputs.calendar, (0, prep.train_days),
                                      single_regime=cfg.single_regime)
            prep.clustering = cluster_blocks(profiles, cfg.k, cfg.seed, cfg.max_iter, cfg.tol,
                                             scale=cfg.standardize)
    return prep.clustering


def items(prep: Prepared, fc: FeatureConfig, days: tuple[int, int]) -> Dataset:
    return build_items(prep.gap, prep.inputs.poi, prep.inputs.calendar, fc, days)


def rank(cfg: RunConfig, prep: Prepared, seed: int) -> Optional[PoiRanking]:
    """Full category ranking for the configured method (None for ``none``)."""
    poi = prep.inputs.poi
    with stage("select-poi"):
        if cfg.method == "ppce":
            clu = cluster_train(cfg, prep)
            return ppce_rank(clu.assignment, poi, cfg.k, first_pc_only=cfg.first_pc_only)
        if cfg.method == "gain":
            fc = FeatureConfig(cfg.lag_count, selected_pois=range(poi.n_categories))
            model = train_dataset(items(prep, fc, (0, prep.train_days)), cfg.boost)
            return gain_rank(model.feature_gain, model.feature_names, poi.categories)
        if cfg.method == "random":
            order = np.array(random_select(poi.n_categories, poi.n_categories, seed))
            return PoiRanking(order, np.zeros(len(order)), "random")
    return None


def select(cfg: RunConfig, ranking: Optional[PoiRanking]) -> list[int]:
    if ranking is None or cfg.n == 0:
        return []
    if ranking.method == "ppce" and cfg.tier != "max":
        return tier_select(ranking, cfg.tier, cfg.n)
    return select_top(ranking, cfg.n)


@dataclass
class RunResult:
    report: EvalReport
    selected: list[int]
    ranking: Optional[PoiRanking]
    model: GbdtModel
    clustering: Optional[Clustering]
    reports: list[EvalReport] = field(default_factory=list)


def fit_and_score(cfg: RunConfig, prep: Prepared, selected: Sequence[int],
                  boost: BoostParams) -> tuple[GbdtModel, EvalReport]:
    fc = FeatureConfig(cfg.lag_count, selected_pois=tuple(selected))
    with stage("train"):
        train = items(prep, fc, (0, prep.train_days))
        model = train_dataset(train, boost)
    with stage("eval"):
        test = items(prep, fc, prep.test_range)
        report = evaluate(model.predict(test.rows), test.targets, cfg.hit_tolerance, cfg.shortage_threshold)
    model.meta = {
        "lag_count": cfg.lag_count,
        "selected_labels": [prep.inputs.poi.categories[j] for j in selected],
        "train_days": prep.train_days,
        "start": prep.inputs.start.isoformat(),
    }
    return model, report


def run(cfg: RunConfig, prep: Optional[Prepared] = None) -> RunResult:
    """One pipeline run; with ``repeat`` > 1 the best ``best`` runs by accuracy are averaged."""
    prep = prep if prep is not None else prepare(cfg)
    if cfg.n > prep.inputs.poi.n_categories:
        raise StageError("select-poi", ValueError(f"n={cfg.n} exceeds {prep.inputs.poi.n_categories} categories"))
    runs = []
    for r in range(cfg.repeat):
        ranking = rank(cfg, prep, cfg.seed + r)
        with stage("select-poi"):
            selected = select(cfg, ranking)
        boost = replace(cfg.boost, seed=cfg.boost.seed + r)
        model, report = fit_and_score(cfg, prep, selected, boost)
        runs.append((report, selected, ranking, model))
    runs.sort(key=lambda t: -t[0].accuracy)
    best = [t[0] for t in runs[:cfg.best]]
    report, selected, ranking, model = runs[0]
    if cfg.repeat > 1:
        report = average_reports(best)
    clustering = prep.clustering if cfg.method == "ppce" else None
    return RunResult(report, selected, ranking, model, clustering, [t[0] for t in runs])


def _append_ledger(path: Path, row: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8", newline="") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            new = fh.tell() == 0
            w = csv.DictWriter(fh, fieldnames=LEDGER_FIELDS)
            if new:
                w.writeheader()
            w.writerow(row)
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def ledger_row(cfg: RunConfig, res: RunResult, poi: PoiTable) -> dict:
    rep = res.report
    return {
        "config_hash": cfg.config_hash(), "method": cfg.method, "n": cfg.n, "tier": cfg.tier,
        "seed": cfg.seed, "selected": ";".join(poi.categories[j] for j in res.selected),
        "mae": repr(rep.mae), "rmse": repr(rep.rmse), "accuracy": repr(rep.accuracy),
        "precision": repr(rep.precision), "recall": repr(rep.recall), "f1": repr(rep.f1), "n_items": rep.n,
    }


def report_json(cfg: RunConfig, res: RunResult, poi: PoiTable, timestamp: Optional[str] = None) -> str:
    created = timestamp if timestamp is not None else dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    return res.report.to_json(
        config_hash=cfg.config_hash(), method=cfg.method, n_selected=cfg.n, tier=cfg.tier, seed=cfg.seed,
        selected=[poi.categories[j] for j in res.selected], created_at=created) + "\n"


def write_outputs(cfg: RunConfig, res: RunResult, prep: Prepared, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    poi = prep.inputs.poi
    files = {"model.json": res.model.to_json() + "\n", "report.json": report_json(cfg, res, poi)}
    if res.ranking is not None:
        files["ranking.csv"] = res.ranking.to_csv(poi.categories)
    if res.clustering is not None:
        files["clustering.csv"] = res.clustering.to_csv()
        files["centroids.csv"] = res.clustering.centroids_csv()
        files["similarity.csv"] = similarity_report(res.clustering.assignment, poi).to_csv()
    written = []
    for name, text in files.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def run_to_disk(cfg: RunConfig, prep: Optional[Prepared] = None) -> RunResult:
    """Run and write artifacts under ``cfg.out_dir``; partial artifacts are removed on failure."""
    if cfg.out_dir is None:
        raise ValueError("out_dir is required")
    out_dir = Path(cfg.out_dir)
    written: list[Path] = []
    try:
        prep = prep if prep is not None else prepare(cfg)
        res = run(cfg, prep)
        written = write_outputs(cfg, res, prep, out_dir)
        ledger = Path(cfg.ledger) if cfg.ledger else out_dir / "ledger.csv"
        _append_ledger(ledger, ledger_row(cfg, res, prep.inputs.poi))
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return res


def sweep(cfg: RunConfig, n_list: Sequence[int], methods: Sequence[str]) -> Path:
    """One run per (method, n) on a shared split; returns the ledger path."""
    if cfg.out_dir is None:
        raise ValueError("out_dir is required")
    out = Path(cfg.out_dir)
    ledger = Path(cfg.ledger) if cfg.ledger else out / "ledger.csv"
    prep = prepare(cfg)
    for method in methods:
        for n in n_list:
            if n > prep.inputs.poi.n_categories:
                raise StageError("sweep", ValueError(f"n={n} exceeds {prep.inputs.poi.n_categories} categories"))
            sub = replace(cfg, method=method if n > 0 else "none", n=n,
                          out_dir=str(out / f"{method}_n{n}"), ledger=str(ledger))
            run_to_disk(sub, prep)
    return ledger


def read_ledger(path: Path | str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def evaluate_model(model: GbdtModel, inputs: Inputs, hit_tolerance: float = 1.0,
                   shortage_threshold: float = 1.0, test_days: Optional[tuple[int, int]] = None) -> EvalReport:
    """Score a saved model on the days after its training window."""
    meta = model.meta
    col = {lab: j for j, lab in enumerate(inputs.poi.categories)}
    try:
        selected = [col[lab] for lab in meta.get("selected_labels", [])]
    except KeyError as exc:
        raise DataError(f"model uses POI category {exc.args[0]!r} missing from the POI table") from None
    gap = compute_gap_tensor(inputs.orders, len(inputs.blocks), inputs.n_days, inputs.start)
    days = test_days if test_days is not None else (meta.get("train_days", 0), inputs.n_days)
    fc = FeatureConfig(meta.get("lag_count", 3), selected_pois=selected)
    data = build_items(gap, inputs.poi, inputs.calendar, fc, days)
    if data.feature_names != model.feature_names:
        raise DataError("dataset features do not match the model's features")
    return evaluate(model.predict(data.rows), data.targets, hit_tolerance, shortage_threshold)

