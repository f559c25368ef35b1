"""POI category selection.

PPCE ranking: average each POI category over the blocks of every gap
cluster, run PCA on the k x P cluster-mean matrix and score each category by
its eigenvalue-weighted absolute loadings. Gain-based and random selections
serve as baselines, and ``similarity_report`` tabulates within/between cluster
POI distances.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .core_data import DataError, PoiTable
from .gaps import POI_PREFIX

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (1e-6, 1.5e-6, 2e-6, 2.5e-6, 3e-6)


def cluster_poi_means(assignment: np.ndarray, poi: PoiTable, k: Optional[int] = None) -> np.ndarray:
    """k x P matrix of per-cluster mean POI counts; empty clusters give zero rows."""
    labels = np.asarray(assignment)
    if len(labels) != poi.n_blocks:
        raise DataError(f"assignment covers {len(labels)} blocks, POI table has {poi.n_blocks}")
    k = int(labels.max()) + 1 if k is None else k
    out = np.zeros((k, poi.n_categories))
    for c in range(k):
        members = labels == c
        if members.any():
            out[c] = poi.counts[members].mean(axis=0)
        else:
            log.warning("cluster %d is empty; its POI mean row is zero", c)
    return out


@dataclass
class PcaResult:
    eigenvalues: np.ndarray
    components: np.ndarray = field(repr=False)  # one unit row per retained eigenvalue
    column_means: np.ndarray = field(repr=False)
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def covariance(self, m: np.ndarray) -> np.ndarray:
        x = np.asarray(m, dtype=np.float64) - self.column_means
        return x.T @ x / (len(x) - 1)


def pca(m: np.ndarray, rel_cutoff: float = 1e-12) -> PcaResult:
    """PCA of a small-sample matrix through the SVD of its centered rows.

    Eigenvalues are s**2 / (k - 1). Those below ``rel_cutoff`` times the
    largest are dropped (and kept in ``dropped`` so the trace still adds up).
    Each component's largest-magnitude entry is made positive.
    """
    x = np.asarray(m, dtype=np.float64)
    k, p = x.shape
    if k < 2:
        raise ValueError("PCA needs at least two rows")
    means = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - means, full_matrices=False)
    lam = s ** 2 / (k - 1)
    keep = min(k - 1, p)
    top = lam[0] if len(lam) else 0.0
    n_keep = int(np.sum(lam[:keep] > rel_cutoff * top)) if top > 0 else 0
    comps = vt[:n_keep].copy()
    for row in comps:
        mag = np.abs(row)
        j = int(np.flatnonzero(mag == mag.max())[0])
        if row[j] < 0:
            row *= -1
    return PcaResult(lam[:n_keep].copy(), comps, means, lam[n_keep:].copy())


@dataclass
class PoiRanking:
    order: np.ndarray      # category indices, best first
    scores: np.ndarray     # score of order[i]
    method: str = "ppce"
    fallback: bool = False

    def __len__(self) -> int:
        return len(self.order)

    def to_csv(self, categories: Sequence[str]) -> str:
        out = ["rank,category_label,score,method\n"]
        for r, (j, s) in enumerate(zip(self.order, self.scores), start=1):
            out.append(f"{r},{categories[j]},{float(s)!r},{self.method}\n")
        return "".join(out)


def ranking_from_scores(scores: np.ndarray, method: str, fallback: bool = False) -> PoiRanking:
    scores = np.asarray(scores, dtype=np.float64)
    # lexsort: last key is primary -> descending score, then ascending index
    order = np.lexsort((np.arange(len(scores)), -scores))
    return PoiRanking(order, scores[order], method, fallback)


def rank_pois(p: PcaResult, totals: Optional[np.ndarray] = None,
              first_pc_only: bool = False) -> PoiRanking:
    """Score(j) = sum over components of eigenvalue * |loading_j|.

    Without retained components the ranking falls back to ``totals`` (total
    POI counts) and is flagged.
    """
    if len(p.eigenvalues) == 0:
        if totals is None:
            raise ValueError("no retained components and no fallback totals")
        log.warning("PCA retained no components; ranking by total POI count")
        return ranking_from_scores(np.asarray(totals, dtype=np.float64), "ppce", fallback=True)
    lam, comps = p.eigenvalues, p.components
    if first_pc_only:
        lam, comps = lam[:1], comps[:1]
    return ranking_from_scores(lam @ np.abs(comps), "ppce")


def ppce_rank(assignment: np.ndarray, poi: PoiTable, k: Optional[int] = None,
              first_pc_only: bool = False) -> PoiRanking:
    means = cluster_poi_means(assignment, poi, k)
    return rank_pois(pca(means), totals=poi.counts.sum(axis=0), first_pc_only=first_pc_only)


def select_top(r: PoiRanking, n: int) -> list[int]:
    if not 0 <= n <= len(r):
        raise ValueError(f"n={n} outside [0, {len(r)}]")
    return [int(j) for j in r.order[:n]]


def tier_select(r: PoiRanking, tier: str, n: int) -> list[int]:
    """Top ``n`` of the max/med/min third of the ranking."""
    thirds = np.array_split(r.order, 3)
    part = thirds[{"max": 0, "med": 1, "min": 2}[tier]]
    if n > len(part):
        raise ValueError(f"n={n} exceeds the {len(part)} categories of tier {tier}")
    return [int(j) for j in part[:n]]


def gain_rank(feature_gain: np.ndarray, feature_names: Sequence[str],
              categories: Sequence[str]) -> PoiRanking:
    """Rank POI categories by total split gain of their feature columns."""
    col = {lab: j for j, lab in enumerate(categories)}
    scores = np.zeros(len(categories))
    found = False
    for name, g in zip(feature_names, feature_gain):
        if name.startswith(POI_PREFIX):
            scores[col[name[len(POI_PREFIX):]]] = g
            found = True
    if not found:
        raise ValueError("model has no POI features")
    return ranking_from_scores(scores, "gain")


def random_select(n_categories: int, n: int, seed: int) -> list[int]:
    if not 0 <= n <= n_categories:
        raise ValueError(f"n={n} outside [0, {n_categories}]")
    rng = np.random.default_rng(seed)
    return [int(j) for j in rng.choice(n_categories, size=n, replace=False)]


def _poi_vectors(poi: PoiTable, normalize: bool) -> np.ndarray:
    x = poi.counts.astype(np.float64)
    if normalize:
        norm = np.linalg.norm(x, axis=1, keepdims=True)
        x = np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)
    return x


def _pair_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


@dataclass
class SimilarityTable:
    thresholds: tuple[float, ...]
    rows: list[tuple[str, Optional[np.ndarray]]]  # None = not applicable

    def to_csv(self) -> str:
        out = ["group," + ",".join(repr(t) for t in self.thresholds) + "\n"]
        for name, props in self.rows:
            cells = ["NA"] * len(self.thresholds) if props is None else [f"{v:.4f}" for v in props]
            out.append(f'"{name}",' + ",".join(cells) + "\n")
        return "".join(out)


def similarity_report(assignment: np.ndarray, poi: PoiTable,
                      thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                      normalize: bool = True) -> SimilarityTable:
    """Share of block pairs whose POI vectors lie within each distance threshold.

    One row per cluster (pairs inside it) and per cluster pair (cross pairs).
    Clusters with fewer than two blocks get a not-applicable row.
    """
    th = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(th) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    labels = np.asarray(assignment)
    x = _poi_vectors(poi, normalize)
    clusters = sorted(set(labels.tolist()))
    rows: list[tuple[str, Optional[np.ndarray]]] = []
    for c in clusters:
        members = x[labels == c]
        if len(members) < 2:
            rows.append((f"cluster {c}", None))
            continue
        d = _pair_dists(members, members)[np.triu_indices(len(members), 1)]
        rows.append((f"cluster {c}", (d[:, None] <= th).mean(axis=0)))
    for a, b in combinations(clusters, 2):
        d = _pair_dists(x[labels == a], x[labels == b]).ravel()
        rows.append((f"cluster {a}, {b}", (d[:, None] <= th).mean(axis=0)))
    return SimilarityTable(tuple(float(t) for t in th), rows)


def mean_distances(assignment: np.ndarray, poi: PoiTable, normalize: bool = True) -> tuple[float, float]:
    """Mean POI-vector distance over within-cluster and between-cluster block pairs."""
    labels = np.asarray(assignment)
    x = _poi_vectors(poi, normalize)
    d = _pair_dists(x, x)
    iu = np.triu_indices(len(x), 1)
    same = (labels[:, None] == labels[None, :])[iu]
    d = d[iu]
    within = float(d[same].mean()) if same.any() else float("nan")
    between = float(d[~same].mean()) if (~same).any() else float("nan")
    return within, between
