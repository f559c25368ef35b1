"""Second-order gradient-boosted regression trees (squared-error loss).

Each round fits one tree to the gradient g = pred - y and hessian h = 1 with
exact greedy split search. For a node with gradient sum G and hessian sum H
the optimal leaf weight is -G / (H + lambda), and a split into (L, R) gains

    0.5 * [G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda) - G^2 / (H + lambda)] - gamma

Candidate thresholds are midpoints between consecutive distinct feature
values present in the node; a row goes right when ``x >= threshold``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .core_data import DataError

LEAF = -1
_TIE_EPS = 1e-12


@dataclass(frozen=True)
class BoostParams:
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 6
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    seed: int = 0
    subsample: float = 1.0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ValueError("reg_lambda, gamma and min_child_weight must be >= 0")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must lie in (0, 1]")


@dataclass
class RegressionTree:
    """Flat preorder node arrays. ``feature[i] == LEAF`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    sum_grad: np.ndarray
    sum_hess: np.ndarray

    def __len__(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self), dtype=int)
        for i in range(len(self)):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature == LEAF)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(len(x), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while len(active):
            nd = node[active]
            go_right = x[active, self.feature[nd]] >= self.threshold[nd]
            node[active] = np.where(go_right, self.right[nd], self.left[nd])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    def to_nodes(self) -> list[dict[str, Any]]:
        nodes = []
        for i in range(len(self)):
            rec: dict[str, Any] = {"id": i}
            if self.feature[i] == LEAF:
                rec["leaf"] = float(self.value[i])
            else:
                rec.update(feature=int(self.feature[i]), threshold=float(self.threshold[i]),
                           gain=float(self.gain[i]), left=int(self.left[i]), right=int(self.right[i]))
            rec.update(sum_grad=float(self.sum_grad[i]), sum_hess=float(self.sum_hess[i]))
            nodes.append(rec)
        return nodes

    @classmethod
    def from_nodes(cls, nodes: Sequence[dict[str, Any]]) -> "RegressionTree":
        n = len(nodes)
        t = cls(np.full(n, LEAF, dtype=np.int64), np.zeros(n), np.full(n, -1, dtype=np.int64),
                np.full(n, -1, dtype=np.int64), np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n))
        for rec in nodes:
            i = rec["id"]
            if "leaf" in rec:
                t.value[i] = rec["leaf"]
            else:
                t.feature[i], t.threshold[i], t.gain[i] = rec["feature"], rec["threshold"], rec["gain"]
                t.left[i], t.right[i] = rec["left"], rec["right"]
            t.sum_grad[i], t.sum_hess[i] = rec["sum_grad"], rec["sum_hess"]
        return t


@dataclass
class GbdtModel:
    params: BoostParams
    base_score: float
    trees: list[RegressionTree]
    feature_names: tuple[str, ...]
    feature_gain: np.ndarray
    train_loss: list[float] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def learning_rate(self) -> float:
        return self.params.learning_rate

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        out = np.full(len(x), self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(x)
        return out[0] if single else out

    def to_json(self) -> str:
        doc = {
            "format": "poigap-gbdt",
            "version": 1,
            "params": asdict(self.params),
            "base_score": self.base_score,
            "feature_names": list(self.feature_names),
            "feature_gain": [float(v) for v in self.feature_gain],
            "train_loss": self.train_loss,
            "meta": self.meta,
            "trees": [t.to_nodes() for t in self.trees],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GbdtModel":
        doc = json.loads(text)
        if doc.get("format") != "poigap-gbdt":
            raise DataError("not a poigap model file")
        return cls(
            params=BoostParams(**doc["params"]),
            base_score=doc["base_score"],
            trees=[RegressionTree.from_nodes(n) for n in doc["trees"]],
            feature_names=tuple(doc["feature_names"]),
            feature_gain=np.array(doc["feature_gain"], dtype=np.float64),
            train_loss=doc["train_loss"],
            meta=doc["meta"],
        )


class _Binned:
    """Each feature column mapped to codes over its sorted distinct values."""

    def __init__(self, x: np.ndarray):
        self.uniques = [np.unique(x[:, f]) for f in range(x.shape[1])]
        sizes = np.array([len(u) for u in self.uniques])
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.codes = np.empty(x.shape, dtype=np.int64)
        for f, u in enumerate(self.uniques):
            self.codes[:, f] = np.searchsorted(u, x[:, f]) + self.offsets[f]
        self.total = int(self.offsets[-1])


class _TreeBuilder:
    def __init__(self, x: np.ndarray, binned: _Binned, p: BoostParams):
        self.x, self.binned, self.p = x, binned, p
        self.nodes: list[list] = []
        self.leaf_rows: list[tuple[int, np.ndarray]] = []

    def best_split(self, idx: np.ndarray, g: np.ndarray, h: np.ndarray, G: float, H: float):
        p, b = self.p, self.binned
        lam = p.reg_lambda
        codes = b.codes[idx]
        flat = codes.ravel()
        F = codes.shape[1]
        Gb = np.bincount(flat, weights=np.repeat(g, F), minlength=b.total)
        Hb = np.bincount(flat, weights=np.repeat(h, F), minlength=b.total)
        Cb = np.bincount(flat, minlength=b.total)
        parent = G * G / (H + lam)
        best = (0.0, -1, 0.0)
        for f in range(F):
            lo, hi = b.offsets[f], b.offsets[f + 1]
            nz = np.flatnonzero(Cb[lo:hi])
            if len(nz) < 2:
                continue
            GL = np.cumsum(Gb[lo:hi][nz])[:-1]
            HL = np.cumsum(Hb[lo:hi][nz])[:-1]
            GR, HR = G - GL, H - HL
            gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent) - p.gamma
            gain[(HL < p.min_child_weight) | (HR < p.min_child_weight)] = -np.inf
            top = gain.max()
            # gains equal up to rounding count as ties: lower threshold, then lower feature index
            i = int(np.flatnonzero(gain >= top - _TIE_EPS * max(1.0, abs(top)))[0])
            if gain[i] > best[0] + _TIE_EPS * max(1.0, abs(best[0])):
                u = b.uniques[f]
                best = (float(gain[i]), f, 0.5 * (u[nz[i]] + u[nz[i + 1]]))
        return best

    def grow(self, idx: np.ndarray, g: np.ndarray, h: np.ndarray, depth: int) -> int:
        G, H = float(g.sum()), float(h.sum())
        node_id = len(self.nodes)
        self.nodes.append([LEAF, 0.0, -1, -1, 0.0, 0.0, G, H])
        gain, f, thr = (0.0, -1, 0.0)
        if depth < self.p.max_depth and len(idx) > 1:
            gain, f, thr = self.best_split(idx, g, h, G, H)
        if f < 0:
            self.nodes[node_id][4] = -G / (H + self.p.reg_lambda)
            self.leaf_rows.append((node_id, idx))
            return node_id
        right = self.x[idx, f] >= thr
        left_id = self.grow(idx[~right], g[~right], h[~right], depth + 1)
        right_id = self.grow(idx[right], g[right], h[right], depth + 1)
        self.nodes[node_id][:6] = [f, thr, left_id, right_id, 0.0, gain]
        return node_id

    def tree(self) -> RegressionTree:
        cols = list(zip(*self.nodes))
        return RegressionTree(
            np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=np.float64),
            np.array(cols[2], dtype=np.int64), np.array(cols[3], dtype=np.int64),
            np.array(cols[4], dtype=np.float64), np.array(cols[5], dtype=np.float64),
            np.array(cols[6], dtype=np.float64), np.array(cols[7], dtype=np.float64))


def train(x: np.ndarray, y: np.ndarray, p: BoostParams = BoostParams(),
          feature_names: Optional[Sequence[str]] = None) -> GbdtModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0 or x.shape[1] == 0:
        raise DataError("training needs a non-empty 2-D feature matrix")
    if len(y) != len(x):
        raise DataError("feature matrix and targets disagree in length")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise DataError("non-finite feature or target value")
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{j}" for j in range(x.shape[1]))

    n = len(y)
    rng = np.random.default_rng(p.seed)
    binned = _Binned(x)
    base = float(y.mean())
    pred = np.full(n, base)
    gains = np.zeros(x.shape[1])
    trees = []
    losses = [float(np.mean((pred - y) ** 2))]
    for _ in range(p.rounds):
        if p.subsample < 1.0:
            m = max(1, int(round(p.subsample * n)))
            idx = np.sort(rng.choice(n, size=m, replace=False))
        else:
            idx = np.arange(n)
        g = pred[idx] - y[idx]
        h = np.ones(len(idx))
        builder = _TreeBuilder(x, binned, p)
        builder.grow(idx, g, h, 0)
        tree = builder.tree()
        if p.subsample < 1.0:
            pred += p.learning_rate * tree.predict(x)
        else:
            for leaf, rows in builder.leaf_rows:
                pred[rows] += p.learning_rate * tree.value[leaf]
        internal = tree.feature != LEAF
        np.add.at(gains, tree.feature[internal], tree.gain[internal])
        trees.append(tree)
        losses.append(float(np.mean((pred - y) ** 2)))
    return GbdtModel(p, base, trees, names, gains, losses)


def train_dataset(data, p: BoostParams = BoostParams()) -> GbdtModel:
    if len(data) == 0:
        raise DataError("empty dataset")
    return train(data.rows, data.targets, p, data.feature_names)


def feature_gain(model: GbdtModel) -> dict[int, float]:
    return {j: float(v) for j, v in enumerate(model.feature_gain)}
