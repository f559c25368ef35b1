"""Block gap profiles and K-means++ / Lloyd clustering."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_data import Calendar, DataError, InvariantError
from .gaps import GapTensor


def block_profiles(gap: GapTensor, cal: Calendar, days: tuple[int, int] | None = None,
                   single_regime: bool = False) -> np.ndarray:
    """Mean gap per slot, workdays (144) followed by holidays (144).

    ``days`` restricts the averaging window; ``single_regime`` averages over
    all days and returns a B x 144 matrix instead.
    """
    d0, d1 = days if days is not None else (0, gap.n_days)
    g = gap.gaps[:, d0:d1, :].astype(np.float64)
    if single_regime:
        if d1 <= d0:
            raise DataError("no days to average")
        return g.mean(axis=1)
    holiday = cal.holiday_mask()[d0:d1]
    if holiday.all() or not holiday.any():
        kind = "holidays" if not holiday.any() else "workdays"
        raise DataError(f"no {kind} in the profile window; supply a calendar covering both "
                        "day types or use single-regime (144-dim) profiles")
    return np.hstack([g[:, ~holiday, :].mean(axis=1), g[:, holiday, :].mean(axis=1)])


def standardize(profiles: np.ndarray) -> np.ndarray:
    sd = profiles.std(axis=0)
    sd[sd == 0] = 1.0
    return (profiles - profiles.mean(axis=0)) / sd


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # explicit differences rather than the |x|^2 - 2xc + |c|^2 expansion:
    # exact zeros for coincident points and no cancellation
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp_init(profiles: np.ndarray, k: int, seed: int) -> np.ndarray:
    """D^2-weighted seeding; returns the chosen rows as a k x d matrix."""
    x = np.asarray(profiles, dtype=np.float64)
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(x, x[chosen]).min(axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # fewer distinct rows than k: fall back to an unused index
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(x, x[[idx]])[:, 0])
    return x[chosen].copy()


@dataclass
class Clustering:
    k: int
    assignment: np.ndarray
    centroids: np.ndarray = field(repr=False)
    inertia: float
    n_iter: int = 0
    history: list[float] = field(default_factory=list, repr=False)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def to_csv(self) -> str:
        return "block_index,cluster_label\n" + "".join(
            f"{b},{c}\n" for b, c in enumerate(self.assignment))

    def centroids_csv(self) -> str:
        return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in self.centroids)


def _assign(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = _sq_dists(x, centroids)
    labels = d2.argmin(axis=1)  # first minimum: ties go to the lowest label
    return labels, d2[np.arange(len(x)), labels]


def kmeans(profiles: np.ndarray, init: np.ndarray, max_iter: int = 300, tol: float = 1e-9,
           check: bool = True) -> Clustering:
    """Lloyd iterations from ``init``.

    Stops when the assignment is unchanged, the largest centroid shift drops
    below ``tol`` or after ``max_iter`` updates. An empty cluster is reseeded
    with the point farthest from its own centroid. With ``check`` the
    per-iteration inertia is verified to be non-increasing.
    """
    x = np.asarray(profiles, dtype=np.float64)
    centroids = np.array(init, dtype=np.float64)
    if not (np.isfinite(x).all() and np.isfinite(centroids).all()):
        raise DataError("non-finite values in k-means input")
    k = len(centroids)
    if k > len(x) or centroids.shape[1] != x.shape[1]:
        raise ValueError(f"init of shape {centroids.shape} incompatible with data {x.shape}")

    labels, d2 = _assign(x, centroids)
    history = [float(d2.sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c]:
                new[c] = x[labels == c].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            far = ((x - new[labels]) ** 2).sum(axis=1)
            order = np.argsort(-far, kind="stable")
            for c, i in zip(empty, order):
                new[c] = x[i]
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        new_labels, d2 = _assign(x, centroids)
        history.append(float(d2.sum()))
        if check and history[-1] > history[-2] * (1 + 1e-9) + 1e-12:
            raise InvariantError(f"k-means inertia rose from {history[-2]} to {history[-1]}")
        done = np.array_equal(new_labels, labels) or shift < tol
        labels = new_labels
        if done:
            break
    return Clustering(k, labels, centroids, history[-1], n_iter, history)


def cluster_blocks(profiles: np.ndarray, k: int = 5, seed: int = 0, max_iter: int = 300,
                   tol: float = 1e-9, scale: bool = False) -> Clustering:
    x = standardize(profiles) if scale else np.asarray(profiles, dtype=np.float64)
    return kmeans(x, kmeans_pp_init(x, k, seed), max_iter=max_iter, tol=tol)

