"""Cross-view tracklet distances and propagable-distance clustering (PDNC).

Tracklet distances take one of three states. In matrices they are encoded as
floats: a finite value, ``NaN`` for *incalculable* (no shared frame) and
``+inf`` for *forbidden* (same camera, shared frames).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import FundamentalPair, normalized_distances


class DistanceKind(enum.Enum):
    FINITE = "finite"
    INCALCULABLE = "incalculable"
    FORBIDDEN = "forbidden"


@dataclass(frozen=True)
class TrackletDistance:
    kind: DistanceKind
    value: float = float("nan")

    @classmethod
    def finite(cls, value):
        if not value >= 0:
            raise ValueError(f"finite distance must be >= 0, got {value}")
        return cls(DistanceKind.FINITE, float(value))

    @classmethod
    def incalculable(cls):
        return cls(DistanceKind.INCALCULABLE)

    @classmethod
    def forbidden(cls):
        return cls(DistanceKind.FORBIDDEN, float("inf"))

    @classmethod
    def from_float(cls, x):
        if np.isnan(x):
            return cls.incalculable()
        if np.isinf(x):
            return cls.forbidden()
        return cls.finite(x)

    def __float__(self):
        return self.value

    @property
    def is_finite(self):
        return self.kind is DistanceKind.FINITE


def _to_float_matrix(distances) -> np.ndarray:
    arr = np.asarray(distances, dtype=object if _has_objects(distances) else float)
    if arr.dtype == object:
        arr = np.vectorize(float, otypes=[float])(arr)
    return np.array(arr, dtype=float)


def _has_objects(distances):
    try:
        first = distances[0][0]
    except (IndexError, TypeError):
        return False
    return isinstance(first, TrackletDistance)


# ---------------------------------------------------------------------------
# distances between tracklets


def _common_frames(ti, tj):
    common = ti.observations.keys() & tj.observations.keys()
    return sorted(common)


def pairwise_set_distance(ti, tj, F, mode="box") -> np.ndarray:
    """Per-frame normalized distances over the frames both tracklets cover.

    ``F`` is the fundamental matrix from ``ti``'s camera to ``tj``'s (a raw
    array or FundamentalPair). Pose mode averages over jointly valid joints and
    skips frames that share none.
    """
    if ti.camera_id == tj.camera_id:
        raise ValueError("set distance needs tracklets from two cameras")
    if isinstance(F, FundamentalPair):
        F = F.F if F.from_camera == ti.camera_id else F.F.T
    F = np.asarray(F, dtype=float)
    if F.shape != (3, 3):
        raise ValueError("F must be a 3x3 matrix")
    frames = _common_frames(ti, tj)
    if not frames:
        return np.empty(0)
    oa = [ti.observations[t] for t in frames]
    ob = [tj.observations[t] for t in frames]
    sa = np.array([o.box_scale for o in oa])
    sb = np.array([o.box_scale for o in ob])
    if mode == "box":
        xa = np.array([o.center for o in oa])
        xb = np.array([o.center for o in ob])
        return normalized_distances(xa, sa, xb, sb, F)
    if mode != "pose":
        raise ValueError(f"unknown association mode {mode!r}")
    ka = np.stack([o.keypoints for o in oa])
    kb = np.stack([o.keypoints for o in ob])
    valid = np.stack([o.valid for o in oa]) & np.stack([o.valid for o in ob])
    n, k = valid.shape
    d = normalized_distances(
        ka.reshape(-1, 2), np.repeat(sa, k), kb.reshape(-1, 2), np.repeat(sb, k), F
    ).reshape(n, k)
    counts = valid.sum(axis=1)
    keep = counts > 0
    return np.where(valid, d, 0.0).sum(axis=1)[keep] / counts[keep]


def tracklet_distance(ti, tj, rig=None, mode="box") -> TrackletDistance:
    """Distance state between two windowed tracklets."""
    if not (ti.observations.keys() & tj.observations.keys()):
        return TrackletDistance.incalculable()
    if ti.camera_id == tj.camera_id:
        return TrackletDistance.forbidden()
    S = pairwise_set_distance(ti, tj, rig.fundamental(ti.camera_id, tj.camera_id).F, mode)
    if len(S) == 0:
        return TrackletDistance.incalculable()
    return TrackletDistance.finite(float(np.mean(S)))


def distance_matrix(tracklets, rig, mode="box") -> np.ndarray:
    """Float-encoded symmetric distance matrix (diagonal is NaN)."""
    n = len(tracklets)
    D = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = float(tracklet_distance(tracklets[i], tracklets[j], rig, mode))
    return D


# ---------------------------------------------------------------------------
# clustering


@dataclass
class ClusterSet:
    clusters: list[list[int]]
    distances: np.ndarray
    merges: list[tuple[int, int, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.clusters)

    def labels(self, n=None) -> np.ndarray:
        n = n if n is not None else sum(len(c) for c in self.clusters)
        out = np.empty(n, dtype=int)
        for ci, members in enumerate(self.clusters):
            out[members] = ci
        return out

    def distance(self, a, b) -> TrackletDistance:
        return TrackletDistance.from_float(self.distances[a, b])


def pdnc(distances, lam=0.3) -> ClusterSet:
    """Propagable Distance-based Non-parametric Clustering.

    Repeatedly merges the closest pair of clusters whose distance is finite
    and below ``lam``. The merged cluster's distance to every other cluster is
    the max of its parts' distances, ignoring incalculable parts; it stays
    incalculable only when both parts are. Forbidden dominates every finite
    value, so tracklets that overlap in one camera never share a cluster.
    """
    D = _to_float_matrix(distances)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError("distance matrix must be square")
    off = ~np.eye(n, dtype=bool)
    Doff, DTo = D[off], D.T[off]
    if not np.array_equal(Doff, DTo, equal_nan=True):
        raise ValueError("distance matrix must be symmetric")
    if np.any(Doff < 0):
        raise ValueError("distances must be non-negative")
    roots, merges, Dfin = kernels.propagable_linkage(D, float(lam))
    order = sorted(set(int(r) for r in roots))
    clusters = [[i for i in range(n) if roots[i] == r] for r in order]
    cd = np.full((len(order), len(order)), np.nan)
    for a, ra in enumerate(order):
        for b, rb in enumerate(order):
            if a != b:
                cd[a, b] = Dfin[ra, rb]
    return ClusterSet(clusters, cd, [(int(i), int(j), float(d)) for i, j, d in merges])


def associate(tracklets, rig, lam=0.3, mode="box"):
    """Distance matrix plus PDNC over one window's tracklets."""
    D = distance_matrix(tracklets, rig, mode)
    return pdnc(D, lam), D
