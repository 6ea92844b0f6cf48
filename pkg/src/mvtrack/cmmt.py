"""Collaborative multi-frame multi-view triangulation.

Each tracklet of a cluster is densified by interpolation (linear gap infill
plus a locally quadratic smoothed duplicate at every observed frame). Every cross-camera pair of
entries at a frame is triangulated, the candidates are grouped by
complete-linkage at ``kappa`` meters and the centroid of the largest group is
the fused position.

``plain`` and ``ransac`` are single-frame comparators working on observed
entries only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from . import kernels
from .errors import EmptyFrame, EmptyTracklet
from .geometry import Observation2D, project_points, triangulate_batch, triangulate_views
from .svtrack import Tracklet2D

METHODS = ("cmmt", "ransac", "plain")


@dataclass
class InterpolatedTracklet:
    base: Tracklet2D
    infill: dict[int, Observation2D] = field(default_factory=dict)

    @property
    def camera_id(self):
        return self.base.camera_id

    def merged(self) -> dict[int, list[Observation2D]]:
        out: dict[int, list[Observation2D]] = {}
        for t, o in self.base.observations.items():
            out.setdefault(t, []).append(o)
        for t, o in self.infill.items():
            out.setdefault(t, []).append(o)
        return out

    @property
    def gap_frames(self):
        return sorted(set(self.infill) - set(self.base.observations))


@dataclass
class CandidateSet:
    frame: int
    points: np.ndarray
    provenance: list[tuple[tuple[int, int], tuple[bool, bool]]]

    def __len__(self):
        return len(self.points)


@dataclass
class Tracklet3D:
    keyframe: int
    cluster_id: int
    points: dict[int, np.ndarray]
    synthetic: set = field(default_factory=set)
    members: list[tuple[int, int]] = field(default_factory=list)

    @property
    def frames(self) -> list[int]:
        return sorted(self.points)

    @property
    def active_frames(self) -> frozenset:
        return frozenset(self.points)

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# interpolation


def _powers(off):
    return off[..., None] ** np.arange(5)  # (m, L, 5)


def _quadratic_fit(P, W, Y):
    """Weighted parabola fits per target and channel.

    ``P`` (m, L, 5) holds powers 0..4 of the neighbour offsets, ``W`` (m, L, c)
    weights and ``Y`` (m, L, c) samples. Returns coefficients (m, c, 3) and a
    validity mask.
    """
    Wt = np.swapaxes(W, 1, 2)  # (m, c, L)
    S = Wt @ P  # (m, c, 5) weighted moments
    b = (Wt * np.swapaxes(Y, 1, 2)) @ P[..., :3]  # (m, c, 3)
    s0, s1, s2, s3, s4 = (S[..., i] for i in range(5))
    # symmetric Hankel system [[s0 s1 s2] [s1 s2 s3] [s2 s3 s4]] solved by its adjugate
    c00 = s2 * s4 - s3 * s3
    c01 = s2 * s3 - s1 * s4
    c02 = s1 * s3 - s2 * s2
    c11 = s0 * s4 - s2 * s2
    c12 = s1 * s2 - s0 * s3
    c22 = s0 * s2 - s1 * s1
    det = s0 * c00 + s1 * c01 + s2 * c02
    # offsets are integers within +-phi, so a fixed determinant floor is safe
    ok = ((W > 0).sum(axis=1) >= 3) & (np.abs(det) > 1e-9)
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    coef = np.stack([c00 * b0 + c01 * b1 + c02 * b2,
                     c01 * b0 + c11 * b1 + c12 * b2,
                     c02 * b0 + c12 * b1 + c22 * b2], axis=-1) * inv[..., None]
    return coef, ok


def _masked_median(x, mask):
    """Median over axis 1 of the entries where ``mask`` holds; NaN when none do."""
    srt = np.sort(np.where(mask, x, np.inf), axis=1)
    k = mask.sum(axis=1, keepdims=True)
    lo = np.take_along_axis(srt, np.maximum((k - 1) // 2, 0), axis=1)
    hi = np.take_along_axis(srt, np.maximum(k // 2, 0) - (k == 0), axis=1)
    return np.where(k > 0, 0.5 * (lo + hi), np.nan)[:, 0]


def _evaluate(coef, off):
    return coef[:, None, :, 0] + coef[:, None, :, 1] * off[..., None] + coef[:, None, :, 2] * (off ** 2)[..., None]


def _local_quadratic(f, Y, mask, targets, phi, reject=3.0, floor=1.0, l1_rounds=8):
    """Robust parabola through the masked samples within +-phi of each target.

    An L1 fit (iteratively reweighted) locates the bulk of the samples, those
    farther than ``reject`` MAD-scales (at least ``floor`` pixels) are dropped
    and a least-squares fit over the rest gives the value. Isolated gross
    errors therefore do not leak into their neighbours' estimates.
    Returns the fitted value at each target and a validity mask.
    """
    n = len(f)
    L = 2 * phi + 1
    lo = np.searchsorted(f, targets - phi, side="left")
    idx = lo[:, None] + np.arange(L)[None, :]
    inside = idx < n
    idx = np.minimum(idx, n - 1)
    off = f[idx] - targets[:, None]
    inside &= np.abs(off) <= phi
    W0 = (inside[:, :, None] & mask[idx]).astype(float)  # (m, L, c)
    Yn = Y[idx]
    P = _powers(off)
    coef, ok = _quadratic_fit(P, W0, Yn)
    for _ in range(l1_rounds):
        resid = np.abs(Yn - _evaluate(coef, off))
        coef_next, ok_next = _quadratic_fit(P, W0 / np.maximum(resid, 0.1), Yn)
        coef = np.where(ok_next[..., None], coef_next, coef)
    resid = np.abs(Yn - _evaluate(coef, off))
    scale = np.fmax(1.4826 * _masked_median(resid, W0 > 0), floor)
    keep = W0 * (resid <= reject * scale[:, None, :])
    coef_ls, ok_ls = _quadratic_fit(P, keep, Yn)
    value = np.where(ok_ls, coef_ls[..., 0], coef[..., 0])
    return np.where(ok, value, np.nan), ok


def _gap_fill(f, Y, mask, targets, phi):
    """Linear interpolation between nearest masked samples on either side."""
    m, c = len(targets), Y.shape[1]
    out = np.full((m, c), np.nan)
    ok = np.zeros((m, c), dtype=bool)
    for ch in range(c):
        fs = f[mask[:, ch]]
        if len(fs) < 2:
            continue
        ys = Y[mask[:, ch], ch]
        r = np.searchsorted(fs, targets, side="right")
        inside = (r > 0) & (r < len(fs))
        ri = np.clip(r, 1, len(fs) - 1)
        left, right = fs[ri - 1], fs[ri]
        good = inside & (targets - left <= phi) & (right - targets <= phi) & (left < targets)
        w = (targets - left) / (right - left)
        out[:, ch] = np.where(good, ys[ri - 1] + w * (ys[ri] - ys[ri - 1]), np.nan)
        ok[:, ch] = good
    return out, ok


def interpolate_tracklet(T: Tracklet2D, phi: int = 7, start=None, stop=None) -> InterpolatedTracklet:
    """Synthesize infill observations for a tracklet.

    Missing frames with an observation at most ``phi`` frames away on both
    sides get a linearly interpolated entry. Observed frames get a smoothed
    duplicate from a quadratic fit over observed neighbours within ``phi``.
    Synthesized entries carry ``synthetic=True``.
    """
    if phi < 1:
        raise ValueError("phi must be >= 1")
    frames = T.frames
    if not frames:
        return InterpolatedTracklet(T)
    obs = [T.observations[t] for t in frames]
    f = np.asarray(frames, dtype=float)
    box = np.array([[o.center[0], o.center[1], o.w, o.h] for o in obs])
    box_mask = np.ones_like(box, dtype=bool)
    has_kp = obs[0].keypoints is not None
    if has_kp:
        kp = np.stack([o.keypoints for o in obs])  # (n, K, 2)
        n, K, _ = kp.shape
        kp_flat = kp.reshape(n, 2 * K)
        kp_mask = np.repeat(np.stack([o.valid for o in obs]), 2, axis=1)

    lo = frames[0] if start is None else max(frames[0], start)
    hi = frames[-1] + 1 if stop is None else min(frames[-1] + 1, stop)
    observed = set(frames)
    gaps = np.array([t for t in range(lo, hi) if t not in observed], dtype=float)

    infill: dict[int, Observation2D] = {}

    def build(t, b, kvals=None, kok=None, src=None):
        kw = {}
        if has_kp:
            kw["keypoints"] = np.where(kok[:, None], kvals.reshape(K, 2), 0.0)
            kw["valid"] = kok
        return Observation2D(
            int(t), T.camera_id, b[:2], max(b[2], 1.0), max(b[3], 1.0),
            score=src.score if src is not None else 0.0, synthetic=True, label=obs[0].label, **kw,
        )

    if len(gaps):
        gb, gok = _gap_fill(f, box, box_mask, gaps, phi)
        if has_kp:
            gk, gkok = _gap_fill(f, kp_flat, kp_mask, gaps, phi)
        for i, t in enumerate(gaps):
            if not gok[i].all():
                continue
            if has_kp:
                kok = gkok[i, 0::2] & gkok[i, 1::2]
                infill[int(t)] = build(t, gb[i], gk[i], kok)
            else:
                infill[int(t)] = build(t, gb[i])

    targets = np.asarray([t for t in frames if lo <= t < hi], dtype=float)
    if len(targets):
        sb, sok = _local_quadratic(f, box, box_mask, targets, phi)
        if has_kp:
            sk, skok = _local_quadratic(f, kp_flat, kp_mask, targets, phi)
        for i, t in enumerate(targets):
            if not sok[i].all():
                continue
            src = T.observations[int(t)]
            if has_kp:
                kok = skok[i, 0::2] & skok[i, 1::2]
                infill[int(t)] = build(t, sb[i], sk[i], kok, src)
            else:
                infill[int(t)] = build(t, sb[i], src=src)
    return InterpolatedTracklet(T, dict(sorted(infill.items())))


# ---------------------------------------------------------------------------
# candidates, clustering, fusion


def _channel_points(obs: Observation2D, joint):
    if joint is None:
        return obs.center
    if not obs.valid[joint]:
        return None
    return obs.keypoints[joint]


def _frame_entries(merged_views, frame, joint=None, observed_only=False):
    """Entries ``(camera_id, xy, synthetic, obs)`` at a frame, ordered by camera."""
    entries = []
    for view in merged_views:
        for o in view.get(frame, ()):
            if observed_only and o.synthetic:
                continue
            xy = _channel_points(o, joint)
            if xy is not None:
                entries.append((o.camera_id, xy, o.synthetic, o))
    entries.sort(key=lambda e: (e[0], e[2]))
    return entries


def _pairs(entries):
    return [(a, b) for a, b in combinations(range(len(entries)), 2) if entries[a][0] != entries[b][0]]


def _triangulate_entry_pairs(entries, pairs, rig):
    if not pairs:
        return np.empty((0, 3)), np.empty(0, dtype=bool)
    cond = [rig.condition(e[0], e[1]) for e in entries]
    ia = [a for a, _ in pairs]
    ib = [b for _, b in pairs]
    xa = np.array([cond[i][0] for i in ia])
    xb = np.array([cond[i][0] for i in ib])
    Pa = np.stack([cond[i][1] for i in ia])
    Pb = np.stack([cond[i][1] for i in ib])
    return triangulate_batch(xa, xb, Pa, Pb)


def candidate_positions(cluster, frame, rig, phi=7, joint=None, interpolated=None) -> CandidateSet:
    """Triangulate every cross-camera pair of merged entries at ``frame``.

    Raises EmptyFrame when fewer than two cameras contribute.
    """
    views = interpolated or [interpolate_tracklet(t, phi) for t in cluster]
    merged = [v.merged() for v in views]
    entries = _frame_entries(merged, frame, joint)
    n_cams = len({e[0] for e in entries})
    if n_cams < 2:
        raise EmptyFrame(frame, n_cams)
    pairs = _pairs(entries)
    X, ok = _triangulate_entry_pairs(entries, pairs, rig)
    prov = [((entries[a][0], entries[b][0]), (entries[a][2], entries[b][2])) for a, b in pairs]
    keep = np.flatnonzero(ok)
    return CandidateSet(frame, X[keep], [prov[i] for i in keep])


def complete_linkage_3d(points, kappa=0.2) -> list[list[int]]:
    """Complete-linkage clusters of 3D candidates, merged while diameter < kappa."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise ValueError("no candidates to cluster")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if len(points) == 1:
        return [[0]]
    d = points[:, None, :] - points[None, :, :]
    if np.sqrt((d * d).sum(-1).max()) < kappa:
        return [list(range(len(points)))]
    roots = kernels.complete_linkage_points(points, float(kappa))
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(roots):
        groups.setdefault(int(r), []).append(i)
    return [groups[r] for r in sorted(groups)]


def _spread(pts):
    if len(pts) < 2:
        return 0.0
    d = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((d * d).sum(-1))
    n = len(pts)
    return dist.sum() / (n * (n - 1))


def fuse_largest(clusters, points, kappa=0.2) -> np.ndarray:
    """Centroid of the largest candidate cluster.

    Ties on size go to the smaller mean pairwise distance, then to the lowest
    member index. Members farther than ``kappa`` from the centroid are dropped
    once and the centroid recomputed.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if not clusters:
        raise ValueError("no clusters to fuse")

    def rank(c):
        return (-len(c), _spread(points[c]), min(c))

    best = points[clusters[0] if len(clusters) == 1 else min(clusters, key=rank)]
    centroid = best.mean(axis=0)
    near = np.linalg.norm(best - centroid, axis=1) <= kappa
    if not near.all() and near.any():
        centroid = best[near].mean(axis=0)
    return centroid


def _fuse_candidates(X, method, kappa):
    """Fuse one frame's valid candidates with ``cmmt`` or ``plain``."""
    if len(X) == 0:
        return None
    if method == "plain":
        return X.mean(axis=0)
    if len(X) == 1:
        return X[0]
    return fuse_largest(complete_linkage_3d(X, kappa), X, kappa)


def _batched_candidates(jobs, rig):
    """Triangulate the cross-camera pairs of many entry lists in one batch.

    Returns one array of valid candidates per job.
    """
    xa, xb, Pa, Pb, sizes = [], [], [], [], []
    for entries in jobs:
        pairs = _pairs(entries)
        sizes.append(len(pairs))
        if not pairs:
            continue
        cond = [rig.condition(e[0], e[1]) for e in entries]
        for a, b in pairs:
            xa.append(cond[a][0])
            xb.append(cond[b][0])
            Pa.append(cond[a][1])
            Pb.append(cond[b][1])
    if not xa:
        return [np.empty((0, 3)) for _ in jobs]
    X, ok = triangulate_batch(np.array(xa), np.array(xb), np.stack(Pa), np.stack(Pb))
    out = []
    pos = 0
    for n in sizes:
        out.append(X[pos:pos + n][ok[pos:pos + n]])
        pos += n
    return out


def _fuse_ransac(entries, rig, frame, threshold=0.05, iterations=100, seed=0):
    """Best two-view hypothesis by reprojection inlier count, refit on inliers.

    A view is an inlier when its reprojection error is below
    ``threshold * (w + h)`` of its box.
    """
    pairs = _pairs(entries)
    if not pairs:
        return None, 0
    rng = np.random.default_rng((seed, frame))
    picks = rng.integers(0, len(pairs), size=iterations)
    X, ok = _triangulate_entry_pairs(entries, [pairs[i] for i in picks], rig)
    tol = np.array([threshold * e[3].box_scale for e in entries])
    if not ok.any():
        return None, 0
    # (iterations, n_entries) reprojection errors
    err = np.stack(
        [np.linalg.norm(project_points(rig[e[0]], X)[0] - e[1], axis=1) for e in entries], axis=1
    )
    inl = (err < tol[None, :]) & ok[:, None]
    count = inl.sum(axis=1)
    cost = np.where(inl, err, 0.0).sum(axis=1)
    best_in = None
    best_key = None
    for h in np.flatnonzero(ok):
        key = (int(count[h]), -float(cost[h]))
        if best_key is None or key > best_key:
            best_key, best_in = key, inl[h]
    if best_in is None:
        return None, 0
    members = [entries[i] for i in np.flatnonzero(best_in)]
    if len({e[0] for e in members}) < 2:
        a, b = pairs[picks[0]]
        members = [entries[a], entries[b]]
    return triangulate_views([e[1] for e in members], [rig[e[0]] for e in members]), len(pairs)


def cmmt(cluster, window, rig, phi=7, kappa=0.2, mode="box", method="cmmt",
         cluster_id=0, diagnostics=None, seed=0) -> Tracklet3D:
    """Fuse one cluster of windowed 2D tracklets into a 3D tracklet.

    Frames with fewer than two contributing cameras are left out. In pose
    mode every joint runs through the chain independently and a frame is kept
    when at least one joint succeeds. Raises EmptyTracklet when nothing fuses.
    """
    if method not in METHODS:
        raise ValueError(f"unknown triangulation method {method!r}")
    start, stop = window.start, window.stop
    use_infill = method == "cmmt"
    if use_infill:
        views = [interpolate_tracklet(t, phi, start, stop).merged() for t in cluster]
    else:
        views = [{t: [o] for t, o in tl.observations.items()} for tl in cluster]
    frames = sorted({t for v in views for t in v if start <= t < stop})
    pose = mode == "pose"
    joints: list[Optional[int]] = [None]
    if pose:
        K = len(cluster[0].observations[cluster[0].frames[0]].keypoints)
        joints = list(range(K))

    jobs, keys = [], []
    for t in frames:
        for j in joints:
            entries = _frame_entries(views, t, j)
            if len({e[0] for e in entries}) >= 2:
                jobs.append(entries)
                keys.append((t, j))
    if method == "ransac":
        fused = {key: _fuse_ransac(entries, rig, key[0], seed=seed) for key, entries in zip(keys, jobs)}
    else:
        cands = _batched_candidates(jobs, rig)
        fused = {
            key: (_fuse_candidates(X, method, kappa), len(X)) for key, X in zip(keys, cands)
        }

    points: dict[int, np.ndarray] = {}
    synthetic = set()
    for t in frames:
        per_joint = []
        counts = []
        for j in joints:
            X, n = fused.get((t, j), (None, 0))
            counts.append(n)
            ok = X is not None and bool(np.all(np.isfinite(X)))
            per_joint.append(X if ok else np.full(3, np.nan))
        if diagnostics is not None:
            diagnostics.detail("candidates", keyframe=window.keyframe, cluster=cluster_id, frame=t,
                               counts=counts)
        if all(np.isnan(x).any() for x in per_joint):
            if diagnostics is not None:
                diagnostics.emit("empty_frame", keyframe=window.keyframe, cluster=cluster_id, frame=t)
            continue
        points[t] = np.stack(per_joint) if pose else per_joint[0]
        if not any(not o.synthetic for v in views for o in v.get(t, ())):
            synthetic.add(t)
    if not points:
        raise EmptyTracklet(f"cluster {cluster_id} at keyframe {window.keyframe} produced no 3D position")
    members = [(tl.camera_id, tl.local_id) for tl in cluster]
    return Tracklet3D(window.keyframe, cluster_id, points, synthetic, members)
