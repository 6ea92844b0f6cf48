"""Online track-to-track linking of window 3D tracklets.

Long tracks are matched to the next window's tracklets by the mean 3D
distance over shared frames, solved as a gated rectangular assignment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cmmt import Tracklet3D
from .errors import OutOfOrderWindow

INCOMPATIBLE = float("nan")


def tracklet3d_distance(a, b) -> float:
    """Mean Euclidean distance over shared frames; NaN when none are shared.

    Pose tracklets average over joints present in both before averaging
    over frames; frames with no common joint are skipped.
    """
    pa = a.points if hasattr(a, "points") else a
    pb = b.points if hasattr(b, "points") else b
    common = sorted(pa.keys() & pb.keys())
    if not common:
        return INCOMPATIBLE
    A = np.stack([pa[t] for t in common])
    B = np.stack([pb[t] for t in common])
    d = np.linalg.norm(A - B, axis=-1)
    if d.ndim == 1:
        return float(d.mean())
    present = ~np.isnan(d)
    counts = present.sum(axis=1)
    keep = counts > 0
    if not keep.any():
        return INCOMPATIBLE
    per_frame = np.where(present, d, 0.0).sum(axis=1)[keep] / counts[keep]
    return float(per_frame.mean())


@dataclass
class AssignmentResult:
    matrix: np.ndarray
    matches: list[tuple[int, int]]
    unmatched_rows: list[int]
    unmatched_cols: list[int]

    def total_cost(self, D):
        return float(sum(D[i, j] for i, j in self.matches))


def assign(D, gate=float("inf")) -> AssignmentResult:
    """Optimal partial matching over feasible entries.

    Entries that are NaN (incompatible) or above ``gate`` can never match.
    Among matchings of maximum cardinality the total cost is minimal.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise ValueError("distance matrix must be 2-D")
    n, m = D.shape
    M = np.zeros((n, m), dtype=bool)
    feasible = ~np.isnan(D) & (D <= gate)
    if n == 0 or m == 0 or not feasible.any():
        return AssignmentResult(M, [], list(range(n)), list(range(m)))
    if np.any(D[feasible] < 0):
        raise ValueError("distances must be non-negative")
    big = float(D[feasible].sum()) + 1.0
    cost = np.where(feasible, D, big)
    rows, cols = linear_sum_assignment(cost)
    matches = sorted((int(r), int(c)) for r, c in zip(rows, cols) if feasible[r, c])
    for r, c in matches:
        M[r, c] = True
    mr = {r for r, _ in matches}
    mc = {c for _, c in matches}
    return AssignmentResult(
        M, matches, [r for r in range(n) if r not in mr], [c for c in range(m) if c not in mc]
    )


@dataclass
class LongTrack:
    global_id: int
    points: dict[int, np.ndarray] = field(default_factory=dict)
    tracklets: list[Tracklet3D] = field(default_factory=list)
    last_keyframe: Optional[int] = None
    misses: int = 0

    def extend(self, tl: Tracklet3D):
        # overlapping frames take the newer window's positions
        self.points.update(tl.points)
        self.tracklets.append(tl)
        self.last_keyframe = tl.keyframe
        self.misses = 0

    @property
    def frames(self):
        return sorted(self.points)


class Linker:
    """Consumes windows in keyframe order and maintains long tracks."""

    def __init__(self, gate=0.5, max_window_misses=1, diagnostics=None):
        self.gate = gate
        self.max_window_misses = max_window_misses
        self.active: list[LongTrack] = []
        self.finished: list[LongTrack] = []
        self.last_keyframe: Optional[int] = None
        self.diagnostics = diagnostics
        self._next_id = 0

    def distance_matrix(self, tracklets) -> np.ndarray:
        D = np.full((len(self.active), len(tracklets)), np.nan)
        for i, trk in enumerate(self.active):
            for j, tl in enumerate(tracklets):
                D[i, j] = tracklet3d_distance(trk.points, tl.points)
        return D

    def step(self, keyframe, tracklets) -> list[LongTrack]:
        """Link one window; returns long tracks terminated by this window."""
        self._check_order(keyframe)
        result = assign(self.distance_matrix(tracklets), self.gate)
        return self.manage(keyframe, tracklets, result)

    def _check_order(self, keyframe):
        if self.last_keyframe is not None and keyframe <= self.last_keyframe:
            raise OutOfOrderWindow(f"keyframe {keyframe} after {self.last_keyframe}")

    def manage(self, keyframe, tracklets, result: AssignmentResult) -> list[LongTrack]:
        """Apply an assignment: extend, spawn and retire long tracks."""
        self._check_order(keyframe)
        self.last_keyframe = keyframe
        for i, j in result.matches:
            self.active[i].extend(tracklets[j])
        for j in result.unmatched_cols:
            trk = LongTrack(self._next_id)
            self._next_id += 1
            trk.extend(tracklets[j])
            self.active.append(trk)
            if self.diagnostics is not None:
                self.diagnostics.detail("track_start", global_id=trk.global_id, keyframe=tracklets[j].keyframe)
        ended = []
        for i in result.unmatched_rows:
            self.active[i].misses += 1
        keep = []
        for trk in self.active:
            if trk.misses > 0 and trk.misses >= self.max_window_misses:
                ended.append(trk)
            else:
                keep.append(trk)
        self.active = keep
        self.finished.extend(ended)
        return ended

    def flush(self) -> list[LongTrack]:
        self.finished.extend(self.active)
        self.active = []
        return sorted(self.finished, key=lambda t: t.global_id)
