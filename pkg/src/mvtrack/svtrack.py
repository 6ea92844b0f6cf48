"""Geometric single-view multi-object tracker (SORT-style management).

A constant-velocity box model stands in for the Kalman filter: the first
re-detection sets the velocity directly, later ones blend it with factor
``smoothing``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import FrameRegression
from .geometry import Observation2D


@dataclass
class TrackerParams:
    iou_min: float = 0.3
    max_age: int = 10
    min_hits: int = 2
    smoothing: float = 0.5


@dataclass
class Tracklet2D:
    camera_id: int
    local_id: int
    observations: dict[int, Observation2D] = field(default_factory=dict)
    confirmed: bool = True

    @property
    def frames(self) -> list[int]:
        return sorted(self.observations)

    @property
    def active_frames(self) -> frozenset:
        return frozenset(self.observations)

    def __len__(self):
        return len(self.observations)

    def add(self, obs: Observation2D):
        if obs.camera_id != self.camera_id:
            raise ValueError(f"observation from camera {obs.camera_id} added to camera {self.camera_id}")
        if self.observations and obs.frame <= max(self.observations):
            raise ValueError(f"frame {obs.frame} is not after the tracklet's last frame")
        self.observations[obs.frame] = obs

    def restricted(self, start, stop) -> "Tracklet2D":
        obs = {t: o for t, o in self.observations.items() if start <= t < stop}
        return Tracklet2D(self.camera_id, self.local_id, obs, self.confirmed)


@dataclass
class Track2DState:
    local_id: int
    last_box: Observation2D
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(4))
    age: int = 0
    time_since_update: int = 0
    hit_streak: int = 1
    hits: int = 1
    confirmed: bool = False
    has_velocity: bool = False


def _box(obs):
    return np.array([obs.center[0], obs.center[1], obs.w, obs.h])


def predict(state: Track2DState, steps: int = 1) -> Observation2D:
    """Advance the last box by ``steps`` frames of constant velocity."""
    cx, cy, w, h = _box(state.last_box) + steps * state.velocity
    return replace(
        state.last_box,
        frame=state.last_box.frame + steps,
        center=np.array([cx, cy]),
        w=max(w, 1.0),
        h=max(h, 1.0),
        keypoints=None,
        valid=None,
    )


def iou(a, b) -> float:
    """Intersection over union of two boxes.

    Boxes are Observation2D instances or ``(x1, y1, x2, y2)`` sequences.
    """
    a = a.xyxy if isinstance(a, Observation2D) else np.asarray(a, dtype=float)
    b = b.xyxy if isinstance(b, Observation2D) else np.asarray(b, dtype=float)
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return float(inter / union)


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise IoU between ``(n, 4)`` and ``(m, 4)`` xyxy arrays."""
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 4)[:, None, :]
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 4)[None, :, :]
    iw = np.clip(np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0]), 0, None)
    ih = np.clip(np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1]), 0, None)
    inter = iw * ih
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    return inter / (area_a + area_b - inter)


def match_iou(ious: np.ndarray, iou_min: float):
    """Optimal track/detection matching on cost ``1 - IoU`` gated at ``iou_min``.

    Returns ``(matches, unmatched_tracks, unmatched_dets)``.
    """
    n_t, n_d = ious.shape
    if n_t == 0 or n_d == 0:
        return [], list(range(n_t)), list(range(n_d))
    rows, cols = linear_sum_assignment(1.0 - ious)
    matches = [(r, c) for r, c in zip(rows, cols) if ious[r, c] >= iou_min]
    mt = {r for r, _ in matches}
    md = {c for _, c in matches}
    return (
        sorted(matches),
        [r for r in range(n_t) if r not in mt],
        [c for c in range(n_d) if c not in md],
    )


class SingleViewTracker:
    """One tracker per camera, driven frame by frame in increasing order."""

    def __init__(self, camera_id: int, params: Optional[TrackerParams] = None):
        self.camera_id = camera_id
        self.params = params or TrackerParams()
        self.tracks: list[Track2DState] = []
        self.tracklets: dict[int, Tracklet2D] = {}
        self.finished: list[Tracklet2D] = []
        self.last_frame: Optional[int] = None
        self._next_id = 0

    def step(self, frame: int, detections: list[Observation2D]):
        """Process one frame; returns tracklets terminated at this frame."""
        if self.last_frame is not None and frame <= self.last_frame:
            raise FrameRegression(f"camera {self.camera_id}: frame {frame} after {self.last_frame}")
        for det in detections:
            if det.camera_id != self.camera_id or det.frame != frame:
                raise ValueError(
                    f"detection for camera {det.camera_id} frame {det.frame} fed to "
                    f"camera {self.camera_id} frame {frame}"
                )
        p = self.params
        preds = [predict(t, frame - t.last_box.frame) for t in self.tracks]
        ious = iou_matrix([b.xyxy for b in preds], [d.xyxy for d in detections])
        matches, _, unmatched_dets = match_iou(ious, p.iou_min)

        matched = set()
        for ti, di in matches:
            self._update(self.tracks[ti], detections[di])
            matched.add(ti)
        for ti, trk in enumerate(self.tracks):
            trk.age += 1
            if ti not in matched:
                trk.time_since_update = frame - trk.last_box.frame
                trk.hit_streak = 0
        for di in unmatched_dets:
            self._spawn(detections[di])

        ended = []
        alive = []
        for trk in self.tracks:
            if trk.time_since_update > p.max_age:
                ended.append(self._finish(trk))
            else:
                alive.append(trk)
        self.tracks = alive
        self.last_frame = frame
        return ended

    def _update(self, trk: Track2DState, det: Observation2D):
        dt = det.frame - trk.last_box.frame
        v = (_box(det) - _box(trk.last_box)) / dt
        if trk.has_velocity:
            s = self.params.smoothing
            trk.velocity = s * trk.velocity + (1.0 - s) * v
        else:
            trk.velocity = v
            trk.has_velocity = True
        trk.last_box = det
        trk.time_since_update = 0
        trk.hit_streak += 1
        trk.hits += 1
        if trk.hit_streak >= self.params.min_hits:
            trk.confirmed = True
            self.tracklets[trk.local_id].confirmed = True
        self.tracklets[trk.local_id].add(det)

    def _spawn(self, det: Observation2D):
        lid = self._next_id
        self._next_id += 1
        trk = Track2DState(lid, det)
        trk.confirmed = self.params.min_hits <= 1
        self.tracks.append(trk)
        self.tracklets[lid] = Tracklet2D(self.camera_id, lid, {det.frame: det}, trk.confirmed)

    def _finish(self, trk):
        tl = self.tracklets.pop(trk.local_id)
        self.finished.append(tl)
        return tl

    def flush(self) -> list[Tracklet2D]:
        """Terminate every live track and return all tracklets ever produced."""
        for trk in self.tracks:
            self._finish(trk)
        self.tracks = []
        return sorted(self.finished, key=lambda t: t.local_id)

    def all_tracklets(self) -> list[Tracklet2D]:
        """Finished plus live tracklets, ordered by local id."""
        return sorted([*self.finished, *self.tracklets.values()], key=lambda t: t.local_id)


def track_stream(camera_id, detections_by_frame, params=None) -> list[Tracklet2D]:
    """Run a fresh tracker over ``{frame: [Observation2D]}`` and flush it."""
    tracker = SingleViewTracker(camera_id, params)
    for frame in sorted(detections_by_frame):
        tracker.step(frame, detections_by_frame[frame])
    return tracker.flush()


def tracklets_from_labels(detections, min_hits=2) -> list[Tracklet2D]:
    """Group labelled detections of one camera into tracklets.

    Used when detections already carry single-view track ids. Tracklets with
    fewer than ``min_hits`` observations are left unconfirmed.
    """
    groups: dict[int, Tracklet2D] = {}
    for det in sorted(detections, key=lambda d: d.frame):
        if det.label is None:
            raise ValueError("labelled tracking requires every detection to carry a label")
        tl = groups.get(det.label)
        if tl is None:
            tl = groups[det.label] = Tracklet2D(det.camera_id, det.label)
        tl.add(det)
    out = sorted(groups.values(), key=lambda t: t.local_id)
    for tl in out:
        tl.confirmed = len(tl) >= min_hits
    return out
