"""End-to-end orchestration: 2D tracking, windows, association, fusion, linking.

Windows are processed in keyframe order. After window ``i`` is linked every
frame before its start is final, so those records are handed to ``on_emit``.
A frame is therefore emitted at most ``size + step - 1`` frames after it
arrives.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assoc import associate
from .cmmt import Tracklet3D, cmmt
from .config import PipelineConfig
from .diagnostics import Diagnostics
from .errors import EmptyTracklet, MVTrackError
from .geometry import Rig
from .io import load_calibration, load_detections, load_tracks, track_records
from .linker import Linker, LongTrack
from .metrics import MotReport, clear_mot, load_limbs, pcp
from .svtrack import TrackerParams, Tracklet2D, track_stream, tracklets_from_labels
from .windows import Window, crop, keyframes


@dataclass
class PipelineResult:
    tracks: dict[int, dict[int, np.ndarray]]
    long_tracks: list[LongTrack]
    diagnostics: Diagnostics
    report: Optional[MotReport] = None
    pcp: Optional[tuple[dict, float]] = None
    timings: dict[str, float] = field(default_factory=dict)
    n_frames: int = 0

    @property
    def synthetic(self) -> dict[int, set]:
        out = {}
        for trk in self.long_tracks:
            # later windows overwrite earlier ones, flags included
            last = {}
            for tl in trk.tracklets:
                for t in tl.points:
                    last[t] = t in tl.synthetic
            out[trk.global_id] = {t for t, s in last.items() if s}
        return out

    def tracking_fps(self) -> float:
        busy = sum(self.timings.get(k, 0.0) for k in ("svtrack", "assoc", "cmmt", "linker"))
        return self.n_frames / busy if busy > 0 else float("inf")


def _context(exc: MVTrackError, **ctx):
    prior = getattr(exc, "context", {})
    exc.context = {**ctx, **prior}
    return exc


def build_tracklets(streams, cfg: PipelineConfig) -> list[Tracklet2D]:
    """Single-view tracklets of every camera, ordered by (camera, local id)."""
    sv = cfg.svtrack
    params = TrackerParams(iou_min=sv.iou_min, max_age=sv.max_age, min_hits=sv.min_hits)
    out = []
    for cid in sorted(streams):
        try:
            if sv.use_labels:
                dets = [o for t in sorted(streams[cid]) for o in streams[cid][t]]
                out.extend(tracklets_from_labels(dets, sv.min_hits))
            else:
                out.extend(track_stream(cid, streams[cid], params))
        except MVTrackError as exc:
            raise _context(exc, stage="svtrack", camera_id=cid)
    return out


def process_window(window: Window, rig: Rig, cfg: PipelineConfig, diagnostics: Diagnostics,
                   timings: Optional[dict] = None) -> list[Tracklet3D]:
    """Associate one window's confirmed tracklets and fuse each cluster."""
    timings = timings if timings is not None else {}
    k = window.keyframe
    tracklets = [tl for tl in window.tracklets if tl.confirmed]
    t0 = time.perf_counter()
    try:
        clusters, _ = associate(tracklets, rig, cfg.assoc.lam, cfg.assoc.mode)
    except MVTrackError as exc:
        raise _context(exc, stage="assoc", keyframe=k)
    t1 = time.perf_counter()
    timings["assoc"] = timings.get("assoc", 0.0) + t1 - t0
    if diagnostics.verbose:
        ids = [(tl.camera_id, tl.local_id) for tl in tracklets]
        for i, j, d in clusters.merges:
            diagnostics.detail("pdnc_merge", keyframe=k, a=ids[i], b=ids[j], distance=d)
    out = []
    for ci, members in enumerate(clusters.clusters):
        group = [tracklets[m] for m in members]
        cams = {tl.camera_id for tl in group}
        if len(cams) < 2:
            diagnostics.emit("single_view_cluster", keyframe=k, cluster=ci,
                             members=[(tl.camera_id, tl.local_id) for tl in group])
            continue
        try:
            out.append(cmmt(group, window, rig, cfg.cmmt.phi, cfg.cmmt.kappa, cfg.assoc.mode,
                            cfg.cmmt.method, cluster_id=ci, diagnostics=diagnostics))
        except EmptyTracklet:
            diagnostics.emit("cluster_dropped", keyframe=k, cluster=ci)
        except MVTrackError as exc:
            raise _context(exc, stage="cmmt", keyframe=k, cluster=ci)
    timings["cmmt"] = timings.get("cmmt", 0.0) + time.perf_counter() - t1
    return out


def _stream_length(streams) -> int:
    last = -1
    for s in streams.values():
        if s:
            last = max(last, max(s))
    return last + 1


def run_pipeline(cfg: PipelineConfig, rig: Optional[Rig] = None, detections=None, gt=None,
                 diagnostics: Optional[Diagnostics] = None,
                 on_emit: Optional[Callable[[list], None]] = None,
                 length: Optional[int] = None) -> PipelineResult:
    """Track every person through the detection streams.

    Missing inputs are loaded from the paths in ``cfg.io``. ``detections`` is
    either ``{camera_id: {frame: [Observation2D]}}`` or a simulator
    ``Detections``. ``on_emit`` receives finalized ``(global_id, frame,
    position)`` records in output order.
    """
    cfg.validate()
    diagnostics = diagnostics if diagnostics is not None else Diagnostics(verbose=cfg.debug)
    if rig is None:
        if cfg.io.calibration is None:
            raise MVTrackError("no calibration given")
        rig = Rig(load_calibration(cfg.io.calibration))
    elif not isinstance(rig, Rig):
        rig = Rig(rig)
    if detections is None:
        if cfg.io.detections is None:
            raise MVTrackError("no detections given")
        detections = load_detections(cfg.io.detections)
    streams = getattr(detections, "streams", detections)
    unknown = set(streams) - set(rig.camera_ids)
    if unknown:
        raise MVTrackError(f"detections reference uncalibrated cameras {sorted(unknown)}")
    if gt is None and cfg.io.ground_truth is not None:
        gt = load_tracks(cfg.io.ground_truth)
    T = length if length is not None else _stream_length(streams)

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    tracklets = build_tracklets(streams, cfg)
    timings["svtrack"] = time.perf_counter() - t0

    linker = Linker(cfg.gate, cfg.linker.max_window_misses, diagnostics)
    size, step = cfg.window.size, cfg.window.step
    emitted_to = 0

    def emit(upto):
        nonlocal emitted_to
        if on_emit is None or upto <= emitted_to:
            return
        chunk = {}
        for trk in [*linker.finished, *linker.active]:
            pts = {t: p for t, p in trk.points.items() if emitted_to <= t < upto}
            if pts:
                chunk[trk.global_id] = pts
        on_emit(track_records(chunk))
        emitted_to = upto

    if T > 0:
        for k in keyframes(T, size, step):
            window = crop(tracklets, k, size)
            tl3d = process_window(window, rig, cfg, diagnostics, timings)
            t1 = time.perf_counter()
            try:
                linker.step(k, tl3d)
            except MVTrackError as exc:
                raise _context(exc, stage="linker", keyframe=k)
            timings["linker"] = timings.get("linker", 0.0) + time.perf_counter() - t1
            emit(window.start)
    long_tracks = linker.flush()
    emit(max([T] + [max(t.points) + 1 for t in long_tracks if t.points]))

    tracks = {trk.global_id: dict(sorted(trk.points.items())) for trk in long_tracks if trk.points}
    result = PipelineResult(tracks, long_tracks, diagnostics, timings=timings, n_frames=T)
    if gt is not None:
        result.report = clear_mot(gt, tracks, cfg.metrics.threshold)
        if cfg.assoc.mode == "pose":
            limbs = load_limbs(cfg.metrics.limbs)
            result.pcp = pcp(gt, tracks, cfg.metrics.pcp_alpha, limbs)
    return result
