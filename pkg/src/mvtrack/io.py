"""Line-record text formats for calibration, detections and trajectories.

Every format is one record per line with fields separated by single spaces.
Blank lines and lines starting with ``#`` are ignored.

calibration  ``camera_id p00 p01 ... p23 [width height]``
detections   ``frame camera_id x y w h score [u1 v1 ... uK vK m1 ... mK]``
tracks       ``global_id frame X Y Z [X1 Y1 Z1 ... XK YK ZK]``

In pose tracks the leading ``X Y Z`` is the mean of the valid joints and the
joint triples follow; missing joints are written as ``nan``.
"""
from __future__ import annotations

import math
from typing import Iterable, Optional

import numpy as np

from .errors import ParseError, SchemaMismatch
from .geometry import CameraModel, Observation2D

FLOAT_FMT = "{:.9g}"


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return FLOAT_FMT.format(x)


def _records(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            yield lineno, s.split()


def _floats(fields, lineno, path):
    try:
        return [float(f) for f in fields]
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno, path=path) from None


def _int(field, lineno, path, what):
    try:
        return int(field)
    except ValueError:
        raise ParseError(f"{what} must be an integer, got {field!r}", line=lineno, path=path) from None


# ---------------------------------------------------------------------------
# calibration


def load_calibration(path) -> list[CameraModel]:
    cams = []
    seen = set()
    for lineno, fields in _records(path):
        if len(fields) not in (13, 15):
            raise ParseError(
                f"expected camera_id + 12 projection entries [+ width height], got {len(fields)} fields",
                line=lineno, path=path,
            )
        cid = _int(fields[0], lineno, path, "camera_id")
        if cid in seen:
            raise ParseError(f"duplicate camera_id {cid}", line=lineno, path=path)
        seen.add(cid)
        vals = _floats(fields[1:13], lineno, path)
        size = None
        if len(fields) == 15:
            size = (_int(fields[13], lineno, path, "width"), _int(fields[14], lineno, path, "height"))
        try:
            cams.append(CameraModel(cid, np.array(vals).reshape(3, 4), size))
        except Exception as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
    return cams


def write_calibration(path, cameras: Iterable[CameraModel]):
    with open(path, "w") as fh:
        fh.write("# camera_id P (row-major 3x4) [width height]\n")
        for cam in cameras:
            fields = [str(cam.camera_id), *(_fmt(v) for v in np.asarray(cam.projection).ravel())]
            if cam.image_size is not None:
                fields += [str(int(cam.image_size[0])), str(int(cam.image_size[1]))]
            fh.write(" ".join(fields) + "\n")


# ---------------------------------------------------------------------------
# detections


def load_detections(path) -> dict[int, dict[int, list[Observation2D]]]:
    """Per-camera streams ``{camera_id: {frame: [Observation2D]}}``."""
    streams: dict[int, dict[int, list[Observation2D]]] = {}
    n_kp: Optional[int] = None
    for lineno, fields in _records(path):
        if len(fields) < 7:
            raise ParseError(f"expected at least 7 fields, got {len(fields)}", line=lineno, path=path)
        extra = len(fields) - 7
        if extra % 3:
            raise ParseError(
                f"keypoint block must hold 2K coordinates and K flags, got {extra} values",
                line=lineno, path=path,
            )
        K = extra // 3
        if n_kp is None:
            n_kp = K
        elif K != n_kp:
            raise SchemaMismatch(f"{K} keypoints where earlier records had {n_kp}", line=lineno, path=path)
        frame = _int(fields[0], lineno, path, "frame")
        cid = _int(fields[1], lineno, path, "camera_id")
        x, y, w, h, score = _floats(fields[2:7], lineno, path)
        kp = valid = None
        if K:
            kp = np.array(_floats(fields[7:7 + 2 * K], lineno, path)).reshape(K, 2)
            flags = fields[7 + 2 * K:]
            if any(f not in ("0", "1") for f in flags):
                raise ParseError("validity flags must be 0 or 1", line=lineno, path=path)
            valid = np.array([f == "1" for f in flags])
        try:
            obs = Observation2D(frame, cid, np.array([x, y]), w, h, score, keypoints=kp, valid=valid)
        except Exception as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
        streams.setdefault(cid, {}).setdefault(frame, []).append(obs)
    return streams


def write_detections(path, streams: dict[int, dict[int, list[Observation2D]]]):
    records = []
    for cid in sorted(streams):
        for t in sorted(streams[cid]):
            for o in streams[cid][t]:
                records.append((t, cid, o))
    records.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w") as fh:
        fh.write("# frame camera_id x y w h score [u v]*K [valid]*K\n")
        for t, cid, o in records:
            fields = [str(t), str(cid), _fmt(o.center[0]), _fmt(o.center[1]), _fmt(o.w), _fmt(o.h), _fmt(o.score)]
            if o.keypoints is not None:
                fields += [_fmt(v) for v in np.asarray(o.keypoints).ravel()]
                valid = o.valid if o.valid is not None else np.ones(len(o.keypoints), dtype=bool)
                fields += ["1" if v else "0" for v in valid]
            fh.write(" ".join(fields) + "\n")


# ---------------------------------------------------------------------------
# trajectories


def track_records(tracks: dict[int, dict[int, np.ndarray]]):
    """Records ``(global_id, frame, position)`` ordered by frame, then id."""
    recs = [(gid, t, pos) for gid, traj in tracks.items() for t, pos in traj.items()]
    recs.sort(key=lambda r: (r[1], r[0]))
    return recs


def format_track_record(gid, frame, pos) -> str:
    pos = np.asarray(pos, dtype=float)
    if pos.ndim == 1:
        head = pos
        tail = []
    else:
        ok = ~np.isnan(pos).any(axis=1)
        head = pos[ok].mean(axis=0) if ok.any() else np.full(3, np.nan)
        tail = pos.ravel()
    return " ".join([str(int(gid)), str(int(frame)), *(_fmt(v) for v in head), *(_fmt(v) for v in tail)])


def write_tracks(path, tracks: dict[int, dict[int, np.ndarray]]):
    with open(path, "w") as fh:
        fh.write("# global_id frame X Y Z [X Y Z]*K\n")
        for gid, t, pos in track_records(tracks):
            fh.write(format_track_record(gid, t, pos) + "\n")


def load_tracks(path) -> dict[int, dict[int, np.ndarray]]:
    tracks: dict[int, dict[int, np.ndarray]] = {}
    n_joints: Optional[int] = None
    for lineno, fields in _records(path):
        if len(fields) < 5 or (len(fields) - 5) % 3:
            raise ParseError(
                f"expected global_id frame X Y Z followed by joint triples, got {len(fields)} fields",
                line=lineno, path=path,
            )
        K = (len(fields) - 5) // 3
        if n_joints is None:
            n_joints = K
        elif K != n_joints:
            raise SchemaMismatch(f"{K} joints where earlier records had {n_joints}", line=lineno, path=path)
        gid = _int(fields[0], lineno, path, "global_id")
        t = _int(fields[1], lineno, path, "frame")
        vals = np.array(_floats(fields[2:], lineno, path))
        pos = vals[3:].reshape(K, 3) if K else vals[:3]
        traj = tracks.setdefault(gid, {})
        if t in traj:
            raise ParseError(f"duplicate record for track {gid} at frame {t}", line=lineno, path=path)
        traj[t] = pos
    return tracks
