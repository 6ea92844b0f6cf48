"""Camera models, epipolar algebra and linear triangulation.

Conventions
-----------
* ``FundamentalPair(i, j).F`` maps a pixel of camera ``i`` to its epipolar
  line in camera ``j``: ``x_j^T F x_i = 0``.
* Lines are homogeneous ``(a, b, c)`` with ``a x + b y + c = 0``.
* Points in 3D are ``(3,)`` float arrays in meters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    BehindCamera,
    DegenerateBaseline,
    DegenerateBox,
    DegenerateRig,
    InfinitePoint,
    NoCommonJoints,
    NullLine,
)

_DEGENERATE_SV_TOL = 1e-10
_INFINITE_W_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CameraModel:
    camera_id: int
    projection: np.ndarray
    image_size: Optional[tuple[int, int]] = None

    def __post_init__(self):
        P = np.asarray(self.projection, dtype=float).reshape(3, 4)
        if not np.all(np.isfinite(P)):
            raise ValueError(f"camera {self.camera_id}: non-finite projection")
        if np.linalg.matrix_rank(P) < 3:
            raise ValueError(f"camera {self.camera_id}: projection must have rank 3")
        if abs(np.linalg.det(P[:, :3])) < 1e-12 * np.linalg.norm(P[:, :3]) ** 3:
            raise ValueError(f"camera {self.camera_id}: left 3x3 block is singular")
        P.setflags(write=False)
        object.__setattr__(self, "projection", P)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        M, p4 = self.projection[:, :3], self.projection[:, 3]
        return -np.linalg.solve(M, p4)

    @property
    def conditioner(self) -> np.ndarray:
        """Similarity bringing pixel coordinates to roughly unit magnitude."""
        if self.image_size is not None:
            w, h = self.image_size
            s = 2.0 / (w + h)
            cx, cy = w / 2.0, h / 2.0
        else:
            s, cx, cy = 1e-3, 0.0, 0.0
        return np.array([[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]])

    def depth_sign(self) -> float:
        return float(np.sign(np.linalg.det(self.projection[:, :3])))


@dataclass(frozen=True, eq=False)
class FundamentalPair:
    from_camera: int
    to_camera: int
    F: np.ndarray

    def reversed(self) -> "FundamentalPair":
        return FundamentalPair(self.to_camera, self.from_camera, self.F.T)


@dataclass(frozen=True, eq=False)
class Observation2D:
    """One person detection in one camera at one frame.

    ``keypoints`` is ``(K, 2)`` and ``valid`` a ``(K,)`` bool mask when pose
    input is used. ``synthetic`` marks interpolated entries and ``label``
    optionally carries a track or ground-truth identity.
    """

    frame: int
    camera_id: int
    center: np.ndarray
    w: float
    h: float
    score: float = 1.0
    keypoints: Optional[np.ndarray] = None
    valid: Optional[np.ndarray] = None
    synthetic: bool = False
    label: Optional[int] = None

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(2)
        object.__setattr__(self, "center", c)
        if not (self.w > 0 and self.h > 0):
            raise DegenerateBox(f"box must have w > 0 and h > 0, got w={self.w}, h={self.h}")
        if self.keypoints is not None:
            kp = np.asarray(self.keypoints, dtype=float).reshape(-1, 2)
            valid = (
                np.ones(len(kp), dtype=bool)
                if self.valid is None
                else np.asarray(self.valid, dtype=bool).reshape(len(kp))
            )
            object.__setattr__(self, "keypoints", kp)
            object.__setattr__(self, "valid", valid)

    @property
    def box_scale(self) -> float:
        return abs(self.w + self.h)

    @property
    def xyxy(self) -> np.ndarray:
        cx, cy = self.center
        return np.array([cx - self.w / 2, cy - self.h / 2, cx + self.w / 2, cy + self.h / 2])

    @classmethod
    def from_keypoints(cls, frame, camera_id, keypoints, valid=None, score=1.0, margin=0.0, **kw):
        """Build an observation whose box encloses every valid keypoint."""
        kp = np.asarray(keypoints, dtype=float).reshape(-1, 2)
        valid = np.ones(len(kp), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
        if not valid.any():
            raise NoCommonJoints("observation has no valid keypoints")
        lo = kp[valid].min(axis=0) - margin
        hi = kp[valid].max(axis=0) + margin
        w, h = max(hi[0] - lo[0], 1.0), max(hi[1] - lo[1], 1.0)
        return cls(frame, camera_id, (lo + hi) / 2.0, w, h, score, kp, valid, **kw)


class Triangulation(NamedTuple):
    point: np.ndarray
    residual: float


# ---------------------------------------------------------------------------
# camera construction helpers


def look_at_camera(camera_id, position, target, focal, image_size, up=(0.0, 0.0, 1.0)):
    """Pinhole camera at ``position`` looking at ``target`` with square pixels."""
    position = np.asarray(position, dtype=float)
    z = np.asarray(target, dtype=float) - position
    z /= np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, dtype=float))
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(z, [0.0, 1.0, 0.0])
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    w, h = image_size
    K = np.array([[focal, 0.0, w / 2.0], [0.0, focal, h / 2.0], [0.0, 0.0, 1.0]])
    P = K @ np.hstack([R, (-R @ position)[:, None]])
    return CameraModel(camera_id, P, (int(w), int(h)))


# ---------------------------------------------------------------------------
# projection


def project(camera, X, allow_behind=False) -> np.ndarray:
    """Project a world point to pixels; raises BehindCamera for depth <= 0."""
    P = camera.projection if isinstance(camera, CameraModel) else np.asarray(camera, dtype=float)
    xh = P @ np.append(np.asarray(X, dtype=float), 1.0)
    sign = np.sign(np.linalg.det(P[:, :3]))
    if xh[2] * sign <= 0 and not allow_behind:
        raise BehindCamera(f"point {X} has non-positive depth")
    if xh[2] == 0:
        raise BehindCamera(f"point {X} lies on the principal plane")
    return xh[:2] / xh[2]


def project_points(camera, X):
    """Vectorised projection. Returns ``(pixels (n, 2), depth (n,))``."""
    P = camera.projection if isinstance(camera, CameraModel) else np.asarray(camera, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    xh = X @ P[:, :3].T + P[:, 3]
    depth = xh[:, 2] * np.sign(np.linalg.det(P[:, :3]))
    with np.errstate(divide="ignore", invalid="ignore"):
        return xh[:, :2] / xh[:, 2:3], depth


# ---------------------------------------------------------------------------
# epipolar algebra


def _skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def fundamental_from_projections(cam_i: CameraModel, cam_j: CameraModel) -> FundamentalPair:
    """Fundamental matrix from camera ``i`` to camera ``j``.

    ``F = [e']_x P_j P_i^+`` with ``e' = P_j C_i``, scaled to unit Frobenius
    norm and sign-fixed so its largest-magnitude entry is positive.
    """
    Pi, Pj = cam_i.projection, cam_j.projection
    C = np.linalg.svd(Pi)[2][-1]
    e = Pj @ C
    if np.linalg.norm(e) <= 1e-12 * np.linalg.norm(Pj) * np.linalg.norm(C):
        raise DegenerateRig(f"cameras {cam_i.camera_id} and {cam_j.camera_id} share a center")
    F = _skew(e) @ Pj @ np.linalg.pinv(Pi)
    F /= np.linalg.norm(F)
    if F.flat[np.argmax(np.abs(F))] < 0:
        F = -F
    return FundamentalPair(cam_i.camera_id, cam_j.camera_id, F)


def epipolar_line(F, x) -> np.ndarray:
    F = F.F if isinstance(F, FundamentalPair) else np.asarray(F, dtype=float)
    x = np.asarray(x, dtype=float)
    line = F @ np.array([x[0], x[1], 1.0])
    if not np.any(line):
        raise NullLine(f"epipolar line of {tuple(x)} is the zero vector")
    return line


def point_line_distance(x, line) -> float:
    a, b, c = np.asarray(line, dtype=float)
    norm = np.hypot(a, b)
    if norm == 0.0:
        raise NullLine("line has a = b = 0")
    return abs(a * x[0] + b * x[1] + c) / norm


def _oriented_F(F, a_cam, b_cam):
    if isinstance(F, FundamentalPair):
        if F.from_camera == a_cam and F.to_camera == b_cam:
            return F.F
        if F.from_camera == b_cam and F.to_camera == a_cam:
            return F.F.T
        raise ValueError(
            f"fundamental pair {F.from_camera}->{F.to_camera} does not join cameras {a_cam}, {b_cam}"
        )
    return np.asarray(F, dtype=float)


def normalized_distances(xa, sa, xb, sb, F) -> np.ndarray:
    """Vectorised normalized epipolar distance.

    ``xa``/``xb`` are ``(n, 2)`` pixel arrays, ``sa``/``sb`` the box scales
    ``|w + h|`` and ``F`` maps camera a to camera b.
    """
    xa = np.atleast_2d(xa)
    xb = np.atleast_2d(xb)
    ha = np.column_stack([xa, np.ones(len(xa))])
    hb = np.column_stack([xb, np.ones(len(xb))])
    lb = ha @ F.T  # lines in b
    la = hb @ F  # lines in a
    na = np.hypot(la[:, 0], la[:, 1])
    nb = np.hypot(lb[:, 0], lb[:, 1])
    if np.any(na == 0) or np.any(nb == 0):
        raise NullLine("a point coincides with the epipole")
    da = np.abs(np.einsum("ij,ij->i", ha, la)) / na
    db = np.abs(np.einsum("ij,ij->i", hb, lb)) / nb
    return da / np.asarray(sa, dtype=float) + db / np.asarray(sb, dtype=float)


def normalized_pair_distance(a: Observation2D, b: Observation2D, F_ab) -> float:
    """Box-normalized symmetric epipolar distance between two detections."""
    if a.camera_id == b.camera_id:
        raise ValueError("observations must come from different cameras")
    if a.box_scale == 0 or b.box_scale == 0:
        raise DegenerateBox("w + h == 0")
    F = _oriented_F(F_ab, a.camera_id, b.camera_id)
    d_a = point_line_distance(a.center, epipolar_line(F.T, b.center))
    d_b = point_line_distance(b.center, epipolar_line(F, a.center))
    return d_a / a.box_scale + d_b / b.box_scale


def pose_pair_distance(a: Observation2D, b: Observation2D, F_ab) -> float:
    """Mean normalized distance over joints valid in both poses."""
    if a.keypoints is None or b.keypoints is None:
        raise NoCommonJoints("both observations need keypoints")
    common = a.valid & b.valid
    if not common.any():
        raise NoCommonJoints("no joint is valid in both observations")
    F = _oriented_F(F_ab, a.camera_id, b.camera_id)
    d = normalized_distances(a.keypoints[common], a.box_scale, b.keypoints[common], b.box_scale, F)
    return float(d.mean())


# ---------------------------------------------------------------------------
# triangulation


def _dlt_rows(x, P):
    return np.stack([x[..., 0:1] * P[..., 2, :] - P[..., 0, :], x[..., 1:2] * P[..., 2, :] - P[..., 1, :]], axis=-2)


def _conditioned(x, cam):
    T = cam.conditioner
    return x * T[0, 0] + T[:2, 2], T @ cam.projection


def triangulate_batch(xa, xb, Pa, Pb, strict=False):
    """Pairwise linear triangulation of many correspondences at once.

    ``xa``, ``xb`` are ``(m, 2)`` conditioned pixel coordinates and ``Pa``,
    ``Pb`` the matching ``(m, 3, 4)`` (or ``(3, 4)``) conditioned projections.
    Returns ``(points (m, 3), ok (m,) bool)``; rows that are degenerate or at
    infinity are flagged instead of raised unless ``strict``.
    """
    xa = np.asarray(xa, dtype=float).reshape(-1, 2)
    xb = np.asarray(xb, dtype=float).reshape(-1, 2)
    m = len(xa)
    Pa = np.broadcast_to(Pa, (m, 3, 4))
    Pb = np.broadcast_to(Pb, (m, 3, 4))
    A = np.concatenate([_dlt_rows(xa, Pa), _dlt_rows(xb, Pb)], axis=1)
    A = A / np.linalg.norm(A, axis=2, keepdims=True)
    _, s, vt = np.linalg.svd(A)
    Xh = vt[:, -1, :]
    degenerate = (s[:, 2] - s[:, 3]) <= _DEGENERATE_SV_TOL * s[:, 0]
    at_infinity = np.abs(Xh[:, 3]) < _INFINITE_W_TOL
    ok = ~(degenerate | at_infinity)
    if strict:
        if degenerate.any():
            raise DegenerateBaseline("smallest singular values coincide; rays are parallel")
        if at_infinity.any():
            raise InfinitePoint("homogeneous w-component vanishes")
    with np.errstate(divide="ignore", invalid="ignore"):
        X = Xh[:, :3] / Xh[:, 3:4]
    return X, ok


def triangulate_pair(xa, xb, cam_a: CameraModel, cam_b: CameraModel) -> Triangulation:
    """Triangulate one correspondence; the residual is RMS reprojection error in px."""
    if cam_a.camera_id == cam_b.camera_id and cam_a is cam_b:
        raise DegenerateBaseline("both points come from the same camera")
    ca, Pa = _conditioned(np.asarray(xa, dtype=float), cam_a)
    cb, Pb = _conditioned(np.asarray(xb, dtype=float), cam_b)
    X, _ = triangulate_batch(ca, cb, Pa, Pb, strict=True)
    X = X[0]
    ra = project_points(cam_a, X)[0][0] - xa
    rb = project_points(cam_b, X)[0][0] - xb
    residual = float(np.sqrt((ra @ ra + rb @ rb) / 2.0))
    return Triangulation(X, residual)


def triangulate_views(xs, cams) -> np.ndarray:
    """Least-squares DLT over any number of views (no degeneracy checks)."""
    rows = []
    for x, cam in zip(xs, cams):
        cx, P = _conditioned(np.asarray(x, dtype=float), cam)
        rows.append(_dlt_rows(cx[None], P[None])[0])
    A = np.concatenate(rows)
    A = A / np.linalg.norm(A, axis=1, keepdims=True)
    Xh = np.linalg.svd(A)[2][-1]
    return Xh[:3] / Xh[3]


@dataclass
class Rig:
    """Camera set with fundamental matrices cached per ordered pair."""

    cameras: dict[int, CameraModel]
    _F: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not isinstance(self.cameras, dict):
            self.cameras = {c.camera_id: c for c in self.cameras}
        ids = sorted(self.cameras)
        for n, i in enumerate(ids):
            for j in ids[n + 1:]:
                pair = fundamental_from_projections(self.cameras[i], self.cameras[j])
                self._F[(i, j)] = pair
                self._F[(j, i)] = pair.reversed()
        self._conditioned = {}
        for cid, cam in self.cameras.items():
            T = cam.conditioner
            self._conditioned[cid] = (T, T @ cam.projection)

    def __getitem__(self, camera_id) -> CameraModel:
        return self.cameras[camera_id]

    def __iter__(self):
        return iter(self.cameras.values())

    def __len__(self):
        return len(self.cameras)

    @property
    def camera_ids(self):
        return sorted(self.cameras)

    def fundamental(self, i, j) -> FundamentalPair:
        return self._F[(i, j)]

    def condition(self, camera_id, x):
        """Conditioned pixel coordinates and projection for ``camera_id``."""
        T, P = self._conditioned[camera_id]
        return np.asarray(x, dtype=float) * T[0, 0] + T[:2, 2], P
