import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvtrack.errors import BehindCamera, DegenerateBaseline, DegenerateBox, DegenerateRig, NullLine
from mvtrack.geometry import (
    CameraModel,
    Observation2D,
    epipolar_line,
    fundamental_from_projections,
    normalized_pair_distance,
    point_line_distance,
    pose_pair_distance,
    project,
    project_points,
    triangulate_pair,
)

from conftest import ring_rig


def oracle_project(P, X):
    """Independent projection: explicit row dot products."""
    w = sum(P[2, c] * v for c, v in enumerate([*X, 1.0]))
    u = sum(P[0, c] * v for c, v in enumerate([*X, 1.0]))
    v_ = sum(P[1, c] * v for c, v in enumerate([*X, 1.0]))
    return np.array([u / w, v_ / w])


def residual(F, xi, xj):
    return abs(np.array([*xj, 1.0]) @ F @ np.array([*xi, 1.0]))


# --- projection -------------------------------------------------------------

def test_project_identity_examples(identity_cam):
    np.testing.assert_allclose(project(identity_cam, [0, 0, 1]), [0, 0])
    np.testing.assert_allclose(project(identity_cam, [2, 4, 2]), [1, 2])


def test_project_behind_camera(identity_cam):
    with pytest.raises(BehindCamera):
        project(identity_cam, [0, 0, -1])


def test_project_matches_oracle():
    rng = np.random.default_rng(0)
    rig = ring_rig(4)
    for cam in rig:
        for _ in range(20):
            X = rng.uniform(-2, 2, 3)
            np.testing.assert_allclose(project(cam, X), oracle_project(cam.projection, X), rtol=1e-12)


# --- fundamental matrix ----------------------------------------------------

def test_fundamental_epipolar_identity_two_cameras():
    rig = ring_rig(2)
    X = np.array([0.3, -0.4, 1.1])
    F = rig.fundamental(0, 1).F
    xi, xj = project(rig[0], X), project(rig[1], X)
    xi_h = np.array([*xi, 1.0]) / np.linalg.norm([*xi, 1.0])
    xj_h = np.array([*xj, 1.0]) / np.linalg.norm([*xj, 1.0])
    assert abs(xj_h @ F @ xi_h) <= 1e-9


def test_fundamental_coincident_centers(identity_cam):
    with pytest.raises(DegenerateRig):
        fundamental_from_projections(identity_cam, identity_cam)


def test_fundamental_ring_residuals():
    rng = np.random.default_rng(1)
    rig = ring_rig(4, radius=6.0)
    pts = rng.uniform([-2, -2, 0], [2, 2, 2], size=(100, 3))
    worst = 0.0
    for i in rig.camera_ids:
        for j in rig.camera_ids:
            if i == j:
                continue
            F = rig.fundamental(i, j).F
            for X in pts:
                xi = oracle_project(rig[i].projection, X)
                xj = oracle_project(rig[j].projection, X)
                a = np.array([*xi, 1.0]) / np.linalg.norm([*xi, 1.0])
                b = np.array([*xj, 1.0]) / np.linalg.norm([*xj, 1.0])
                worst = max(worst, abs(b @ F @ a))
    assert worst <= 1e-8


def test_fundamental_rank_two_unit_norm():
    F = ring_rig(3).fundamental(0, 2).F
    s = np.linalg.svd(F, compute_uv=False)
    assert s[2] < 1e-12 * s[0]
    assert np.linalg.norm(F) == pytest.approx(1.0)


@given(st.integers(0, 10_000))
def test_fundamental_constraint_random_points(seed):
    rng = np.random.default_rng(seed)
    rig = ring_rig(3)
    X = rng.uniform([-2, -2, 0], [2, 2, 2])
    F = rig.fundamental(1, 2).F
    xi, xj = project(rig[1], X), project(rig[2], X)
    assert residual(F, xi, xj) / (np.linalg.norm([*xi, 1]) * np.linalg.norm([*xj, 1])) < 1e-9


# --- epipolar line and distances -------------------------------------------

def test_epipolar_line_null_at_epipole():
    with pytest.raises(NullLine):
        epipolar_line(np.diag([1.0, 1.0, 0.0]), (0.0, 0.0))


def test_epipolar_line_stereo_pair_distance():
    rig = ring_rig(2)
    X = np.array([1.0, 0.5, 0.2])
    xi, xj = project(rig[0], X), project(rig[1], X)
    assert point_line_distance(xj, epipolar_line(rig.fundamental(0, 1), xi)) <= 1e-9


def test_epipolar_line_matches_matrix_product():
    rng = np.random.default_rng(2)
    for _ in range(50):
        U, _, Vt = np.linalg.svd(rng.normal(size=(3, 3)))
        F = U @ np.diag([rng.uniform(1, 2), rng.uniform(0.1, 1), 0.0]) @ Vt
        x = rng.uniform(-100, 100, 2)
        expected = [sum(F[r, c] * v for c, v in enumerate([x[0], x[1], 1.0])) for r in range(3)]
        np.testing.assert_allclose(epipolar_line(F, x), expected, rtol=1e-12, atol=1e-12)


def test_point_line_distance_examples():
    assert point_line_distance((1, 1), (0, 1, -1)) == 0.0
    assert point_line_distance((0, 2), (0, 1, -1)) == 1.0


@given(
    st.tuples(*[st.floats(-1e3, 1e3) for _ in range(2)]),
    st.tuples(*[st.floats(-10, 10) for _ in range(3)]),
)
def test_point_line_distance_oracle(x, line):
    a, b, c = line
    if abs(a) + abs(b) < 1e-3:
        return
    expected = abs(a * x[0] + b * x[1] + c) / (a * a + b * b) ** 0.5
    assert point_line_distance(x, line) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def _obs(cam, X, w=60.0, h=160.0, frame=0):
    return Observation2D(frame, cam.camera_id, project(cam, X), w, h)


def test_normalized_distance_consistent_pair_zero_and_symmetric():
    rig = ring_rig(3)
    X = np.array([0.5, 0.2, 0.0])
    a, b = _obs(rig[0], X), _obs(rig[2], X)
    F = rig.fundamental(0, 2)
    assert normalized_pair_distance(a, b, F) == pytest.approx(0.0, abs=1e-9)
    off = Observation2D(0, 2, b.center + [7.0, -3.0], 50.0, 140.0)
    assert normalized_pair_distance(a, off, F) == pytest.approx(normalized_pair_distance(off, a, F), rel=1e-12)


def test_normalized_distance_degenerate_box():
    with pytest.raises(DegenerateBox):
        Observation2D(0, 0, (1.0, 1.0), 0.0, 10.0)


def test_pose_distance_masking():
    rig = ring_rig(2)
    rng = np.random.default_rng(3)
    joints = rng.uniform([-0.3, -0.3, 0.0], [0.3, 0.3, 1.7], size=(15, 3))
    ka = np.array([project(rig[0], X) for X in joints])
    kb = np.array([project(rig[1], X) for X in joints])
    F = rig.fundamental(0, 1)
    a = Observation2D.from_keypoints(0, 0, ka)
    b = Observation2D.from_keypoints(0, 1, kb)
    assert pose_pair_distance(a, b, F) == pytest.approx(0.0, abs=1e-9)

    noisy_b = kb + rng.normal(0, 3.0, kb.shape)
    valid = np.ones(15, dtype=bool)
    valid[4] = False
    a2 = Observation2D.from_keypoints(0, 0, ka, valid)
    b2 = Observation2D.from_keypoints(0, 1, noisy_b)
    per_joint = []
    for k in range(15):
        if not valid[k]:
            continue
        la = epipolar_line(F.F.T, noisy_b[k])
        lb = epipolar_line(F.F, ka[k])
        per_joint.append(point_line_distance(ka[k], la) / a2.box_scale
                         + point_line_distance(noisy_b[k], lb) / b2.box_scale)
    assert len(per_joint) == 14
    assert pose_pair_distance(a2, b2, F) == pytest.approx(np.mean(per_joint), rel=1e-9)


# --- triangulation -----------------------------------------------------------

def test_triangulate_roundtrip():
    rig = ring_rig(4)
    X = np.array([1.0, 2.0, 1.5])
    tri = triangulate_pair(project(rig[0], X), project(rig[1], X), rig[0], rig[1])
    np.testing.assert_allclose(tri.point, X, atol=1e-6)
    assert tri.residual < 1e-6


def test_triangulate_coincident_cameras(identity_cam):
    twin = CameraModel(1, identity_cam.projection.copy())
    with pytest.raises(DegenerateBaseline):
        triangulate_pair((0.1, 0.2), (0.1, 0.2), identity_cam, twin)


@given(st.integers(0, 10_000))
def test_triangulate_noiseless_random(seed):
    rng = np.random.default_rng(seed)
    rig = ring_rig(4)
    X = rng.uniform([-2.5, -2.5, 0], [2.5, 2.5, 2])
    i, j = rng.choice(4, 2, replace=False)
    tri = triangulate_pair(project(rig[i], X), project(rig[j], X), rig[i], rig[j])
    np.testing.assert_allclose(tri.point, X, atol=1e-6)


def _midpoint(xa, xb, ca, cb):
    """Midpoint of the common perpendicular of the two back-projected rays."""
    def ray(x, cam):
        M = cam.projection[:, :3]
        d = np.linalg.solve(M, [x[0], x[1], 1.0])
        return cam.center, d / np.linalg.norm(d)
    o1, d1 = ray(xa, ca)
    o2, d2 = ray(xb, cb)
    A = np.array([[d1 @ d1, -d1 @ d2], [d1 @ d2, -d2 @ d2]])
    s, t = np.linalg.solve(A, [(o2 - o1) @ d1, (o2 - o1) @ d2])
    return (o1 + s * d1 + o2 + t * d2) / 2


def test_triangulate_noise_vs_midpoint_oracle():
    from mvtrack.geometry import look_at_camera
    rng = np.random.default_rng(4)
    target = np.array([0.0, 0.0, 1.0])
    ca = look_at_camera(0, (-3.0, -5.0, 1.0), target, 800, (1280, 720))
    cb = look_at_camera(1, (3.0, -5.0, 1.0), target, 800, (1280, 720))
    ours, mids = [], []
    for _ in range(500):
        X = target + rng.uniform(-0.5, 0.5, 3)
        xa = project(ca, X) + rng.normal(0, 2.0, 2)
        xb = project(cb, X) + rng.normal(0, 2.0, 2)
        ours.append(np.linalg.norm(triangulate_pair(xa, xb, ca, cb).point - X))
        mids.append(np.linalg.norm(_midpoint(xa, xb, ca, cb) - X))
    assert np.median(ours) <= 1.1 * np.median(mids)


def test_project_points_depth_sign():
    rig = ring_rig(2)
    px, depth = project_points(rig[0], np.array([[0.0, 0.0, 0.5], rig[0].center * 2]))
    assert depth[0] > 0 and depth[1] < 0
