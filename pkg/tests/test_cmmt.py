import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvtrack.cmmt import (
    _masked_median,
    _powers,
    _quadratic_fit,
    InterpolatedTracklet,
    candidate_positions,
    cmmt,
    complete_linkage_3d,
    fuse_largest,
    interpolate_tracklet,
)
from mvtrack.errors import EmptyFrame, EmptyTracklet
from mvtrack.geometry import Observation2D, project
from mvtrack.svtrack import Tracklet2D
from mvtrack.windows import Window

from conftest import ring_rig
from scenarios import scipy_complete_linkage


def line_tracklet(frames, cam=0, x0=(100.0, 200.0), v=(3.0, -1.5)):
    obs = {t: Observation2D(t, cam, (x0[0] + v[0] * t, x0[1] + v[1] * t), 40.0, 120.0) for t in frames}
    return Tracklet2D(cam, 0, obs)


def path(t):
    return np.array([-1.0 + 0.04 * t, 0.8 - 0.03 * t, 0.0])


def person_tracklet(rig, cam, frames, lid=0):
    obs = {t: Observation2D(t, cam, project(rig[cam], path(t)), 50.0, 150.0) for t in frames}
    return Tracklet2D(cam, lid, obs)


# --- interpolation -----------------------------------------------------------------

def test_gap_midpoint():
    tl = Tracklet2D(0, 0, {0: Observation2D(0, 0, (0.0, 0.0), 10, 10),
                           2: Observation2D(2, 0, (4.0, 2.0), 10, 10)})
    out = interpolate_tracklet(tl, 7)
    np.testing.assert_allclose(out.infill[1].center, [2.0, 1.0])
    assert out.infill[1].synthetic


def test_long_gap_not_filled():
    tl = line_tracklet([0, 1, 2, 23, 24, 25])
    out = interpolate_tracklet(tl, 7)
    assert not any(3 <= t <= 22 for t in out.infill)


def test_linear_motion_every_third_dropped():
    frames = [t for t in range(60) if t % 3 != 1]
    out = interpolate_tracklet(line_tracklet(frames), 7)
    truth = line_tracklet(range(60))
    assert set(out.gap_frames) == {t for t in range(1, 59) if t % 3 == 1}
    for t, o in out.infill.items():
        np.testing.assert_allclose(o.center, truth.observations[t].center, atol=1e-9)


def test_never_extrapolates():
    out = interpolate_tracklet(line_tracklet(range(10, 20)), 7)
    assert min(out.infill) >= 10 and max(out.infill) <= 19


@given(st.lists(st.integers(0, 80), min_size=1, max_size=40, unique=True), st.integers(1, 10))
def test_infill_bounds(frames, phi):
    frames = sorted(frames)
    out = interpolate_tracklet(line_tracklet(frames), phi)
    for t in out.gap_frames:
        left = max(f for f in frames if f < t)
        right = min(f for f in frames if f > t)
        assert t - left <= phi and right - t <= phi


# --- candidates -----------------------------------------------------------------------

def test_candidates_one_entry_per_camera():
    rig = ring_rig(3)
    tls = [person_tracklet(rig, c, [5], lid=c) for c in range(3)]
    bare = [InterpolatedTracklet(t) for t in tls]
    assert len(candidate_positions(tls, 5, rig, interpolated=bare)) == 3


def test_candidates_with_infill_pairs():
    rig = ring_rig(2)
    tls = [person_tracklet(rig, c, range(10), lid=c) for c in range(2)]
    cs = candidate_positions(tls, 5, rig)
    assert len(cs) == 4
    assert all(a != b for (a, b), _ in cs.provenance)


def test_candidates_noiseless_accuracy():
    rig = ring_rig(4)
    tls = [person_tracklet(rig, c, range(20), lid=c) for c in range(4)]
    cs = candidate_positions(tls, 10, rig)
    err = np.linalg.norm(cs.points - path(10), axis=1)
    observed = np.array([not any(syn) for _, syn in cs.provenance])
    assert np.all(err[observed] <= 1e-6)
    # smoothed duplicates fit a parabola to a perspective curve: micrometre bias
    assert np.all(err <= 1e-5)


def test_candidates_empty_frame():
    rig = ring_rig(2)
    tls = [person_tracklet(rig, 0, range(10))]
    with pytest.raises(EmptyFrame):
        candidate_positions(tls, 5, rig)


# --- clustering and fusion ------------------------------------------------------------

def test_complete_linkage_kappa_examples():
    assert complete_linkage_3d([[0, 0, 0], [0.1, 0, 0]], 0.2) == [[0, 1]]
    assert len(complete_linkage_3d([[0, 0, 0], [0.5, 0, 0]], 0.2)) == 2


@given(st.integers(0, 100_000))
def test_complete_linkage_matches_oracle(seed):
    X = np.random.default_rng(seed).uniform(0, 0.6, (10, 3))
    D = np.linalg.norm(X[:, None] - X[None], axis=-1)
    ours = {frozenset(c) for c in complete_linkage_3d(X, 0.2)}
    assert ours == scipy_complete_linkage(D, 0.2)


def test_fuse_majority():
    gt = np.array([1.0, 2.0, 0.0])
    rng = np.random.default_rng(0)
    pts = np.vstack([gt + rng.uniform(-0.05, 0.05, (3, 3)), gt + [1, 0, 0], gt + [1.05, 0, 0]])
    c = fuse_largest(complete_linkage_3d(pts, 0.2), pts, 0.2)
    assert np.linalg.norm(c - gt) <= 0.05


def test_fuse_minority_inliers():
    gt = np.array([0.0, 0.0, 0.0])
    pts = np.array([gt + [0.02, 0, 0], gt - [0.02, 0, 0], [1, 0, 0], [0, 1.5, 0], [-1, -1, 0.5]])
    c = fuse_largest(complete_linkage_3d(pts, 0.2), pts, 0.2)
    assert np.linalg.norm(c - gt) < 0.2


def test_fuse_single():
    p = np.array([[0.3, 0.2, 0.1]])
    np.testing.assert_array_equal(fuse_largest(complete_linkage_3d(p, 0.2), p, 0.2), p[0])


# --- full chain ---------------------------------------------------------------------------

def _window(tls, start=0, stop=40):
    return Window((start + stop) // 2, start, stop, tls)


@pytest.mark.parametrize("method", ["cmmt", "ransac", "plain"])
def test_noiseless_cluster_exact(method):
    rig = ring_rig(4)
    tls = [person_tracklet(rig, c, range(40), lid=c) for c in range(4)]
    out = cmmt(tls, _window(tls), rig, method=method)
    assert sorted(out.points) == list(range(40))
    err = max(np.linalg.norm(out.points[t] - path(t)) for t in out.points)
    assert err <= (1e-4 if method == "cmmt" else 1e-6)


def test_dropped_observations_recovered():
    from mvtrack.sim import NoiseConfig, SceneConfig, generate_scene, render_detections
    from mvtrack.svtrack import tracklets_from_labels

    scene = generate_scene(SceneConfig(n_persons=1, n_cameras=4, duration=90, seed=3))
    dets = render_detections(scene, NoiseConfig(miss_rate=0.3, seed=3))
    tls = []
    for cid in sorted(dets.streams):
        tls += tracklets_from_labels([o for t in sorted(dets.streams[cid]) for o in dets.streams[cid][t]], 1)
    out = cmmt(tls, Window(45, 0, 90, tls), scene.rig)
    assert len(out.points) / 90 >= 0.95


def test_one_wrong_camera_contained():
    rig = ring_rig(4)
    tls = [person_tracklet(rig, c, range(40), lid=c) for c in range(3)]

    def other(t):
        return path(t) + np.array([1.5, -1.0, 0.0])

    wrong = Tracklet2D(3, 0, {t: Observation2D(t, 3, project(rig[3], other(t)), 50.0, 150.0) for t in range(40)})
    out = cmmt([*tls, wrong], _window(tls), rig)
    ok = [np.linalg.norm(out.points[t] - path(t)) <= 0.2 for t in range(40)]
    assert np.mean(ok) >= 0.9


def test_single_view_cluster_raises():
    rig = ring_rig(2)
    tls = [person_tracklet(rig, 0, range(10))]
    with pytest.raises(EmptyTracklet):
        cmmt(tls, _window(tls, 0, 10), rig)


def test_pose_mode_per_joint():
    from mvtrack.sim import NoiseConfig, SceneConfig, generate_scene, render_detections
    from mvtrack.svtrack import tracklets_from_labels

    scene = generate_scene(SceneConfig(n_persons=1, n_cameras=3, duration=30, seed=5))
    dets = render_detections(scene, NoiseConfig(), mode="pose")
    tls = []
    for cid in sorted(dets.streams):
        tls += tracklets_from_labels([o for t in sorted(dets.streams[cid]) for o in dets.streams[cid][t]], 1)
    out = cmmt(tls, Window(15, 0, 30, tls), scene.rig, mode="pose")
    err = max(np.nanmax(np.linalg.norm(out.points[t] - scene.poses[0, t], axis=1)) for t in out.points)
    assert out.points[0].shape == (15, 3)
    assert err <= 5e-3  # swinging limbs are far from locally quadratic in the image


@given(st.integers(0, 10_000))
def test_masked_median_matches_nanmedian(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(6, 9, 2))
    mask = rng.random(x.shape) < 0.6
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        want = np.nanmedian(np.where(mask, x, np.nan), axis=1)
    np.testing.assert_allclose(_masked_median(x, mask), want, equal_nan=True)


@given(st.integers(0, 10_000))
def test_quadratic_fit_matches_polyfit(seed):
    rng = np.random.default_rng(seed)
    off = np.arange(-7, 8, dtype=float)[None, :].repeat(3, axis=0)
    W = rng.uniform(0.1, 2.0, size=(3, 15, 2))
    Y = rng.normal(size=(3, 15, 2))
    coef, ok = _quadratic_fit(_powers(off), W, Y)
    assert ok.all()
    for m in range(3):
        for c in range(2):
            # polyfit weights multiply residuals, so pass sqrt of the LS weights
            want = np.polyfit(off[m], Y[m, :, c], 2, w=np.sqrt(W[m, :, c]))[::-1]
            np.testing.assert_allclose(coef[m, c], want, atol=1e-9)
