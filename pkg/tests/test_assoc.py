import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvtrack.assoc import (
    DistanceKind,
    TrackletDistance,
    distance_matrix,
    pairwise_set_distance,
    pdnc,
    tracklet_distance,
)
from mvtrack.geometry import Observation2D, project
from mvtrack.svtrack import Tracklet2D

from conftest import ring_rig
from scenarios import (
    FIG12_LAMBDA,
    FIG12_TRACKLETS,
    as_partition,
    fig12_matrix,
    fig12_truth,
    scipy_complete_linkage,
    strategy,
)


def person_tracklet(rig, cam, frames, path, lid=0):
    obs = {t: Observation2D(t, cam, project(rig[cam], path(t)), 50.0, 150.0) for t in frames}
    return Tracklet2D(cam, lid, obs)


def walk(t):
    return np.array([-1.0 + 0.05 * t, 0.5 - 0.02 * t, 0.0])


# --- distances ---------------------------------------------------------------

def test_set_distance_cardinality_and_empty():
    rig = ring_rig(2)
    a = person_tracklet(rig, 0, range(5, 13), walk)
    b = person_tracklet(rig, 1, range(10, 20), walk)
    c = person_tracklet(rig, 1, range(30, 40), walk)
    F = rig.fundamental(0, 1)
    assert len(pairwise_set_distance(a, b, F)) == 3
    assert len(pairwise_set_distance(a, c, F)) == 0


def test_set_distance_same_person_noiseless():
    rig = ring_rig(4)
    a = person_tracklet(rig, 0, range(20), walk)
    b = person_tracklet(rig, 3, range(20), walk)
    assert np.all(pairwise_set_distance(a, b, rig.fundamental(0, 3)) <= 1e-9)


def test_tracklet_distance_states():
    rig = ring_rig(2)
    a = person_tracklet(rig, 0, range(10), walk)
    same_cam = person_tracklet(rig, 0, range(5, 15), walk, lid=1)
    later = person_tracklet(rig, 1, range(20, 30), walk)
    assert tracklet_distance(a, same_cam, rig).kind is DistanceKind.FORBIDDEN
    assert tracklet_distance(a, later, rig).kind is DistanceKind.INCALCULABLE
    assert tracklet_distance(a, person_tracklet(rig, 0, range(20, 30), walk, 2), rig).kind \
        is DistanceKind.INCALCULABLE


def test_tracklet_distance_is_mean_of_set(monkeypatch):
    import mvtrack.assoc as assoc
    rig = ring_rig(2)
    a = person_tracklet(rig, 0, range(3), walk)
    b = person_tracklet(rig, 1, range(3), walk)
    monkeypatch.setattr(assoc, "pairwise_set_distance", lambda *a, **k: np.array([0.1, 0.2, 0.3]))
    d = assoc.tracklet_distance(a, b, rig)
    assert d.kind is DistanceKind.FINITE and d.value == pytest.approx(0.2)


def test_distance_matrix_symmetric():
    rig = ring_rig(3)
    tls = [person_tracklet(rig, c, range(10), walk, lid=c) for c in range(3)]
    D = distance_matrix(tls, rig)
    assert np.array_equal(D, D.T, equal_nan=True)


def test_tracklet_distance_variants():
    assert TrackletDistance.from_float(float("nan")).kind is DistanceKind.INCALCULABLE
    assert TrackletDistance.from_float(float("inf")).kind is DistanceKind.FORBIDDEN
    with pytest.raises(ValueError):
        TrackletDistance.finite(-0.1)


# --- PDNC ------------------------------------------------------------------------

def random_matrix(rng, n, p_nan=0.0, p_inf=0.1):
    D = rng.uniform(0, 1, (n, n))
    D[rng.random((n, n)) < p_inf] = np.inf
    D[rng.random((n, n)) < p_nan] = np.nan
    D = np.triu(D, 1)
    D = D + D.T
    np.fill_diagonal(D, np.nan)
    return D


@given(st.integers(0, 100_000), st.integers(1, 8), st.floats(0.05, 0.9))
def test_pdnc_reduces_to_complete_linkage(seed, n, lam):
    D = random_matrix(np.random.default_rng(seed), n)
    assert as_partition(pdnc(D, lam)) == scipy_complete_linkage(D, lam)


@given(st.integers(0, 100_000), st.integers(1, 10), st.floats(0.05, 0.9))
def test_pdnc_invariants(seed, n, lam):
    D = random_matrix(np.random.default_rng(seed), n, p_nan=0.3, p_inf=0.15)
    res = pdnc(D, lam)
    flat = sorted(i for c in res.clusters for i in c)
    assert flat == list(range(n))
    for c in res.clusters:
        for i in c:
            for j in c:
                assert not np.isinf(D[i, j])
    for _, _, d in res.merges:
        assert np.isfinite(d) and d < lam
    again = pdnc(D.copy(), lam)
    assert again.clusters == res.clusters


def test_pdnc_incalculable_pair_joins_by_propagation():
    nan = float("nan")
    D = np.array([[nan, 0.1, nan], [0.1, nan, 0.2], [nan, 0.2, nan]])
    assert pdnc(D, 0.3).clusters == [[0, 1, 2]]
    D2 = np.array([[nan, nan], [nan, nan]])
    assert pdnc(D2, 0.3).clusters == [[0], [1]]


def test_pdnc_tie_break_lexicographic():
    nan = float("nan")
    D = np.array([[nan, 0.1, 0.1], [0.1, nan, 0.1], [0.1, 0.1, nan]])
    assert pdnc(D, 0.3).merges[0][:2] == (0, 1)


def _all_merge_orders(D, lam, clusters=None):
    """Every partition reachable by merging any Finite pair below lam in any order."""
    if clusters is None:
        clusters = tuple(frozenset([i]) for i in range(len(D)))
    finals = set()
    moved = False
    for a in range(len(clusters)):
        for b in range(a + 1, len(clusters)):
            vals = [D[i, j] for i in clusters[a] for j in clusters[b]]
            known = [v for v in vals if not np.isnan(v)]
            if not known:
                continue
            d = max(known)
            if d < lam:
                moved = True
                merged = clusters[a] | clusters[b]
                rest = tuple(c for k, c in enumerate(clusters) if k not in (a, b))
                finals |= _all_merge_orders(D, lam, rest + (merged,))
    if not moved:
        finals.add(frozenset(clusters))
    return finals


def test_forbidden_dominance_all_merge_orders():
    rng = np.random.default_rng(5)
    for _ in range(30):
        D = random_matrix(rng, 5, p_nan=0.3, p_inf=0.0)
        # tracklets 0 and 1: same camera, overlapping; 2 bridges them
        D[0, 1] = D[1, 0] = np.inf
        D[0, 2] = D[2, 0] = 0.05
        D[1, 2] = D[2, 1] = 0.06
        for partition in _all_merge_orders(D, 0.5):
            assert not any({0, 1} <= c for c in partition)
        assert not any({0, 1} <= set(c) for c in pdnc(D, 0.5).clusters)


def test_pdnc_rejects_asymmetric():
    with pytest.raises(ValueError):
        pdnc(np.array([[np.nan, 0.1], [0.2, np.nan]]), 0.3)


# --- the clustering comparison scenario -------------------------------------------

def test_fig12_pdnc_two_camera_exclusive_clusters():
    D = fig12_matrix()
    assert np.isnan(D[2, 3])
    part = as_partition(pdnc(D, FIG12_LAMBDA))
    assert part == fig12_truth()
    for c in part:
        cams = [FIG12_TRACKLETS[i][0] for i in c]
        assert sorted(cams) == ["A", "B", "C", "D"]


def test_fig12_baselines_fail():
    D = fig12_matrix()
    truth = fig12_truth()
    mixed = lambda part: any(len({FIG12_TRACKLETS[i][1] for i in c}) > 1 for c in part)
    c = strategy("c", D)
    assert c != truth and mixed(c)
    d = strategy("d", D)
    assert d != truth and len(d) > 2  # the incalculable pair blocks person 0
    e = strategy("e", D)
    assert e == {frozenset(range(8))}
