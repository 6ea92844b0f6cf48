"""Hand-built inputs shared by the unit and acceptance tests."""
import numpy as np

NAN = float("nan")
INF = float("inf")

# Four cameras (A-D) watch two people inside one window of 30 frames.
# Distances use the doubled scale of the clustering comparison figure, so the
# cut is 0.5. Tracklets 2 and 3 belong to the same person but share no frame
# (the person leaves camera C before entering camera D), and camera C later
# sees the second person, so tracklets 2 and 6 share no frame either.
FIG12_LAMBDA = 0.5
FIG12_TRACKLETS = [
    # (camera, person, first frame, stop frame)
    ("A", 0, 0, 30),
    ("B", 0, 0, 30),
    ("C", 0, 0, 12),
    ("D", 0, 15, 30),
    ("A", 1, 0, 30),
    ("B", 1, 0, 30),
    ("C", 1, 14, 30),
    ("D", 1, 0, 30),
]
# finite distances between temporally overlapping cross-camera tracklets;
# 3-6 is the one ambiguous cross-person pair
_FINITE = {
    (0, 1): 0.15, (0, 2): 0.40, (0, 3): 0.10, (1, 2): 0.25, (1, 3): 0.20,
    (4, 5): 0.12, (4, 6): 0.25, (4, 7): 0.18, (5, 6): 0.22, (5, 7): 0.20, (6, 7): 0.30,
    (3, 6): 0.17,
}
CROSS_PERSON = 0.90


def fig12_matrix():
    """Float-encoded matrix (NaN incalculable, inf forbidden) built from the spans."""
    n = len(FIG12_TRACKLETS)
    D = np.full((n, n), NAN)
    for i in range(n):
        for j in range(i + 1, n):
            ci, pi, a0, b0 = FIG12_TRACKLETS[i]
            cj, pj, a1, b1 = FIG12_TRACKLETS[j]
            overlap = min(b0, b1) > max(a0, a1)
            if not overlap:
                d = NAN
            elif ci == cj:
                d = INF
            else:
                d = _FINITE.get((i, j), CROSS_PERSON if pi != pj else None)
                assert d is not None, (i, j)
            D[i, j] = D[j, i] = d
    return D


def fig12_truth():
    return {frozenset(i for i, t in enumerate(FIG12_TRACKLETS) if t[1] == p) for p in (0, 1)}


def greedy_hac(D, lam, fill, update):
    """Conventional agglomerative clustering used as a comparison baseline.

    Incalculable entries are replaced by ``fill``; the merged cluster's
    distance is ``update`` (max or min) of its parts. Ties go to the lowest
    index pair. Returns a set of frozensets.
    """
    D = np.where(np.isnan(D), fill, D).astype(float)
    n = len(D)
    alive = list(range(n))
    members = {i: {i} for i in range(n)}
    while True:
        best = None
        for a in range(len(alive)):
            for b in range(a + 1, len(alive)):
                i, j = alive[a], alive[b]
                if D[i, j] < lam and (best is None or D[i, j] < best[0]):
                    best = (D[i, j], i, j)
        if best is None:
            break
        _, i, j = best
        new = update(D[i], D[j])
        D[i, :] = new
        D[:, i] = new
        members[i] |= members.pop(j)
        alive.remove(j)
    return {frozenset(m) for m in members.values()}


def strategy(name, D, lam=FIG12_LAMBDA):
    """Clustering strategies (c), (d) and (e) of the comparison figure."""
    if name == "c":
        return greedy_hac(D, lam, 0.0, np.maximum)
    if name == "d":
        return greedy_hac(D, lam, 1.0, np.maximum)
    if name == "e":
        return greedy_hac(D, lam, 1.0, np.minimum)
    raise ValueError(name)


def scipy_complete_linkage(D, lam):
    """Textbook complete-linkage partition cut strictly below ``lam``."""
    from scipy.cluster.hierarchy import fcluster, linkage
    from scipy.spatial.distance import squareform

    n = len(D)
    if n == 1:
        return {frozenset([0])}
    M = np.where(np.isinf(D), 1e6, D).copy()
    np.fill_diagonal(M, 0.0)
    Z = linkage(squareform(M, checks=False), method="complete")
    labels = fcluster(Z, np.nextafter(lam, 0.0), criterion="distance")
    return {frozenset(np.flatnonzero(labels == k).tolist()) for k in set(labels)}


def as_partition(cluster_set):
    return {frozenset(c) for c in cluster_set.clusters}
