"""Pure numpy implementations of the clustering kernels.

Distance matrices encode the three tracklet-distance states as floats:
finite values, NaN for "incalculable" and +inf for "forbidden".
"""
import numpy as np


def propagable_linkage(D, threshold):
    """Greedy agglomerative merging with incalculable-aware max updates.

    Returns ``(roots, merges, D)``: ``roots[i]`` is the smallest original index
    in the cluster of ``i``, ``merges`` lists ``(i, j, distance)`` in order and
    ``D`` holds the final inter-cluster distances at the root indices.
    Closest-pair ties resolve to the lexicographically smallest ``(i, j)``.
    """
    D = np.array(D, dtype=float, copy=True)
    n = D.shape[0]
    roots = np.arange(n)
    merges = []
    if n < 2:
        return roots, merges, D
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    cand = np.where(upper & (D < threshold), D, np.inf)
    while True:
        flat = int(np.argmin(cand))
        i, j = divmod(flat, n)
        d = cand[i, j]
        if not d < threshold:
            break
        merges.append((i, j, float(d)))
        roots[roots == j] = i
        # fmax keeps the calculable side when one entry is NaN
        new = np.fmax(D[i], D[j])
        new[i] = new[j] = np.nan
        D[i, :] = new
        D[:, i] = new
        D[j, :] = np.nan
        D[:, j] = np.nan
        D[i, i] = np.nan
        cand[j, :] = np.inf
        cand[:, j] = np.inf
        row = np.where(new < threshold, new, np.inf)
        cand[i, i + 1:] = row[i + 1:]
        cand[:i, i] = row[:i]
    return roots, merges, D


def complete_linkage_points(X, threshold):
    """Complete-linkage over Euclidean point distances, cut at ``threshold``."""
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return propagable_linkage(D, threshold)[0]
