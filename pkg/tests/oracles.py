"""Independent brute-force oracles used to check the library implementations.

Everything here is deliberately naive: exhaustive pairwise distances,
explicit flood fill, full permutation enumeration. None of it shares code
with the package.
"""

import itertools

import numpy as np


def brute_surface_mask(mask):
    """Surface voxels via explicit 6-neighbor checks."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros_like(mask)
    dims = mask.shape
    for idx in np.argwhere(mask):
        i, j, k = idx
        on_surface = False
        for d in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            ni, nj, nk = i + d[0], j + d[1], k + d[2]
            if not (0 <= ni < dims[0] and 0 <= nj < dims[1] and 0 <= nk < dims[2]):
                on_surface = True
                break
            if not mask[ni, nj, nk]:
                on_surface = True
                break
        if on_surface:
            out[i, j, k] = True
    return out


def brute_distance_field(surface_mask, spacing):
    """Min distance from every voxel center to any surface voxel center."""
    spacing = np.asarray(spacing, dtype=np.float64)
    targets = np.argwhere(surface_mask).astype(np.float64) * spacing
    out = np.empty(surface_mask.shape, dtype=np.float64)
    for idx in np.ndindex(surface_mask.shape):
        p = np.asarray(idx, dtype=np.float64) * spacing
        out[idx] = np.sqrt(((targets - p) ** 2).sum(axis=1)).min()
    return out


def brute_pooled_distances(gt, pred, spacing):
    """Pooled symmetric surface distances: pred->gt then gt->pred."""
    s_gt = brute_surface_mask(gt)
    s_pred = brute_surface_mask(pred)
    spacing = np.asarray(spacing, dtype=np.float64)
    pts_gt = np.argwhere(s_gt).astype(np.float64) * spacing
    pts_pred = np.argwhere(s_pred).astype(np.float64) * spacing
    d_pred = [np.sqrt(((pts_gt - p) ** 2).sum(axis=1)).min() for p in pts_pred]
    d_gt = [np.sqrt(((pts_pred - p) ** 2).sum(axis=1)).min() for p in pts_gt]
    return np.array(d_pred + d_gt)


def brute_percentile_linear(values, q):
    """Percentile with linear interpolation at rank q/100 * (n-1)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 1:
        return float(v[0])
    r = q / 100.0 * (v.size - 1)
    lo = int(np.floor(r))
    hi = int(np.ceil(r))
    frac = r - lo
    return float(v[lo] + frac * (v[hi] - v[lo]))


def flood_fill_components(mask, connectivity):
    """Connected components by explicit flood fill; returns list of index sets."""
    mask = np.asarray(mask, dtype=bool)
    offsets = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        if d == (0, 0, 0):
            continue
        manhattan = sum(abs(x) for x in d)
        if connectivity == 6 and manhattan > 1:
            continue
        if connectivity == 18 and manhattan > 2:
            continue
        offsets.append(d)
    seen = np.zeros_like(mask)
    components = []
    dims = mask.shape
    for start in np.argwhere(mask):
        start = tuple(int(x) for x in start)
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = set()
        while stack:
            cur = stack.pop()
            comp.add(cur)
            for d in offsets:
                nxt = (cur[0] + d[0], cur[1] + d[1], cur[2] + d[2])
                if all(0 <= nxt[a] < dims[a] for a in range(3)) \
                        and mask[nxt] and not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        components.append(comp)
    return components


def midranks(values):
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n)
    sv = values[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1
        i = j + 1
    return ranks


def enumerate_signed_rank_p(a, b):
    """Two-sided exact p by enumerating every sign assignment."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = midranks(np.abs(d))
    w_obs = min(ranks[d > 0].sum(), ranks[d < 0].sum())
    count = 0
    for signs in itertools.product((1, -1), repeat=n):
        s = np.asarray(signs)
        w = min(ranks[s > 0].sum(), ranks[s < 0].sum())
        if w <= w_obs + 1e-12:
            count += 1
    return count / 2 ** n


def enumerate_rank_sum_p(x, y):
    """Two-sided exact p by enumerating every group assignment."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = len(x), len(y)
    ranks = midranks(np.concatenate([x, y]))
    ux = ranks[:n].sum() - n * (n + 1) / 2
    u_obs = min(ux, n * m - ux)
    count = total = 0
    for subset in itertools.combinations(range(n + m), n):
        rs = ranks[list(subset)].sum()
        u1 = rs - n * (n + 1) / 2
        total += 1
        if min(u1, n * m - u1) <= u_obs + 1e-12:
            count += 1
    return count / total


def brute_nearest_label(src_voxels, src_centers, ref_centers):
    """Nearest-center label lookup over all source voxels (3D world coords).

    src_centers / ref_centers are per-axis 1D arrays of world coordinates.
    Ties prefer the lower index on each axis.
    """
    out_shape = tuple(len(c) for c in ref_centers)
    out = np.zeros(out_shape, dtype=src_voxels.dtype)
    for idx in np.ndindex(out_shape):
        best = []
        for axis in range(3):
            target = ref_centers[axis][idx[axis]]
            dist = np.abs(src_centers[axis] - target)
            best.append(int(np.flatnonzero(dist == dist.min())[0]))
        out[idx] = src_voxels[tuple(best)]
    return out
