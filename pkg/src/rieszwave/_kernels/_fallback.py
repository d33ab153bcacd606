"""Pure-numpy fallbacks for the compiled pairwise kernels.

Same signatures and semantics as ``_speedups``; computed in row blocks to
bound memory.  Used automatically when the extension is unavailable.
"""
import numpy as np

_BLOCK = 256


def _min_image(diff, period):
    return diff - period * np.round(diff / period)


def riesz_double_sum(values, coords, period, beta, diag_factor):
    values = np.asarray(values, dtype=float)
    coords = np.asarray(coords, dtype=float)
    m = values.shape[0]
    total = 0.0
    for start in range(0, m, _BLOCK):
        stop = min(start + _BLOCK, m)
        diff = _min_image(coords[start:stop, None, :] - coords[None, :, :], period)
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        w = np.outer(values[start:stop], values)
        kern = np.where(r2 > 0.0, r2, 1.0) ** (-0.5 * beta)
        mask = r2 > 0.0
        # same-point pairs inside the block correspond to the diagonal
        total += float(np.sum(w * kern * mask))
    return total + diag_factor * float(np.sum(values * values))


def gagliardo_double_sum(values, coords, period, gamma, p):
    values = np.asarray(values, dtype=float)
    coords = np.asarray(coords, dtype=float)
    m = values.shape[0]
    expo = -0.5 * (3.0 + gamma * p)
    total = 0.0
    for start in range(0, m, _BLOCK):
        stop = min(start + _BLOCK, m)
        diff = _min_image(coords[start:stop, None, :] - coords[None, :, :], period)
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        dv = np.abs(values[start:stop, None] - values[None, :])
        mask = r2 > 0.0
        total += float(np.sum(dv**p * np.where(mask, r2, 1.0) ** expo * mask))
    return total


def holder_max_ratio(values, points, rho, min_dist, max_dist):
    values = np.asarray(values, dtype=float)
    points = np.asarray(points, dtype=float)
    m = values.shape[0]
    best, ibest, jbest = 0.0, -1, -1
    for start in range(0, m, _BLOCK):
        stop = min(start + _BLOCK, m)
        diff = points[start:stop, None, 1:] - points[None, :, 1:]
        dist = np.abs(points[start:stop, None, 0] - points[None, :, 0]) + np.sqrt(
            np.einsum("ijk,ijk->ij", diff, diff)
        )
        dv = np.abs(values[start:stop, None] - values[None, :])
        mask = (dist > min_dist) & (dist <= max_dist)
        # only upper-triangle pairs
        rows = start + np.arange(stop - start)
        mask &= rows[:, None] < np.arange(m)[None, :]
        if not mask.any():
            continue
        ratios = np.where(mask, dv * np.where(mask, dist, 1.0) ** (-rho), -1.0)
        k = int(np.argmax(ratios))
        i, j = divmod(k, m)
        if ratios[i, j] > best:
            best, ibest, jbest = float(ratios[i, j]), start + i, int(j)
    return best, ibest, jbest
