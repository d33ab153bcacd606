"""Norm estimators and geometric sets.

Grid-restricted Hölder norms and moduli on a space-time window, fractional
Sobolev (Gagliardo) norms on lattice regions, the shrinking observation
sets K(t) and their enlargements, and gated Monte Carlo moment estimates.

All pairwise norms operate on sample points, so they are lower bounds of
their continuum counterparts; reported values should be labeled as grid
norms.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._kernels import gagliardo_double_sum, holder_max_ratio
from .lattice import Box, TorusGrid

__all__ = [
    "SpaceTimeWindow",
    "HolderResult",
    "MomentEstimate",
    "holder_norm",
    "holder_modulus",
    "frac_sobolev",
    "shrinking_set",
    "enlarge_set",
    "lp_moment",
    "PAIR_BUDGET",
]

PAIR_BUDGET = 10**6


@dataclass(frozen=True)
class SpaceTimeWindow:
    """Sampling window [t0, T] x K for Hölder statistics.

    ``times`` are the available sample times of the field (only those in
    [t0, T] are used); ``stride`` subsamples the spatial lattice.
    """

    grid: TorusGrid
    box: Box
    t0: float
    T: float
    times: tuple
    stride: int = 1

    def __post_init__(self):
        if not 0.0 < self.t0 < self.T:
            raise ValueError("need 0 < t0 < T")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if not any(self.t0 <= t <= self.T + 1e-12 for t in self.times):
            raise ValueError("no sample times inside [t0, T]")

    def time_indices(self):
        return [
            i for i, t in enumerate(self.times) if self.t0 <= t <= self.T + 1e-12
        ]

    def space_slices(self):
        return self.box.index_slices(self.grid, 0.0)

    def sample_points(self, values):
        """Flatten field samples to (points, values).

        ``values`` has shape (n_times, nx, ny, nz) on the window's box crop
        (or the full grid, in which case it is cropped here).  Points carry
        (t, x, y, z) with time first.
        """
        vals = np.asarray(values, float)
        (x0, x1), (y0, y1), (z0, z1) = self.space_slices()
        if vals.shape[1:] == (self.grid.points_per_axis,) * 3:
            vals = vals[:, x0:x1, y0:y1, z0:z1]
        expected = (x1 - x0, y1 - y0, z1 - z0)
        if vals.shape[1:] != expected:
            raise ValueError(
                f"field shape {vals.shape[1:]} matches neither the grid nor "
                f"the window box {expected}"
            )
        if len(self.times) != vals.shape[0]:
            raise ValueError("one field snapshot per window time required")
        it = self.time_indices()
        axis = self.grid.axis()
        s = self.stride
        xs = axis[x0:x1:s]
        ys = axis[y0:y1:s]
        zs = axis[z0:z1:s]
        tt = np.asarray([self.times[i] for i in it])
        T4, X4, Y4, Z4 = np.meshgrid(tt, xs, ys, zs, indexing="ij")
        pts = np.stack([T4, X4, Y4, Z4], axis=-1).reshape(-1, 4)
        flat = vals[it][:, ::s, ::s, ::s].reshape(-1)
        return np.ascontiguousarray(pts), np.ascontiguousarray(flat)


@dataclass(frozen=True)
class HolderResult:
    value: float
    sup: float
    seminorm: float
    pair: tuple  # ((t,x,y,z), (t,x,y,z)) of the maximizing increment


def _subsampled_max_ratio(pts, vals, rho, budget, seed):
    """Stratified dyadic-separation pair subsampling.

    Pairs are grouped by dyadic distance scale; each stratum draws an equal
    share of the budget of random pairs (anchor plus rejection on the
    distance window), deterministically from ``seed``.
    """
    m = len(vals)
    rng = np.random.default_rng(seed)
    extent = pts.max(axis=0) - pts.min(axis=0)
    dmax = extent[0] + np.linalg.norm(extent[1:])
    # smallest positive separation along any sampled axis
    dmin = np.inf
    for a in range(4):
        u = np.unique(pts[:, a])
        if len(u) > 1:
            dmin = min(dmin, np.min(np.diff(u)))
    n_strata = max(int(np.ceil(np.log2(dmax / dmin))) + 1, 1)
    per = max(budget // n_strata, 1)
    best, bi, bj = 0.0, -1, -1
    hi = dmax
    for _ in range(n_strata):
        lo = hi / 2.0
        got = 0
        for _ in range(8):  # a few rejection rounds per stratum
            ii = rng.integers(0, m, size=per)
            jj = rng.integers(0, m, size=per)
            diff = pts[ii, 1:] - pts[jj, 1:]
            dist = np.abs(pts[ii, 0] - pts[jj, 0]) + np.linalg.norm(diff, axis=1)
            keep = (dist > lo) & (dist <= hi)
            got += int(keep.sum())
            if keep.any():
                ratios = np.abs(vals[ii[keep]] - vals[jj[keep]]) / dist[keep] ** rho
                k = int(np.argmax(ratios))
                if ratios[k] > best:
                    best = float(ratios[k])
                    bi, bj = int(ii[keep][k]), int(jj[keep][k])
            if got >= per:
                break
        hi = lo
        if hi < dmin:
            break
    # polish: alternate exhaustive sweeps over each endpoint of the best pair
    if bi >= 0:
        for _ in range(4):
            improved = False
            for anchor in (bi, bj):
                diff = pts[:, 1:] - pts[anchor, 1:]
                dist = np.abs(pts[:, 0] - pts[anchor, 0]) + np.linalg.norm(
                    diff, axis=1
                )
                ok = dist > 0
                ratios = np.where(
                    ok, np.abs(vals - vals[anchor]) / np.where(ok, dist, 1.0) ** rho, -1.0
                )
                k = int(np.argmax(ratios))
                if ratios[k] > best + 1e-15:
                    best = float(ratios[k])
                    bi, bj = anchor, k
                    improved = True
            if not improved:
                break
    return best, bi, bj


def holder_norm(values, rho, window, budget=PAIR_BUDGET, seed=0, detail=False):
    """Grid Hölder norm sup|g| + sup |Δg|/(|Δt|+|Δx|)^rho on the window.

    Exhaustive pair enumeration below ``budget`` pairs; otherwise stratified
    dyadic-distance subsampling (a lower bound, deterministic in ``seed``).
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("need 0 < rho < 1")
    pts, vals = window.sample_points(values)
    if len(vals) == 0:
        raise ValueError("empty window")
    n_pairs = len(vals) * (len(vals) - 1) // 2
    if n_pairs <= budget:
        semi, bi, bj = holder_max_ratio(vals, pts, rho, 0.0, np.inf)
    else:
        semi, bi, bj = _subsampled_max_ratio(pts, vals, rho, budget, seed)
    sup = float(np.max(np.abs(vals)))
    value = sup + semi
    if not detail:
        return value
    pair = (tuple(pts[bi]), tuple(pts[bj])) if bi >= 0 else None
    return HolderResult(value=value, sup=sup, seminorm=float(semi), pair=pair)


def holder_modulus(values, rho_prime, delta, window, budget=PAIR_BUDGET, seed=0):
    """sup over pairs with |Δt|+|Δx| <= delta of |Δg|/(|Δt|+|Δx|)^rho'.

    Returns 0 (with a warning) when no pair qualifies.
    """
    if not 0.0 < rho_prime < 1.0:
        raise ValueError("need 0 < rho' < 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    pts, vals = window.sample_points(values)
    if len(vals) == 0:
        raise ValueError("empty window")
    n_pairs = len(vals) * (len(vals) - 1) // 2
    if n_pairs <= budget:
        best, bi, _ = holder_max_ratio(vals, pts, rho_prime, 0.0, float(delta))
    else:
        best, bi = 0.0, -1
        m = len(vals)
        rng = np.random.default_rng(seed)
        per = budget
        ii = rng.integers(0, m, size=per)
        jj = rng.integers(0, m, size=per)
        diff = pts[ii, 1:] - pts[jj, 1:]
        dist = np.abs(pts[ii, 0] - pts[jj, 0]) + np.linalg.norm(diff, axis=1)
        keep = (dist > 0) & (dist <= delta)
        if keep.any():
            ratios = np.abs(vals[ii[keep]] - vals[jj[keep]]) / dist[keep] ** rho_prime
            best, bi = float(np.max(ratios)), 0
    if bi < 0:
        warnings.warn("no sample pair within delta; modulus defined as 0")
        return 0.0
    return float(best)


def frac_sobolev(values, gamma, p, region, grid):
    """Gagliardo seminorm and full fractional Sobolev norm on a region.

    ``region`` is a boolean lattice mask; the double sum uses minimal-image
    distances, cell volumes h^3 per point, and excludes coincident points
    (so the diagonal cutoff is one grid spacing).  Returns
    (seminorm, (Lp^p + seminorm^p)^(1/p)).
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("need 0 < gamma < 1")
    if p < 1.0:
        raise ValueError("need p >= 1")
    region = np.asarray(region, bool)
    vals = np.asarray(values, float)
    if region.shape != vals.shape or region.shape != (grid.points_per_axis,) * 3:
        raise ValueError("values, region, and grid shapes disagree")
    if not region.any():
        raise ValueError("empty region")
    coords = grid.coords()[region.ravel()]
    v = np.ascontiguousarray(vals[region])
    h3 = grid.spacing**3
    semi_p = gagliardo_double_sum(
        v, np.ascontiguousarray(coords), grid.side_length, gamma, float(p)
    ) * h3 * h3
    semi = semi_p ** (1.0 / p)
    lp_p = float(np.sum(np.abs(v) ** p)) * h3
    full = (lp_p + semi_p) ** (1.0 / p)
    return semi, full


def shrinking_set(box, t, T, grid):
    """Lattice mask of K(t) = {x : d(x, K) <= T - t}; decreasing in t."""
    if not 0.0 <= t <= T:
        raise ValueError("need 0 <= t <= T")
    return box.distance_grid(grid) <= T - t + 1e-12


def enlarge_set(region, eps, grid):
    """Lattice mask of the eps-enlargement of a region (Euclidean distance,
    periodic wrap)."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    region = np.asarray(region, bool)
    if eps == 0.0 or region.all():
        return region.copy()
    if not region.any():
        return region.copy()
    tiled = np.tile(region, (3, 3, 3))
    dist = ndimage.distance_transform_edt(~tiled, sampling=grid.spacing)
    n = grid.points_per_axis
    core = dist[n : 2 * n, n : 2 * n, n : 2 * n]
    return core <= eps + 1e-12


@dataclass(frozen=True)
class MomentEstimate:
    """Gated Monte Carlo moment E[|X|^p 1_gate] with a 95% interval."""

    label: str
    p: float
    estimate: float
    ci_low: float
    ci_high: float
    n_replicas: int
    gated_fraction: float
    undefined: bool = False
    level: int = field(default=-1)

    @property
    def ci_half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)

    def csv_row(self):
        return (
            self.label,
            self.level,
            self.p,
            self.estimate,
            self.ci_low,
            self.ci_high,
            self.n_replicas,
            self.gated_fraction,
        )


def lp_moment(samples, p, gates=None, label="", level=-1):
    """Gated sample moment mean(|X|^p · 1_gate) over replicas.

    The gate multiplies (it does not condition): the divisor is the total
    replica count.  Boolean samples get a Wilson interval, others a normal
    one; fewer than 30 replicas is an error, and an all-false gate flags the
    estimate as undefined.
    """
    x = np.asarray(samples, float)
    if x.ndim != 1:
        raise ValueError("samples must be one value per replica")
    n = len(x)
    if n < 30:
        raise ValueError("need at least 30 replicas for interval validity")
    if gates is None:
        g = np.ones(n, bool)
    else:
        g = np.asarray(gates, bool)
        if g.shape != x.shape:
            raise ValueError("one gate flag per replica required")
    undefined = not g.any()
    vals = np.abs(x) ** p * g
    est = float(np.mean(vals))
    is_indicator = np.array_equal(np.abs(x), np.abs(x).astype(bool).astype(float))
    if is_indicator:
        k = int(np.sum(vals > 0))
        lo, hi = _wilson(k, n)
    else:
        hw = 1.959963984540054 * float(np.std(vals, ddof=1)) / np.sqrt(n)
        lo, hi = est - hw, est + hw
    return MomentEstimate(
        label=label,
        p=float(p),
        estimate=est,
        ci_low=lo,
        ci_high=hi,
        n_replicas=n,
        gated_fraction=float(np.mean(~g)),
        undefined=undefined,
        level=level,
    )


def _wilson(k, n, z=1.959963984540054):
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return center - half, center + half
