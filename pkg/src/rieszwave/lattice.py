"""Periodic spatial lattice, spectral transforms, and the working Hilbert space.

The space carries the semi-inner product ⟨φ,ψ⟩ = ∫ |ξ|^{β−3} Fφ(ξ) conj(Fψ(ξ)) dξ,
realized two independent ways on the discrete torus:

* Fourier side: per-frequency weights ŵ(k) (cell averages of the spectral
  density) contracted against unitary DFT coefficients.
* Kernel side: the double lattice sum of φ(x)φ(y)|x−y|^{−β} with minimal-image
  distances, tied to the spectral form by a calibrated constant.

Having both routes lets every norm used downstream be cross-checked.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma as _gamma

from . import _kernels

__all__ = [
    "TorusGrid",
    "Box",
    "SpectralWeights",
    "Field",
    "ModeIndexMap",
    "make_weights",
    "transform",
    "inverse_transform",
    "h_inner_spectral",
    "h_norm_kernel",
    "riesz_spectral_constant",
    "unit_cube_riesz_integral",
    "cell_self_interaction",
    "calibration_prediction",
]


def riesz_spectral_constant(beta):
    """Constant c(β) with Fourier transform of |x|^{−β} equal to c(β)|ξ|^{β−3}."""
    return 2.0 ** (3.0 - beta) * np.pi**1.5 * _gamma((3.0 - beta) / 2.0) / _gamma(beta / 2.0)


@lru_cache(maxsize=None)
def unit_cube_riesz_integral(beta, order=60):
    """∫ over the cube (−1/2,1/2)³ of |ξ|^{β−3} dξ.

    Via the divergence identity div(ξ|ξ|^{β−3}) = β|ξ|^{β−3}, the volume
    integral equals (6a/β)·∫∫_face (x²+y²+a²)^{(β−3)/2} dx dy with a = 1/2,
    which is smooth and handled by tensor Gauss–Legendre.
    """
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    a = 0.5
    x0, w0 = np.polynomial.legendre.leggauss(order)
    x = 0.5 * a * (x0 + 1.0)  # quarter face [0, a], exploit symmetry
    w = 0.5 * a * w0
    xx, yy = np.meshgrid(x, x, indexing="ij")
    face = 4.0 * np.sum(np.outer(w, w) * (xx * xx + yy * yy + a * a) ** ((beta - 3.0) / 2.0))
    return 6.0 * a / beta * face


def _graded_gl(panels, order):
    """Composite Gauss–Legendre nodes on (0,1], panels graded geometrically to 0."""
    edges = np.concatenate([[0.0], 2.0 ** -np.arange(panels, -1, -1.0)])
    x0, w0 = np.polynomial.legendre.leggauss(order)
    xs = [0.5 * (hi - lo) * (x0 + 1.0) + lo for lo, hi in zip(edges[:-1], edges[1:])]
    ws = [0.5 * (hi - lo) * w0 for lo, hi in zip(edges[:-1], edges[1:])]
    return np.concatenate(xs), np.concatenate(ws)


@lru_cache(maxsize=None)
def cell_self_interaction(beta, panels=14, order=8):
    """E|U−V|^{−β} for U, V independent uniform on a unit cube.

    Equals ∫_{[−1,1]³} Π(1−|d_i|)·|d|^{−β} dd; the tent density makes the
    integrand singular only at the origin, so geometrically graded panels
    converge fast.  Scale by h^{−β} for a cube of side h.
    """
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    x, w = _graded_gl(panels, order)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    W = w[:, None, None] * w[None, :, None] * w[None, None, :]
    F = (1 - X) * (1 - Y) * (1 - Z) * (X * X + Y * Y + Z * Z) ** (-beta / 2.0)
    return 8.0 * float(np.sum(W * F))


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic lattice on [0, L)³ with N points per axis."""

    side_length: float
    points_per_axis: int

    def __post_init__(self):
        if self.side_length <= 0:
            raise ValueError("side_length must be positive")
        n = self.points_per_axis
        if n < 4 or n % 2 != 0:
            raise ValueError("points_per_axis must be an even integer >= 4")

    @property
    def spacing(self):
        return self.side_length / self.points_per_axis

    @property
    def n_cells(self):
        return self.points_per_axis**3

    @property
    def cell_volume_spectral(self):
        """Volume (2π/L)³ of one spectral cell."""
        return (2.0 * np.pi / self.side_length) ** 3

    def axis(self):
        return self.spacing * np.arange(self.points_per_axis)

    def coords(self):
        """Flat (N³, 3) array of grid point coordinates."""
        ax = self.axis()
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def freq_integers(self):
        """Integer frequencies along one axis in DFT storage order."""
        n = self.points_per_axis
        return np.rint(np.fft.fftfreq(n) * n).astype(np.int64)

    def min_image_distance(self):
        """(N,N,N) array of minimal-image distances from the origin cell."""
        n, h = self.points_per_axis, self.spacing
        i = np.arange(n)
        d1 = h * np.minimum(i, n - i).astype(float)
        return np.sqrt(
            d1[:, None, None] ** 2 + d1[None, :, None] ** 2 + d1[None, None, :] ** 2
        )


@dataclass(frozen=True)
class Box:
    """Axis-aligned observation box [lo, hi] inside the fundamental domain."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi < lo):
            raise ValueError("box needs lo <= hi componentwise in 3 dimensions")

    @property
    def diameter(self):
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def distance_grid(self, grid):
        """Euclidean distance from each grid point to the box (no wrap)."""
        ax = grid.axis()
        per_axis = []
        for a in range(3):
            d = np.maximum(self.lo[a] - ax, 0.0) + np.maximum(ax - self.hi[a], 0.0)
            per_axis.append(d)
        dx, dy, dz = per_axis
        return np.sqrt(
            dx[:, None, None] ** 2 + dy[None, :, None] ** 2 + dz[None, None, :] ** 2
        )

    def index_slices(self, grid, pad):
        """Per-axis index ranges covering the box enlarged by pad."""
        n, h = grid.points_per_axis, grid.spacing
        out = []
        for a in range(3):
            lo = max(int(np.floor((self.lo[a] - pad) / h)), 0)
            hi = min(int(np.ceil((self.hi[a] + pad) / h)) + 1, n)
            out.append((lo, hi))
        return tuple(out)


@dataclass(frozen=True)
class SpectralWeights:
    """Per-frequency weights ŵ(k), stored in DFT layout on the grid."""

    grid: TorusGrid
    beta: float
    rule: str
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.weights.setflags(write=False)


def make_weights(grid, beta, rule="cell-average", quad_order=8):
    """Weights ŵ(k) for the spectral form of the ⟨·,·⟩ inner product.

    ``cell-average`` integrates |ξ|^{β−3} over the spectral cell of each k by
    fixed-order product Gauss–Legendre (the zero cell analytically, via exact
    radial integration reduced to a smooth face integral).  ``midpoint``
    evaluates the density at the cell center and is intended for diagnostics.
    """
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    if rule not in ("cell-average", "midpoint"):
        raise ValueError(f"unknown cell rule {rule!r}")
    n = grid.points_per_axis
    dxi = 2.0 * np.pi / grid.side_length
    half = n // 2
    # ŵ(k) depends on componentwise |k| only; compute one octant and mirror.
    kk = np.arange(half + 1, dtype=float)
    zero_cell = dxi ** (beta - 3.0) * unit_cube_riesz_integral(beta)
    oct_w = np.empty((half + 1,) * 3)
    if rule == "midpoint":
        K2 = kk[:, None, None] ** 2 + kk[None, :, None] ** 2 + kk[None, None, :] ** 2
        with np.errstate(divide="ignore"):
            oct_w = (dxi * np.sqrt(K2)) ** (beta - 3.0)
        oct_w[0, 0, 0] = zero_cell
    else:
        x0, w0 = np.polynomial.legendre.leggauss(quad_order)
        off = 0.5 * dxi * x0  # offsets within the cell
        qw = 0.5 * w0  # weights normalized so the cell average is Σ qw³·f
        xi2 = (dxi * kk[:, None] + off[None, :]) ** 2  # (half+1, q) squared positions
        for ix in range(half + 1):
            # vectorize over the (iy, iz) plane and all quadrature nodes
            r2 = (
                xi2[ix][None, None, :, None, None]
                + xi2[:, None, None, :, None]
                + xi2[None, :, None, None, :]
            )
            vals = r2 ** ((beta - 3.0) / 2.0)
            oct_w[ix] = np.einsum("q,r,s,yzqrs->yz", qw, qw, qw, vals)
        oct_w[0, 0, 0] = zero_cell
    idx = np.abs(grid.freq_integers())
    full = oct_w[np.ix_(idx, idx, idx)]
    return SpectralWeights(grid=grid, beta=beta, rule=rule, weights=full)


@dataclass
class Field:
    """Real scalar field on a TorusGrid with a cached spectral image."""

    grid: TorusGrid
    values: np.ndarray
    _spectral: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.points_per_axis,) * 3:
            raise ValueError("field values do not match the grid shape")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        self.values = v

    def spectral(self):
        if self._spectral is None:
            self._spectral = transform(self)
        return self._spectral

    @classmethod
    def from_spectral(cls, grid, coeffs):
        vals = inverse_transform(coeffs, grid)
        return cls(grid=grid, values=vals, _spectral=np.asarray(coeffs, dtype=complex))


def transform(phi):
    """Unitary forward DFT of a Field (factor N^{−3/2})."""
    n = phi.grid.points_per_axis
    return np.fft.fftn(phi.values) / n**1.5


def inverse_transform(coeffs, grid):
    """Unitary inverse DFT; returns real grid values."""
    n = grid.points_per_axis
    return np.real(np.fft.ifftn(coeffs) * n**1.5)


def _check_same_grid(*objs):
    grids = {(o.grid.side_length, o.grid.points_per_axis) for o in objs}
    if len(grids) > 1:
        raise ValueError("grid mismatch between inputs")


def h_inner_spectral(phi, psi, w):
    """⟨φ,ψ⟩ as Σ_k ŵ(k)·cell_volume·Fφ(k)·conj(Fψ(k))."""
    _check_same_grid(phi, psi, w)
    cv = w.grid.cell_volume_spectral
    acc = np.sum(w.weights * phi.spectral() * np.conj(psi.spectral()))
    return float(np.real(acc)) * cv


def riesz_double_sum_grid(phi, beta, method="fft"):
    """h⁶·Σ_{x,y} φ(x)φ(y)·k(x−y) with k the minimal-image Riesz kernel.

    The diagonal x = y uses the analytic same-cell average h^{−β}·E|U−V|^{−β}
    instead of the singular point value.  ``fft`` evaluates the double sum as
    a circular convolution; ``direct`` runs the explicit O(M²) pair loop and
    exists as a cross-check of the fast path.
    """
    grid = phi.grid
    h = grid.spacing
    diag = h ** (-beta) * cell_self_interaction(beta)
    if method == "direct":
        total = _kernels.riesz_double_sum(
            np.ascontiguousarray(phi.values.ravel()),
            np.ascontiguousarray(grid.coords()),
            grid.side_length,
            beta,
            diag,
        )
        return h**6 * total
    dist = grid.min_image_distance()
    with np.errstate(divide="ignore"):
        kern = dist ** (-beta)
    kern[0, 0, 0] = diag
    conv = np.real(np.fft.ifftn(np.fft.fftn(phi.values) * np.fft.fftn(kern)))
    return h**6 * float(np.sum(phi.values * conv))


def _reference_bump(grid):
    # width sits mid-range of the bump family used for validation, so the
    # discretization bias of the double sum is split evenly around zero
    ax = grid.axis()
    c = 0.5 * grid.side_length
    sig = 0.09 * grid.side_length
    d1 = ax - c
    g1 = np.exp(-0.5 * (d1 / sig) ** 2)
    return Field(grid, g1[:, None, None] * g1[None, :, None] * g1[None, None, :])


_CALIBRATION_CACHE = {}


def kernel_calibration(w):
    """Constant C matching the kernel double sum to the spectral norm.

    Fixed once per (L, N, β, rule) by a single calibration run on a reference
    Gaussian bump, then cached.
    """
    key = (w.grid.side_length, w.grid.points_per_axis, w.beta, w.rule)
    if key not in _CALIBRATION_CACHE:
        bump = _reference_bump(w.grid)
        spec = h_inner_spectral(bump, bump, w)
        kern = riesz_double_sum_grid(bump, w.beta, method="fft")
        _CALIBRATION_CACHE[key] = spec / kern
    return _CALIBRATION_CACHE[key]


def calibration_prediction(grid, beta):
    """Closed-form prediction (2π)³/(c(β)·h³·L³) for the calibration constant."""
    return (2.0 * np.pi) ** 3 / (
        riesz_spectral_constant(beta) * grid.spacing**3 * grid.side_length**3
    )


def h_norm_kernel(phi, w, method="fft"):
    """‖φ‖² via the calibrated Riesz-kernel double sum."""
    _check_same_grid(phi, w)
    return kernel_calibration(w) * riesz_double_sum_grid(phi, w.beta, method=method)


class ModeIndexMap:
    """Ordered real trigonometric mode basis, orthonormal in the ⟨·,·⟩ space.

    Frequencies are grouped into ±k orbits and ordered by |k| ascending with
    lexicographic tie-break on the representative (k₁,k₂,k₃); j = 1 is the
    constant mode, each proper orbit contributes a cosine then a sine mode,
    and self-paired (Nyquist) frequencies contribute a single cosine.
    """

    def __init__(self, grid, w, n_modes=None, k_max=None):
        self.grid = grid
        self.weights = w
        n = grid.points_per_axis
        half = n // 2
        rng = range(-half, half)
        orbits = {}
        for k1 in rng:
            for k2 in rng:
                for k3 in rng:
                    k = (k1, k2, k3)
                    neg = tuple(((-c + half) % n) - half for c in k)
                    rep = max(k, neg)
                    orbits.setdefault(rep, k == neg)
        if k_max is not None:
            orbits = {
                k: s for k, s in orbits.items() if sum(c * c for c in k) <= k_max**2
            }
        reps = sorted(orbits, key=lambda k: (sum(c * c for c in k), k))
        modes = []
        for rep in reps:
            if rep == (0, 0, 0):
                modes.append(("const", rep))
            elif orbits[rep]:
                modes.append(("nyq", rep))
            else:
                modes.append(("cos", rep))
                modes.append(("sin", rep))
        if n_modes is not None:
            if n_modes > len(modes):
                raise ValueError("n_modes exceeds the available mode count")
            modes = modes[:n_modes]
        self._modes = modes

    def __len__(self):
        return len(self._modes)

    def kind_of(self, j):
        """Mode kind for 1-based index j."""
        return self._modes[j - 1][0]

    def k_of(self, j):
        """Integer frequency vector for 1-based index j."""
        return self._modes[j - 1][1]

    def mode_field(self, j):
        """The j-th orthonormal basis field e_j."""
        kind, k = self._modes[j - 1]
        grid, w = self.grid, self.weights
        n = grid.points_per_axis
        cv = grid.cell_volume_spectral
        wk = float(w.weights[k[0] % n, k[1] % n, k[2] % n])
        norm3 = wk * cv * n**3
        ax = grid.axis()
        phase = (
            (2.0 * np.pi * k[0] / grid.side_length) * ax[:, None, None]
            + (2.0 * np.pi * k[1] / grid.side_length) * ax[None, :, None]
            + (2.0 * np.pi * k[2] / grid.side_length) * ax[None, None, :]
        )
        if kind == "const":
            vals = np.full((n, n, n), norm3**-0.5)
        elif kind == "cos":
            vals = np.sqrt(2.0 / norm3) * np.cos(phase)
        elif kind == "sin":
            vals = np.sqrt(2.0 / norm3) * np.sin(phase)
        else:  # self-paired: cos(phase) = ±1 pointwise
            vals = norm3**-0.5 * np.cos(phase)
        return Field(grid, vals)

    def weight_of(self, j):
        """ŵ(k_j) for 1-based index j."""
        n = self.grid.points_per_axis
        k = self._modes[j - 1][1]
        return float(self.weights.weights[k[0] % n, k[1] % n, k[2] % n])
