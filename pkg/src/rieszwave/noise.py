"""Driving Gaussian family, dyadic smoothing, localization, shift-projection.

The noise is a sequence of independent Brownian motions {W_j}, one per
spatial mode, realized as counter-keyed Gaussian fine increments so paths
regenerate bit-exactly and order-independently from the seed record.  The
smoothing scheme replaces W_j on each dyadic interval by the previous
interval's increment (a piecewise-constant, adapted derivative).
"""
from dataclasses import dataclass
from fractions import Fraction
from math import log, sqrt

import numpy as np

from .lattice import Field

__all__ = [
    "BrownianFamily",
    "SmoothedNoise",
    "ControlPath",
    "sample_family",
    "dyadic_floor",
    "smoothed_field",
    "localization_indicator",
    "localization_alpha_min",
    "project_shift",
]


def localization_alpha_min():
    """Smallest admissible localization threshold coefficient, (2 ln 2)^{1/2}."""
    return sqrt(2.0 * log(2.0))


@dataclass(frozen=True)
class BrownianFamily:
    """Independent Brownian paths, one per mode, as fine dyadic increments.

    Increments over the fine step δ = T·2^{−q} are N(0, δ), generated by a
    Philox stream keyed on (root_seed, replica, mode).  The full seed record
    (root_seed, J, q, T, n_replicas) regenerates every path bit-exactly.
    """

    root_seed: int
    J: int
    q: int
    T: float
    n_replicas: int = 1

    def __post_init__(self):
        if self.J < 1 or self.q < 1:
            raise ValueError("J and q must be at least 1")

    @property
    def n_steps(self):
        return 2**self.q

    @property
    def delta(self):
        return self.T * 2.0**-self.q

    def increments(self, r0=0, r1=None):
        """Fine increments for replicas [r0, r1) as an (R, J, steps) array."""
        if r1 is None:
            r1 = self.n_replicas
        steps = self.n_steps
        out = np.empty((r1 - r0, self.J, steps))
        root = int(self.root_seed)
        sd = sqrt(self.delta)
        for r in range(r0, r1):
            for j in range(self.J):
                key = (root << 64) + (r << 32) + j
                gen = np.random.Generator(np.random.Philox(key=key))
                out[r - r0, j] = sd * gen.standard_normal(steps)
        return out

    def coarse_increments(self, n, r0=0, r1=None):
        """W_j(Δ_i) at dyadic level n ≤ q, exact sums of fine increments."""
        if n > self.q:
            raise ValueError("coarse level exceeds the fine level")
        fine = self.increments(r0, r1)
        shape = fine.shape[:2] + (2**n, 2 ** (self.q - n))
        return fine.reshape(shape).sum(axis=-1)

    def seed_record(self):
        return {
            "root_seed": int(self.root_seed),
            "J": self.J,
            "q": self.q,
            "T": self.T,
            "n_replicas": self.n_replicas,
        }


def sample_family(seed, J, q, T, n_replicas=1):
    """Construct the Brownian family for a given seed record."""
    return BrownianFamily(root_seed=int(seed), J=J, q=q, T=T, n_replicas=n_replicas)


def dyadic_floor(t, n, T):
    """(t̲ₙ, tₙ): the level-n dyadic floor of t (capped at (2ⁿ−1)·2^{−n}T)
    and its predecessor tₙ = max(t̲ₙ − 2^{−n}T, 0).  Exact rational
    arithmetic, so interval endpoints never drift."""
    if not 0.0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    ratio = Fraction(t) / Fraction(T)
    k = min(int(ratio * 2**n), 2**n - 1)
    t_under = k * T / 2.0**n
    t_n = max(k - 1, 0) * T / 2.0**n if k >= 1 else 0.0
    return t_under, t_n


@dataclass(frozen=True)
class SmoothedNoise:
    """Level-n dyadic smoothing of a BrownianFamily.

    The mode-j derivative on coarse interval Δ_{i+1} is 2ⁿT^{−1}·W_j(Δ_i);
    it vanishes on Δ_0 (first interval) and for modes j > n, which makes the
    smoothed path adapted with a one-interval delay.
    """

    family: BrownianFamily
    n: int

    def __post_init__(self):
        if self.n < 1 or self.family.q < self.n:
            raise ValueError("need 1 <= n <= q")

    def derivative_table(self, r0=0, r1=None):
        """Ẇ_jⁿ values per coarse interval, shape (R, n, 2ⁿ)."""
        coarse = self.family.coarse_increments(self.n, r0, r1)[:, : self.n, :]
        table = np.zeros_like(coarse)
        table[:, :, 1:] = (2.0**self.n / self.family.T) * coarse[:, :, :-1]
        return table

    def derivative_at(self, t, r0=0, r1=None):
        """Ẇ_jⁿ(t) per mode, shape (R, n)."""
        T = self.family.T
        if not 0.0 <= t <= T:
            raise ValueError(f"t={t} outside [0, {T}]")
        i = min(int(Fraction(t) / Fraction(T) * 2**self.n), 2**self.n - 1)
        return self.derivative_table(r0, r1)[:, :, i]


def smoothed_field(sn, t, mode_map, w, replica=0):
    """Spatial field Σ_{j≤n} Ẇ_jⁿ(t)·e_j(x) for one replica."""
    coeffs = sn.derivative_at(t, replica, replica + 1)[0]
    grid = mode_map.grid
    vals = np.zeros((grid.points_per_axis,) * 3)
    for j in range(1, sn.n + 1):
        c = coeffs[j - 1]
        if c != 0.0:
            vals += c * mode_map.mode_field(j).values
    return Field(grid, vals)


def localization_indicator(fam, n, t, alpha, replica=0, coarse=None):
    """True iff all |W_j(Δ_i)|, j ≤ n, i up to the interval containing t,
    stay below α·n^{1/2}·2^{−n/2}."""
    if alpha <= localization_alpha_min():
        raise ValueError("alpha must exceed (2 ln 2)^{1/2}")
    if coarse is None:
        coarse = fam.coarse_increments(n, replica, replica + 1)[0]
    i_max = max(int(Fraction(t) / Fraction(fam.T) * 2**n) - 1, 0)
    window = coarse[:n, : i_max + 1]
    return bool(np.max(np.abs(window)) <= alpha * sqrt(n) * 2.0 ** (-n / 2.0))


@dataclass(frozen=True)
class ControlPath:
    """Deterministic control: per-mode coefficients h_j on the fine grid."""

    coeffs: np.ndarray  # (J, steps)
    T: float

    def __post_init__(self):
        if self.coeffs.ndim != 2:
            raise ValueError("coeffs must be (modes, steps)")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("control coefficients must be finite")

    @property
    def delta(self):
        return self.T / self.coeffs.shape[1]

    def norm_squared(self):
        """Σ_j ∫₀ᵀ h_j(s)² ds, exact for piecewise-constant coefficients."""
        return float(np.sum(self.coeffs**2) * self.delta)


def project_shift(f, n, t, T):
    """(πₙ∘τₙ)f for a (modes, fine-steps) coefficient array on [0, T].

    τₙ shifts time by one coarse interval 2^{−n}T, clamping the argument at
    t; πₙ then averages over each coarse interval and zeroes modes j > n.
    """
    f = np.asarray(f, dtype=float)
    J, steps = f.shape
    if steps % 2**n != 0:
        raise ValueError("fine grid must refine the coarse dyadic grid")
    block = steps // 2**n
    delta = T / steps
    idx_t = min(int(Fraction(t) / Fraction(T) * steps), steps - 1)
    src = np.arange(steps) + block
    shifted = f[:, np.minimum(src, idx_t)]
    # clamp: arguments past t evaluate at time t
    out = shifted.reshape(J, 2**n, block).mean(axis=-1)
    out = np.repeat(out, block, axis=1)
    out[n:, :] = 0.0
    return out
