"""Deterministic wave machinery on the periodic lattice.

Contains the exact spectral propagator for the 3-d wave equation, the free
initial field, spherical means (Kirchhoff cross-check), the kernel integrals
μ₁/μ₂/μ₄ with their scaling checks, pointwise difference operators, and the
exponent arithmetic report.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .lattice import Field, TorusGrid, cell_self_interaction, inverse_transform, transform

__all__ = [
    "WaveState",
    "InitialData",
    "ExponentReport",
    "AccuracyError",
    "propagate",
    "initial_field",
    "spherical_mean",
    "green_mass",
    "difference_ops",
    "mu_integral",
    "mu_integral_with_error",
    "check_exponents",
]


class AccuracyError(RuntimeError):
    """Raised when successive quadrature refinements fail to converge."""


@dataclass
class WaveState:
    """Position/velocity pair of the semidiscrete wave system."""

    u: Field
    v: Field
    t: float = 0.0

    def __post_init__(self):
        if (self.u.grid.side_length, self.u.grid.points_per_axis) != (
            self.v.grid.side_length,
            self.v.grid.points_per_axis,
        ):
            raise ValueError("position and velocity live on different grids")


@dataclass
class InitialData:
    """Bounded initial position v0 and velocity v0_dot with Hölder exponents."""

    v0: Field
    v0_dot: Field
    holder_exponents: tuple = (1.0, 1.0)

    def __post_init__(self):
        g1, g2 = self.holder_exponents
        if not (0.0 < g1 <= 1.0 and 0.0 < g2 <= 1.0):
            raise ValueError("holder exponents must lie in (0, 1]")


def angular_frequencies(grid):
    """|2πk/L| per lattice frequency, DFT layout."""
    k = grid.freq_integers().astype(float)
    scale = 2.0 * np.pi / grid.side_length
    return scale * np.sqrt(
        k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    )


def propagate(state, delta):
    """Advance a WaveState by time delta; exact for the semidiscrete system.

    Spectral rotation û ← cos(ωδ)û + sinc·δ·v̂, v̂ ← −ω sin(ωδ)û + cos(ωδ)v̂
    with ω = |2πk/L| (ω = 0 uses the limit sin(ωδ)/ω → δ).
    """
    if delta < 0:
        raise ValueError("propagation time must be nonnegative")
    grid = state.u.grid
    om = angular_frequencies(grid)
    uh, vh = transform(state.u), transform(state.v)
    cos, sin = np.cos(om * delta), np.sin(om * delta)
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(om > 0, sin / np.where(om > 0, om, 1.0), delta)
    uh2 = cos * uh + sinc * vh
    vh2 = -om * sin * uh + cos * vh
    return WaveState(
        u=Field.from_spectral(grid, uh2),
        v=Field.from_spectral(grid, vh2),
        t=state.t + delta,
    )


def initial_field(data, t):
    """Free wave field at time t from initial data (position component)."""
    state = WaveState(u=data.v0, v=data.v0_dot, t=0.0)
    return propagate(state, t).u


def green_mass(t):
    """Total mass of the wave kernel at time t."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return float(t)


def _trilinear(values, grid, pts):
    """Periodic trilinear interpolation of grid values at points (M, 3)."""
    n, h = grid.points_per_axis, grid.spacing
    q = np.asarray(pts, dtype=float) / h
    i0 = np.floor(q).astype(np.int64)
    f = q - i0
    out = np.zeros(len(q))
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                wgt = (
                    (f[:, 0] if dx else 1 - f[:, 0])
                    * (f[:, 1] if dy else 1 - f[:, 1])
                    * (f[:, 2] if dz else 1 - f[:, 2])
                )
                out += wgt * values[
                    (i0[:, 0] + dx) % n, (i0[:, 1] + dy) % n, (i0[:, 2] + dz) % n
                ]
    return out


def sphere_quadrature(order):
    """Product rule on the unit sphere: Gauss–Legendre in colatitude,
    uniform in longitude.  Returns (points (M,3), weights summing to 1)."""
    mu, wmu = np.polynomial.legendre.leggauss(order)
    nphi = 2 * order
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    st = np.sqrt(1.0 - mu**2)
    x = st[:, None] * np.cos(phi)[None, :]
    y = st[:, None] * np.sin(phi)[None, :]
    z = np.broadcast_to(mu[:, None], x.shape)
    w = np.broadcast_to((wmu / (2.0 * nphi))[:, None], x.shape)
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    return pts, w.ravel().copy()


def _spectral_upsample(values, grid, factor):
    """Evaluate the trigonometric interpolant of a real field on a grid
    refined by an integer factor (zero-padded FFT with Nyquist splitting)."""
    n = grid.points_per_axis
    u = n * factor
    fk = np.fft.fftshift(np.fft.fftn(values))
    pad = np.zeros((u, u, u), dtype=complex)
    s = (u - n) // 2
    pad[s : s + n, s : s + n, s : s + n] = fk
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis], hi[axis] = s, s + n
        pad[tuple(lo)] *= 0.5
        pad[tuple(hi)] = pad[tuple(lo)]
    fine = np.real(np.fft.ifftn(np.fft.ifftshift(pad))) * factor**3
    return fine, TorusGrid(grid.side_length, u)


def spherical_mean(phi, x, r, quad_order=14, upsample=1):
    """Average of the field phi over the sphere of radius r centered at x.

    Product Gauss–Legendre × uniform-longitude quadrature with trilinear
    interpolation.  ``upsample > 1`` first resamples the band-limited field
    on a finer grid (exact trig interpolation), shrinking the O(h²)
    trilinear error by upsample².
    """
    if quad_order < 6:
        raise ValueError("quad_order must be at least 6")
    grid = phi.grid
    if r >= 0.5 * grid.side_length - grid.spacing:
        raise ValueError("radius too large for the periodic domain")
    values = phi.values
    if upsample > 1:
        values, grid = _spectral_upsample(values, grid, int(upsample))
    pts, w = sphere_quadrature(quad_order)
    samples = _trilinear(values, grid, np.asarray(x, dtype=float) + r * pts)
    return float(np.sum(w * samples))


# ---------------------------------------------------------------------------
# kernel difference operators and μ-integrals


def _resolve_kernel(f, beta=None):
    if callable(f):
        return f
    if f == "riesz":
        if beta is None:
            raise ValueError("riesz kernel requires beta")

        def kern(p):
            r = float(np.linalg.norm(p))
            if r == 0.0:
                raise ZeroDivisionError("Riesz kernel evaluated at its singularity")
            return r**-beta

        return kern
    raise ValueError(f"unknown kernel tag {f!r}")


def difference_ops(f, u, x, beta=None):
    """First and second symmetric differences (Df, D²f) of a kernel.

    Df(u,x) = f(u+x) − f(u);  D²f(u,x) = f(u−x) − 2f(u) + f(u+x).
    """
    kern = _resolve_kernel(f, beta)
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    fu, fp, fm = kern(u), kern(u + x), kern(u - x)
    return fp - fu, fm - 2.0 * fu + fp


def _graded_panels(lo, hi, toward, levels, include_other=False):
    """Panel edges on [lo,hi] geometrically refined toward one endpoint."""
    span = hi - lo
    fracs = 2.0 ** -np.arange(levels, -1, -1.0)
    if toward == "lo":
        edges = lo + span * np.concatenate([[0.0], fracs])
    else:
        edges = hi - span * np.concatenate([[0.0], fracs])[::-1]
    return edges


def _panel_nodes(edges, order):
    x0, w0 = np.polynomial.legendre.leggauss(order)
    lo = edges[:-1][:, None]
    hi = edges[1:][:, None]
    x = 0.5 * (hi - lo) * (x0[None, :] + 1.0) + lo
    w = 0.5 * (hi - lo) * np.broadcast_to(w0[None, :], x.shape)
    return x.ravel(), w.ravel()


def _capped_pow(r2, beta, cap_val):
    return np.minimum(r2 ** (-0.5 * beta), cap_val)


def _angle_average(which, c, d, beta, order, levels, cap_val):
    """(1/2)∫_{−1}^{1} g(c,u) du for separation |w| = c and offset d.

    u is the cosine of the angle between w and the offset direction, so
    |w ± d|² = c² + d² ± 2cdu.  Panels are split at sign changes of the
    integrand and graded toward u = ±1 where the kernel can blow up.
    """
    a = c * c + d * d
    b = 2.0 * c * d

    if which == 1:
        def g(u):
            return _capped_pow(a - b * u, beta, cap_val)
    elif which == 2:
        f0 = min(c**-beta, cap_val)

        def g(u):
            return np.abs(_capped_pow(a + b * u, beta, cap_val) - f0)
    else:
        f0 = min(c**-beta, cap_val)

        def g(u):
            return np.abs(
                _capped_pow(a - b * u, beta, cap_val)
                + _capped_pow(a + b * u, beta, cap_val)
                - 2.0 * f0
            )

    if b == 0.0:
        return float(g(np.array([0.0]))[0])

    # interior sign-change points of the uncapped integrand
    splits = []
    if which == 2:
        u0 = -d / (2.0 * c)
        if -1.0 < u0 < 1.0:
            splits.append(u0)
    elif which == 4:
        # even in u with a single sign change at ±u* (monotone on [0,1])
        def g4(u):
            return (a - b * u) ** (-0.5 * beta) + (a + b * u) ** (-0.5 * beta) - 2.0 * c**-beta

        if g4(0.0) * g4(1.0 - 1e-15) < 0:
            us = brentq(g4, 0.0, 1.0 - 1e-15, xtol=1e-14)
            splits.extend([-us, us])

    knots = sorted({-1.0, 1.0, *splits})
    edges = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        near_sing = min(abs(c - d), abs(c + d)) < 0.05 * (c + d)
        if hi == 1.0 and near_sing:
            edges.append(_graded_panels(lo, hi, "hi", levels))
        elif lo == -1.0 and near_sing:
            edges.append(_graded_panels(lo, hi, "lo", levels))
        else:
            edges.append(np.array([lo, hi]))
    total = 0.0
    for e in edges:
        u, w = _panel_nodes(e, order)
        total += float(np.sum(w * g(u)))
    return 0.5 * total


def _mu_quadrature(which, t, d, beta, order, levels, cap_val):
    """∫₀^{2t} (c/2)(t − c/2)·⟨g⟩(c) dc with graded composite panels.

    The two wave kernels at time s concentrate on spheres of radius s; with
    c = |difference of the two sphere points| the s-integral is analytic,
    leaving the chord weight (c/2)(t − c/2) against the angular average.
    """
    hi = 2.0 * t
    knots = [0.0, hi]
    if 0.0 < d < hi:
        knots.append(d)  # kink of the angular average along c = d
    knots = sorted(set(knots))
    edge_groups = []
    for lo_, hi_ in zip(knots[:-1], knots[1:]):
        e = _graded_panels(lo_, hi_, "lo", levels)
        if d > 0 and hi_ == d:
            e = np.unique(np.concatenate([e, _graded_panels(lo_, hi_, "hi", levels)]))
        edge_groups.append(e)
    total = 0.0
    for e in edge_groups:
        c, w = _panel_nodes(e, order)
        vals = np.array(
            [_angle_average(which, ci, d, beta, order, levels, cap_val) for ci in c]
        )
        total += float(np.sum(w * (c / 2.0) * (t - c / 2.0) * vals))
    return total


def _mu_single(which, t, d, beta, quad, cap_len):
    order = 6 + 2 * quad
    levels = 16 + 6 * quad
    cap_val = cap_len**-beta * cell_self_interaction(beta) if cap_len > 0 else np.inf
    return _mu_quadrature(which, t, d, beta, order, levels, cap_val)


def mu_integral_with_error(which, t, x, y, beta, alpha=None, quad=2, cap_len=0.0):
    """Kernel integral μ_which and its refinement error estimate.

    Returns (value, rel_error) where rel_error compares the requested
    resolution against one refinement level up.
    """
    if which not in (1, 2, 4):
        raise ValueError("which must be 1, 2 or 4")
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if alpha is not None:
        hi = min(2.0 - beta, 1.0) if which == 2 else 2.0 - beta
        if which != 1 and not 0.0 < alpha < hi:
            raise ValueError(f"alpha={alpha} outside the admissible range (0, {hi})")
    d = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    if t == 0.0:
        return 0.0, 0.0
    coarse = _mu_single(which, t, d, beta, quad, cap_len)
    fine = _mu_single(which, t, d, beta, quad + 1, cap_len)
    scale = max(abs(fine), 1e-300)
    return fine, abs(fine - coarse) / scale


def mu_integral(which, t, x, y, beta, alpha=None, quad=2, cap_len=0.0):
    """Kernel integral μ_which(t, x, y); raises AccuracyError if the
    quadrature refinement disagrees by more than 1%."""
    value, err = mu_integral_with_error(which, t, x, y, beta, alpha, quad, cap_len)
    if err > 0.01:
        raise AccuracyError(
            f"mu_{which} quadrature not converged: refinement error {err:.3g} "
            f"(t={t}, dist={np.linalg.norm(np.subtract(x, y)):.4g}, beta={beta}, quad={quad})"
        )
    return value


def mu1_diagonal_closed_form(t, beta):
    """Closed form 2^{1−β} t^{3−β} / ((2−β)(3−β)) for μ₁(t,x,x)."""
    return 2.0 ** (1.0 - beta) * t ** (3.0 - beta) / ((2.0 - beta) * (3.0 - beta))


# ---------------------------------------------------------------------------
# exponent arithmetic


@dataclass(frozen=True)
class ExponentReport:
    """Arithmetic of the auxiliary exponent lemma, reported, never asserted."""

    beta: float
    p: float
    gamma: float
    eta: float
    eta1: float
    hypotheses_hold: bool
    conclusion_holds: bool


def check_exponents(beta, p, gamma):
    """Evaluate η = min((4−β)/2, 3−2γ−6/p−β) and η₁ = η−1−2η/p.

    Reports whether the lemma's hypotheses (p > 2(4−β)/(2−β) and
    γ < (2−β)/2 − 3/p) hold and whether the conclusion η₁ > 0 holds;
    the two are independent flags because the implication can fail.
    """
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    if p <= 0 or gamma <= 0:
        raise ValueError("p and gamma must be positive")
    eta = min((4.0 - beta) / 2.0, 3.0 - 2.0 * gamma - 6.0 / p - beta)
    eta1 = eta - 1.0 - 2.0 * eta / p
    hyp = p > 2.0 * (4.0 - beta) / (2.0 - beta) and gamma < (2.0 - beta) / 2.0 - 3.0 / p
    return ExponentReport(
        beta=beta,
        p=p,
        gamma=gamma,
        eta=eta,
        eta1=eta1,
        hypotheses_hold=hyp,
        conclusion_holds=eta1 > 0.0,
    )
