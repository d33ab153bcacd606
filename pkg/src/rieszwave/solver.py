"""Time stepping for the stochastic wave equation and its approximations.

One engine integrates every variant — the full equation (noise against A+B),
the smoothed-noise regularization (noise against A, smoothed derivative
against B), their truncations at the dyadic predecessor time, the Picard
iterations, and the deterministic skeleton — so that comparisons between
variants are coupled pathwise through a shared Brownian family.

Scheme: left-point (adapted) coefficient evaluation per fine step.  Noise
increments enter as velocity impulses at the step start (Itô); drift,
control, and smoothed-noise sources are constant over a step and enter via
the exact constant-force response of the spectral oscillator, so the only
time-discretization error sits in the coupling terms.
"""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import noise as noise_mod
from .lattice import (
    Box,
    ModeIndexMap,
    SpectralWeights,
    TorusGrid,
    riesz_spectral_constant,
)
from .noise import ControlPath, dyadic_floor
from .wavekernel import InitialData

__all__ = [
    "ScalarFn",
    "CoefficientSet",
    "SimConfig",
    "PathSolution",
    "DivergenceError",
    "solve_spde",
    "solve_regularized",
    "solve_truncated",
    "picard_iterate",
    "solve_skeleton",
    "mode_forcing_scatter",
]

MAX_FIELD_NORM = 1e12


class DivergenceError(RuntimeError):
    """Field max-norm exceeded the guard cap during stepping."""


@dataclass(frozen=True)
class ScalarFn:
    """Tagged globally-Lipschitz scalar function descriptor."""

    kind: str
    params: tuple

    @classmethod
    def affine(cls, a0, a1):
        return cls("affine", (float(a0), float(a1)))

    @classmethod
    def constant(cls, c):
        return cls.affine(c, 0.0)

    @classmethod
    def zero(cls):
        return cls.affine(0.0, 0.0)

    @classmethod
    def sine(cls, amplitude, frequency):
        return cls("sine", (float(amplitude), float(frequency)))

    @classmethod
    def clipped_linear(cls, slope, cap):
        if cap <= 0:
            raise ValueError("cap must be positive")
        return cls("clipped-linear", (float(slope), float(cap)))

    def __call__(self, x):
        if self.kind == "affine":
            a0, a1 = self.params
            return a0 + a1 * x if a1 != 0.0 else (a0 + 0.0 * x if np.ndim(x) else a0)
        if self.kind == "sine":
            amp, freq = self.params
            return amp * np.sin(freq * x)
        slope, cap = self.params
        return np.clip(slope * x, -cap, cap)

    @property
    def lipschitz(self):
        if self.kind == "affine":
            return abs(self.params[1])
        if self.kind == "sine":
            return abs(self.params[0] * self.params[1])
        return abs(self.params[0])

    @property
    def is_affine(self):
        return self.kind == "affine"

    @property
    def is_constant(self):
        return self.kind == "affine" and self.params[1] == 0.0


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients of the equation: noise A, smoothed-noise B, control D,
    drift b."""

    A: ScalarFn
    B: ScalarFn
    D: ScalarFn
    b: ScalarFn
    requires_affine_B: bool = False

    def validate(self):
        if self.requires_affine_B and not self.B.is_affine:
            raise ValueError(
                "this configuration requires an affine B coefficient "
                "(smoothed-noise convergence hypothesis)"
            )

    def require_affine(self, name):
        fn = getattr(self, name)
        if not fn.is_affine:
            raise ValueError(f"coefficient {name} must be affine for this study")


@dataclass
class SimConfig:
    """Complete problem data for one simulation."""

    grid: TorusGrid
    weights: SpectralWeights
    coefficients: CoefficientSet
    initial: InitialData
    box: Box
    T: float = 1.0
    q: int = 10
    n: int = 3
    k_max: int = 4
    seed: int = 0
    alpha: float = 1.25
    t0: float = 0.5
    control: ControlPath = None

    def __post_init__(self):
        g = self.grid
        if (self.weights.grid.side_length, self.weights.grid.points_per_axis) != (
            g.side_length,
            g.points_per_axis,
        ):
            raise ValueError("weights built on a different grid")
        shield = self.box.diameter + 2.0 * self.T + 2.0 * g.spacing
        if g.side_length < shield:
            raise ValueError(
                f"domain too small: need L >= diam(K) + 2T + 2h = {shield:.4g}, "
                f"got {g.side_length}"
            )
        if self.q < self.n + 3:
            raise ValueError("need fine level q >= n + 3")
        if not 0.0 < self.t0 <= self.T:
            raise ValueError("t0 must lie in (0, T]")
        if self.alpha <= noise_mod.localization_alpha_min():
            raise ValueError("localization alpha must exceed (2 ln 2)^{1/2}")
        self.coefficients.validate()
        self._mode_map = None

    @property
    def mode_map(self):
        if self._mode_map is None:
            self._mode_map = ModeIndexMap(self.grid, self.weights, k_max=self.k_max)
        return self._mode_map

    @property
    def J(self):
        return len(self.mode_map)

    @property
    def n_steps(self):
        return 2**self.q

    @property
    def delta(self):
        return self.T / self.n_steps

    def check_family(self, fam):
        if (fam.J, fam.q, fam.T) != (self.J, self.q, self.T):
            raise ValueError(
                f"Brownian family (J={fam.J}, q={fam.q}, T={fam.T}) inconsistent "
                f"with config (J={self.J}, q={self.q}, T={self.T})"
            )


@dataclass
class PathSolution:
    """Field snapshots on the padded observation sub-box.

    data has shape (replicas, n_times, nx, ny, nz); loc holds the per-replica,
    per-snapshot localization indicator (None for deterministic runs).
    """

    times: np.ndarray
    data: np.ndarray
    box_slices: tuple
    grid: TorusGrid
    loc: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if np.any(np.diff(t) < 0):
            raise ValueError("snapshot times must be sorted")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("snapshots contain non-finite values")
        self.times = t

    def axis_coords(self, axis):
        lo, hi = self.box_slices[axis]
        return self.grid.axis()[lo:hi]

    def save(self, prefix):
        np.savez_compressed(
            f"{prefix}.npz",
            times=self.times,
            data=self.data,
            loc=(self.loc if self.loc is not None else np.zeros(0)),
        )
        sidecar = {
            "side_length": self.grid.side_length,
            "points_per_axis": self.grid.points_per_axis,
            "box_slices": [list(s) for s in self.box_slices],
            "has_loc": self.loc is not None,
            **{k: v for k, v in self.meta.items() if _jsonable(v)},
        }
        with open(f"{prefix}.json", "w") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, prefix):
        with np.load(f"{prefix}.npz") as z:
            times, data, loc = z["times"], z["data"], z["loc"]
        with open(f"{prefix}.json") as fh:
            side = json.load(fh)
        grid = TorusGrid(side["side_length"], side["points_per_axis"])
        meta = {
            k: v
            for k, v in side.items()
            if k not in ("side_length", "points_per_axis", "box_slices", "has_loc")
        }
        return cls(
            times=times,
            data=data,
            box_slices=tuple(tuple(s) for s in side["box_slices"]),
            grid=grid,
            loc=loc if side["has_loc"] else None,
            meta=meta,
        )


def _jsonable(v):
    return isinstance(v, (str, int, float, bool, list, dict, type(None)))


# ---------------------------------------------------------------------------
# spectral machinery


def _rfft_shape(n):
    return (n, n, n // 2 + 1)


def _half_omega(grid):
    n = grid.points_per_axis
    k = grid.freq_integers().astype(float)
    kz = k[: n // 2 + 1]
    scale = 2.0 * np.pi / grid.side_length
    return scale * np.sqrt(
        k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2
    )


def mode_forcing_scatter(mode_map, w):
    """Sparse map from per-mode increments to the raw half-spectrum of the
    physical noise field ΔM = Σ_j ΔW_j·Ẽ_j.

    Ẽ_j is the forcing twin of the orthonormal mode e_j: the same trig
    function scaled so the field covariance is the Riesz kernel, i.e. the
    spectral amplitude carries the physical density c(β)(2π)^{−3}·ŵ(k) per
    spectral cell instead of the bare ŵ(k)^{−1/2} normalization.
    """
    grid = mode_map.grid
    n = grid.points_per_axis
    nh = n // 2 + 1
    cv = grid.cell_volume_spectral
    phys = riesz_spectral_constant(w.beta) / (2.0 * np.pi) ** 3
    rows, cols, vals = [], [], []

    def add(j, kvec, value):
        kx, ky, kz = (c % n for c in kvec)
        if kz <= n // 2:
            rows.append(j - 1)
            cols.append((kx * n + ky) * nh + kz)
            vals.append(value)

    for j in range(1, len(mode_map) + 1):
        kind = mode_map.kind_of(j)
        k = mode_map.k_of(j)
        sk = phys * mode_map.weight_of(j) * cv
        if kind == "const":
            add(j, (0, 0, 0), np.sqrt(sk) * n**3)
        elif kind == "nyq":
            add(j, k, np.sqrt(sk) * n**3)
        else:
            amp = np.sqrt(2.0 * sk) * n**3 / 2.0
            neg = tuple(-c for c in k)
            if kind == "cos":
                add(j, k, amp)
                add(j, neg, amp)
            else:
                add(j, k, -1j * amp)
                add(j, neg, 1j * amp)
    mat = sparse.csr_matrix(
        (np.asarray(vals, complex), (rows, cols)), shape=(len(mode_map), n * n * nh)
    )
    return mat


class _Engine:
    """Shared stepping engine; one instance per (config, variant family)."""

    def __init__(self, cfg):
        self.cfg = cfg
        grid = cfg.grid
        self.n = grid.points_per_axis
        self.om = _half_omega(grid)
        self.scatter = mode_forcing_scatter(cfg.mode_map, cfg.weights)
        d = cfg.delta
        om = self.om
        self.cos = np.cos(om * d)
        self.sin_om = om * np.sin(om * d)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.sinc = np.where(om > 0, np.sin(om * d) / np.where(om > 0, om, 1.0), d)
            self.resp_u = np.where(
                om > 0, (1.0 - np.cos(om * d)) / np.where(om > 0, om, 1.0) ** 2, d * d / 2.0
            )
        self.resp_v = self.sinc
        self.slices = cfg.box.index_slices(grid, cfg.T + 2.0 * grid.spacing)

    def rotate(self, uh, vh, delta=None):
        if delta is None:
            cos, sin_om, sinc = self.cos, self.sin_om, self.sinc
        else:
            om = self.om
            cos = np.cos(om * delta)
            sin_om = om * np.sin(om * delta)
            with np.errstate(invalid="ignore", divide="ignore"):
                sinc = np.where(
                    om > 0, np.sin(om * delta) / np.where(om > 0, om, 1.0), delta
                )
        uh2 = cos * uh + sinc * vh
        vh2 = -sin_om * uh + cos * vh
        return uh2, vh2

    def to_real(self, spec):
        return np.fft.irfftn(spec, s=(self.n,) * 3, axes=(-3, -2, -1))

    def to_spec(self, vals):
        return np.fft.rfftn(vals, axes=(-3, -2, -1))

    def scatter_field(self, coeffs):
        """(R, J) mode coefficients → (R, N, N, N//2+1) raw half-spectra."""
        flat = np.asarray(coeffs @ self.scatter)
        return flat.reshape(coeffs.shape[0], *_rfft_shape(self.n))

    def crop(self, u):
        (x0, x1), (y0, y1), (z0, z1) = self.slices
        return u[..., x0:x1, y0:y1, z0:z1]

    def run(
        self,
        r0,
        r1,
        *,
        snapshot_times,
        dW=None,
        noise_mult="A",
        wn_table=None,
        h_coeffs=None,
        gate_times=None,
        prev=None,
        prev_times=None,
        localize=False,
        collect_full=False,
    ):
        """Integrate replicas [r0, r1) and return snapshot fields.

        dW: (R, J, steps) Brownian increments (impulse source, multiplier
        noise_mult ∈ {"A", "A+B"}).  wn_table: (R, n, 2ⁿ) smoothed derivative
        (density source against B).  h_coeffs: (J, steps) control (density
        against D).  gate_times: per snapshot time, sources are switched off
        at its dyadic predecessor and the state propagated freely.  prev:
        fields the nonlinear coefficients are evaluated on (Picard mode),
        sampled at prev_times.  localize: multiply source terms by the
        shrinking indicator of the observation box.
        """
        cfg = self.cfg
        coeffs = cfg.coefficients
        R = r1 - r0
        nn = (self.n,) * 3
        steps = cfg.n_steps
        delta = cfg.delta

        u0 = np.fft.rfftn(cfg.initial.v0.values)
        v0 = np.fft.rfftn(cfg.initial.v0_dot.values)
        uh = np.broadcast_to(u0, (R,) + u0.shape).copy()
        vh = np.broadcast_to(v0, (R,) + v0.shape).copy()

        snap_idx = {}
        for t in snapshot_times:
            i = int(round(t / delta))
            if abs(i * delta - t) > 1e-9 * max(cfg.T, 1.0):
                raise ValueError(f"snapshot time {t} not on the fine grid")
            snap_idx.setdefault(i, []).append(t)
        gate_idx = {}
        if gate_times is not None:
            for t, tg in gate_times.items():
                gate_idx.setdefault(int(round(tg / delta)), []).append(t)
        last = max(list(snap_idx) + list(gate_idx) + [0])

        need_u = not (
            coeffs.A.is_constant
            and coeffs.B.is_constant
            and coeffs.D.is_constant
            and coeffs.b.is_constant
        )
        block = 2 ** (cfg.q - cfg.n)
        loc_mask = None
        if localize:
            dist = cfg.box.distance_grid(cfg.grid)

        snapshots = {}
        gates = {}
        digest = hashlib.sha256()
        coarse_cache = (None, None)

        for i in range(last + 1):
            t_now = i * delta
            if i in snap_idx:
                u_now = self.to_real(uh)
                for t in snap_idx[i]:
                    snapshots[t] = (u_now if collect_full else self.crop(u_now)).copy()
            if i in gate_idx:
                for t in gate_idx[i]:
                    gates[t] = (uh.copy(), vh.copy(), t_now)
            if i >= last:
                break

            if need_u or prev is not None:
                if prev is not None:
                    j = int(np.searchsorted(prev_times, t_now + 1e-12) - 1)
                    arg = prev[:, max(j, 0)]
                else:
                    arg = self.to_real(uh)
            else:
                arg = np.zeros((R,) + nn)

            if localize:
                mask = (dist <= cfg.T - t_now + 1e-12).astype(float)
            else:
                mask = None

            # impulse source: Brownian increments against A (or A+B)
            if dW is not None:
                inc = dW[:, :, i]
                digest.update(inc.tobytes())
                dmh = self.scatter_field(inc)
                mult = coeffs.A
                a_val = mult(arg)
                if noise_mult == "A+B":
                    a_val = a_val + coeffs.B(arg)
                if mask is not None:
                    a_val = a_val * mask
                if np.ndim(a_val) == 0:
                    vh += a_val * dmh
                else:
                    dm = self.to_real(dmh)
                    vh += self.to_spec(a_val * dm)

            # density sources: smoothed noise against B, control against D, drift
            den = None
            if wn_table is not None:
                interval = i // block
                if coarse_cache[0] != interval:
                    wnh = self.scatter_field(
                        np.pad(wn_table[:, :, interval], ((0, 0), (0, cfg.J - cfg.n)))
                    )
                    coarse_cache = (interval, self.to_real(wnh))
                den = coeffs.B(arg) * coarse_cache[1]
            if h_coeffs is not None:
                hh = self.scatter_field(h_coeffs[None, :, i])
                hval = self.to_real(hh)[0]
                term = coeffs.D(arg) * hval
                den = term if den is None else den + term
            b_val = coeffs.b(arg)
            if np.ndim(b_val) > 0 or b_val != 0.0:
                term = b_val if np.ndim(b_val) > 0 else np.full((R,) + nn, b_val)
                den = term if den is None else den + term
            if den is not None and mask is not None:
                den = den * mask

            uh, vh = self.rotate(uh, vh)
            if den is not None:
                dh = self.to_spec(den)
                uh += self.resp_u * dh
                vh += self.resp_v * dh

            if i % 32 == 0 or i == last - 1:
                # |coef| <= N^3 * max|u|, so this only fires once the field
                # max-norm has genuinely crossed the cap
                peak = np.max(np.abs(uh))
                if not np.isfinite(peak) or peak > MAX_FIELD_NORM * self.n**3:
                    raise DivergenceError(
                        f"field diverged at step {i} (t={t_now:.6g})"
                    )

        # free propagation of gated states to their snapshot times
        for t, (guh, gvh, t_at) in gates.items():
            guh2, _ = self.rotate(guh, gvh, delta=t - t_at)
            u_now = self.to_real(guh2)
            snapshots[t] = u_now if collect_full else self.crop(u_now)

        out_times = sorted(snapshots)
        data = np.stack([snapshots[t] for t in out_times], axis=1)
        if not np.all(np.isfinite(data)):
            raise DivergenceError("non-finite values in snapshot fields")
        return np.asarray(out_times), data, digest.hexdigest()


def _localization_flags(cfg, fam, times, r0, r1):
    flags = np.zeros((r1 - r0, len(times)), dtype=bool)
    coarse = fam.coarse_increments(cfg.n, r0, r1)
    for r in range(r1 - r0):
        for it, t in enumerate(times):
            flags[r, it] = noise_mod.localization_indicator(
                fam, cfg.n, t, cfg.alpha, coarse=coarse[r]
            )
    return flags


def _control_coeffs(cfg):
    if cfg.control is None:
        return None
    h = cfg.control.coeffs
    if h.shape[1] != cfg.n_steps:
        raise ValueError("control path not on the fine grid")
    if h.shape[0] > cfg.J:
        raise ValueError("control uses more modes than the configuration")
    if h.shape[0] < cfg.J:
        h = np.pad(h, ((0, cfg.J - h.shape[0]), (0, 0)))
    return h


def _finish(cfg, eng, times, data, digest, fam=None, variant="full", loc=None):
    meta = {
        "variant": variant,
        "seed_record": fam.seed_record() if fam is not None else None,
        "increment_digest": digest,
        "J": cfg.J,
        "q": cfg.q,
        "n": cfg.n,
    }
    return PathSolution(
        times=times,
        data=data,
        box_slices=eng.slices,
        grid=cfg.grid,
        loc=loc,
        meta=meta,
    )


def solve_spde(cfg, fam, variant="full", snapshot_times=None, replicas=None):
    """Integrate the full equation: noise against (A+B), control against D,
    drift b."""
    if variant != "full":
        raise ValueError("solve_spde only handles the full variant")
    cfg.check_family(fam)
    r0, r1 = replicas if replicas is not None else (0, fam.n_replicas)
    times = snapshot_times if snapshot_times is not None else [cfg.T]
    eng = _Engine(cfg)
    dW = fam.increments(r0, r1)
    t, data, digest = eng.run(
        r0,
        r1,
        snapshot_times=times,
        dW=dW,
        noise_mult="A+B",
        h_coeffs=_control_coeffs(cfg),
    )
    loc = _localization_flags(cfg, fam, t, r0, r1)
    return _finish(cfg, eng, t, data, digest, fam, "full", loc)


def solve_regularized(cfg, fam, sn, snapshot_times=None, replicas=None):
    """Integrate the smoothed-noise equation: Brownian increments against A,
    smoothed derivative against B, control against D, drift b."""
    cfg.check_family(fam)
    if sn.family is not fam and sn.family.seed_record() != fam.seed_record():
        raise ValueError("smoothed noise must be built from the same family")
    if sn.n != cfg.n:
        raise ValueError("smoothing level disagrees with the configuration")
    r0, r1 = replicas if replicas is not None else (0, fam.n_replicas)
    times = snapshot_times if snapshot_times is not None else [cfg.T]
    eng = _Engine(cfg)
    dW = fam.increments(r0, r1)
    wn = sn.derivative_table(r0, r1)
    t, data, digest = eng.run(
        r0,
        r1,
        snapshot_times=times,
        dW=dW,
        noise_mult="A",
        wn_table=wn,
        h_coeffs=_control_coeffs(cfg),
    )
    loc = _localization_flags(cfg, fam, t, r0, r1)
    return _finish(cfg, eng, t, data, digest, fam, "regularized", loc)


def solve_truncated(cfg, fam, sn, variant, snapshot_times=None, replicas=None):
    """Variants with every source gated at the dyadic predecessor tₙ of each
    snapshot time, then propagated freely to the snapshot.

    ``X_trunc`` gates the full dynamics; ``Xn_minus`` gates the regularized
    dynamics.
    """
    if variant not in ("X_trunc", "Xn_minus"):
        raise ValueError("variant must be X_trunc or Xn_minus")
    cfg.check_family(fam)
    r0, r1 = replicas if replicas is not None else (0, fam.n_replicas)
    times = snapshot_times if snapshot_times is not None else [cfg.T]
    gate_times = {t: dyadic_floor(t, cfg.n, cfg.T)[1] for t in times}
    eng = _Engine(cfg)
    dW = fam.increments(r0, r1)
    kwargs = dict(noise_mult="A+B") if variant == "X_trunc" else dict(
        noise_mult="A", wn_table=sn.derivative_table(r0, r1)
    )
    t, data, digest = eng.run(
        r0,
        r1,
        snapshot_times=[],
        dW=dW,
        h_coeffs=_control_coeffs(cfg),
        gate_times=gate_times,
        **kwargs,
    )
    loc = _localization_flags(cfg, fam, t, r0, r1)
    return _finish(cfg, eng, t, data, digest, fam, variant, loc)


def picard_iterate(cfg, fam, sn, m, variant="plain", replicas=None):
    """m-th Picard iterate of the regularized equation on the coarse grid.

    Iterate 0 is the free field localized to the shrinking observation set;
    iterate m evaluates every nonlinear coefficient on iterate m−1 (stored at
    coarse resolution) while integrating the same drivers.  ``minus`` gates
    sources at the dyadic predecessor of each coarse time.
    """
    if m < 0:
        raise ValueError("iteration index must be nonnegative")
    if variant not in ("plain", "minus"):
        raise ValueError("variant must be plain or minus")
    cfg.check_family(fam)
    r0, r1 = replicas if replicas is not None else (0, fam.n_replicas)
    R = r1 - r0
    eng = _Engine(cfg)
    coarse_times = [i * cfg.T / 2**cfg.n for i in range(2**cfg.n + 1)]
    dist = cfg.box.distance_grid(cfg.grid)

    # iterate 0: free field times the shrinking indicator, full grid
    from .wavekernel import WaveState, propagate

    prev = np.empty((R, len(coarse_times)) + (cfg.grid.points_per_axis,) * 3)
    state = WaveState(cfg.initial.v0, cfg.initial.v0_dot, 0.0)
    for it, t in enumerate(coarse_times):
        free = propagate(state, t).u.values
        mask = (dist <= cfg.T - t + 1e-12).astype(float)
        prev[:, it] = free * mask

    masks = np.stack(
        [(dist <= cfg.T - t + 1e-12).astype(float) for t in coarse_times]
    )

    digest = None
    prev_t = np.asarray(coarse_times)
    dW = fam.increments(r0, r1) if m >= 1 else None
    wn = sn.derivative_table(r0, r1) if m >= 1 else None
    hc = _control_coeffs(cfg)
    for _ in range(m):
        if variant == "plain":
            t, data, digest = eng.run(
                r0,
                r1,
                snapshot_times=coarse_times,
                dW=dW,
                noise_mult="A",
                wn_table=wn,
                h_coeffs=hc,
                prev=prev,
                prev_times=prev_t,
                localize=True,
                collect_full=True,
            )
        else:
            gate_times = {t: dyadic_floor(t, cfg.n, cfg.T)[1] for t in coarse_times}
            t, data, digest = eng.run(
                r0,
                r1,
                snapshot_times=[],
                dW=dW,
                noise_mult="A",
                wn_table=wn,
                h_coeffs=hc,
                gate_times=gate_times,
                prev=prev,
                prev_times=prev_t,
                localize=True,
                collect_full=True,
            )
        prev = data * masks[None]
    times = prev_t
    cropped = eng.crop(prev)
    loc = _localization_flags(cfg, fam, times, r0, r1)
    sol = _finish(cfg, eng, times, cropped, digest, fam, f"picard-{variant}", loc)
    sol.meta["picard_m"] = m
    return sol


def solve_skeleton(cfg, snapshot_times=None):
    """Deterministic controlled wave equation: control against D, drift b.

    Consumes no randomness; a single forward pass solves the Volterra system.
    """
    times = snapshot_times if snapshot_times is not None else [cfg.T]
    eng = _Engine(cfg)
    t, data, _ = eng.run(
        0,
        1,
        snapshot_times=times,
        h_coeffs=_control_coeffs(cfg),
    )
    return _finish(cfg, eng, t, data, None, None, "skeleton", None)
